"""Hamiltonian flow integration, escape detection, compactified flow."""
import math

import numpy as np
import pytest

from gnglab.errors import DomainError, IntegrationFailureError
from gnglab.flow import (
    Alive,
    Corner,
    Escaped,
    IntegratorConfig,
    PhasePoint,
    escape_time,
    extended_flow,
    integrate,
    trajectory_rows,
)
from gnglab.models import hamiltonian, lagrangian, velocity

from conftest import cw, quartic_diffusion


CFG = IntegratorConfig()


def free_escape_time(p0):
    """Quadrature oracle for beta = h = 0: the momentum equation is
    autonomous, so the lifetime is -0.5 log tanh |p0|."""
    return -0.5 * math.log(math.tanh(abs(p0)))


# --- basic integration -------------------------------------------------------

def test_free_dynamics_closed_form(cw_free):
    # p stays 0, x relaxes as x0 e^{-2t}
    res = integrate(cw_free, PhasePoint(0.3, 0.0), 0.0, 1.0, CFG)
    assert isinstance(res.status, Alive)
    x, p, u = res.final()
    assert x == pytest.approx(0.3 * math.exp(-2.0), abs=1e-9)
    assert p == pytest.approx(0.0, abs=1e-12)
    assert u == pytest.approx(0.0, abs=1e-12)
    assert res.ts[0] == 0.0 and res.ts[-1] == 1.0
    assert np.all(np.diff(res.ts) > 0)


def test_escape_status_and_time(cw_free):
    res = integrate(cw_free, PhasePoint(0.0, 1.2328), 0.0, 1.0, CFG)
    assert isinstance(res.status, Escaped)
    assert res.status.corner == 1
    assert res.status.escape_time == pytest.approx(
        free_escape_time(1.2328), abs=1e-4)
    assert res.status.escape_time <= 1.0
    # mirrored start escapes through the other corner
    res2 = integrate(cw_free, PhasePoint(0.0, -1.2328), 0.0, 1.0, CFG)
    assert isinstance(res2.status, Escaped)
    assert res2.status.corner == -1


def test_equilibrium_branch_conserves_zero_energy():
    model = cw(1.5)
    x0 = 0.5
    p0 = math.atanh(x0) - 1.5 * x0
    res = integrate(model, PhasePoint(x0, p0), 0.0, 1.0, CFG)
    assert isinstance(res.status, Alive)
    assert res.energy_drift <= 1e-9
    for x, p in zip(res.xs, res.ps):
        assert abs(hamiltonian(model, min(max(x, -1), 1), p)) <= 1e-9


def test_energy_conservation_random_starts():
    rng = np.random.default_rng(42)
    alive = 0
    for model in (cw(1.5), quartic_diffusion(1.0)):
        for _ in range(50):
            x0 = rng.uniform(-0.9, 0.9)
            p0 = rng.uniform(-2.0, 2.0)
            res = integrate(model, PhasePoint(x0, p0), 0.0, 1.0, CFG)
            if isinstance(res.status, Alive):
                alive += 1
                assert res.energy_drift <= 1e-8
    assert alive >= 15


def test_time_additivity():
    model = cw(1.5)
    start = PhasePoint(0.3, -0.2)
    full = integrate(model, start, 0.25, 0.7, CFG)
    part1 = integrate(model, start, 0.25, 0.3, CFG)
    x1, p1, u1 = part1.final()
    part2 = integrate(model, PhasePoint(x1, p1), u1, 0.4, CFG)
    for got, want in zip(part2.final(), full.final()):
        assert got == pytest.approx(want, abs=1e-7)


def test_action_consistency_with_lagrangian_quadrature():
    model = cw(1.5)
    config = IntegratorConfig(max_step=0.005)
    res = integrate(model, PhasePoint(0.4, -0.3), 0.0, 1.0, config)
    assert isinstance(res.status, Alive)
    costs = []
    for x, p in zip(res.xs, res.ps):
        v = velocity(model, float(x), float(p))
        costs.append(lagrangian(model, float(x), v).value)
    quad = float(np.trapezoid(costs, res.ts))
    assert res.us[-1] - res.us[0] == pytest.approx(quad, abs=1e-5)


def test_checkpoints_are_recorded_exactly():
    model = cw(1.5)
    res = integrate(model, PhasePoint(0.3, -0.2), 0.0, 1.0, CFG,
                    t_eval=[0.25, 0.5, 0.75])
    for t in (0.25, 0.5, 0.75, 1.0):
        x, p, u = res.state_at(t)
        direct = integrate(model, PhasePoint(0.3, -0.2), 0.0, t, CFG).final()
        assert x == pytest.approx(direct[0], abs=1e-8)
        assert p == pytest.approx(direct[1], abs=1e-8)


def test_determinism(cw_free):
    r1 = integrate(cw_free, PhasePoint(0.2, 0.4), 0.0, 0.3, CFG)
    r2 = integrate(cw_free, PhasePoint(0.2, 0.4), 0.0, 0.3, CFG)
    assert np.array_equal(r1.ts, r2.ts)
    assert np.array_equal(r1.xs, r2.xs)
    assert np.array_equal(r1.ps, r2.ps)


def test_start_validation(cw_free):
    with pytest.raises(DomainError):
        integrate(cw_free, PhasePoint(1.0, 0.0), 0.0, 1.0, CFG)
    with pytest.raises(DomainError):
        integrate(cw_free, PhasePoint(0.0, 0.0), 0.0, -1.0, CFG)


def test_integration_failure_carries_state(cw_free):
    bad = IntegratorConfig(rel_tol=1e-300, abs_tol=1e-300)
    with pytest.raises(IntegrationFailureError) as exc_info:
        integrate(cw_free, PhasePoint(0.3, 0.5), 0.0, 1.0, bad)
    assert exc_info.value.last_state is not None


def test_quadrant_preservation():
    # right-upper quadrant at (0.1, 0.1) for beta in (0, 2], h = 0
    model = cw(1.5)
    rng = np.random.default_rng(9)
    for _ in range(20):
        x0 = rng.uniform(0.1, 0.9)
        p0 = rng.uniform(0.1, 2.0)
        res = integrate(model, PhasePoint(x0, p0), 0.0, 1.0, CFG)
        assert np.all(res.xs >= 0.1 - 1e-9)
        assert np.all(res.ps >= 0.1 - 1e-9)


# --- escape times ------------------------------------------------------------

def test_escape_time_quadrature(cw_free):
    for x0 in (-0.5, 0.0, 0.7):
        got = escape_time(cw_free, PhasePoint(x0, 0.5), CFG)
        assert got == pytest.approx(free_escape_time(0.5), abs=1e-4)
    assert free_escape_time(0.5) == pytest.approx(0.38601, abs=5e-5)


def test_escape_time_infinite_for_stationary(cw_free):
    assert escape_time(cw_free, PhasePoint(0.3, 0.0), CFG) == math.inf
    assert escape_time(quartic_diffusion(1.0), PhasePoint(0.0, 0.0),
                       CFG) == math.inf


def test_escape_time_monotone_in_momentum(cw_free):
    taus = [escape_time(cw_free, PhasePoint(0.0, p), CFG)
            for p in (0.5, 1.0, 1.5)]
    assert taus[0] > taus[1] > taus[2]


def test_escape_symmetry(cw_free):
    for x0, p0 in ((0.3, 0.8), (-0.6, 1.1)):
        t_plus = escape_time(cw_free, PhasePoint(x0, p0), CFG)
        t_minus = escape_time(cw_free, PhasePoint(-x0, -p0), CFG)
        assert t_plus == pytest.approx(t_minus, abs=1e-8)


def test_reintegration_to_fraction_stays_alive():
    for model, start in [(cw(0.0), PhasePoint(0.1, 0.8)),
                         (cw(1.5), PhasePoint(0.5, 1.0))]:
        tau = escape_time(model, start, CFG)
        assert math.isfinite(tau)
        res = integrate(model, start, 0.0, 0.999 * tau, CFG)
        assert isinstance(res.status, Alive)
    # diffusion blow-up is slow past the cap: the estimated lifetime
    # extends beyond the operational (cap-crossing) death, so the 99.9%
    # property applies to the cap time there
    model, start = quartic_diffusion(1.0), PhasePoint(1.4, 2.0)
    full = integrate(model, start, 0.0, 1e3, CFG)
    assert isinstance(full.status, Escaped)
    cap_time = float(full.ts[-1])
    assert full.status.escape_time >= cap_time
    res = integrate(model, start, 0.0, 0.999 * cap_time, CFG)
    assert isinstance(res.status, Alive)


def test_diffusion_escape_has_finite_time():
    model = quartic_diffusion(1.0)
    tau = escape_time(model, PhasePoint(1.5, 3.0), CFG)
    assert math.isfinite(tau)
    assert tau > 0.0


# --- extended flow -----------------------------------------------------------

def test_extended_flow_cases(cw_free):
    assert extended_flow(cw_free, 5.0, Corner(1), CFG) == Corner(1)
    assert extended_flow(cw_free, 5.0, Corner(-1), CFG) == Corner(-1)

    out = extended_flow(cw_free, 1.0, PhasePoint(0.0, 1.2328), CFG)
    assert out == Corner(1)

    q = PhasePoint(0.2, 0.05)
    assert extended_flow(cw_free, 0.0, q, CFG) == q

    still_alive = extended_flow(cw_free, 0.05, PhasePoint(0.0, 1.2328), CFG)
    assert isinstance(still_alive, PhasePoint)


def test_trajectory_rows(cw_free):
    res = integrate(cw_free, PhasePoint(0.3, 0.1), 0.0, 0.2, CFG)
    rows = trajectory_rows(cw_free, res)
    assert len(rows) == len(res.ts)
    t, x, p, u, energy = rows[0]
    assert (t, x, p, u) == (0.0, 0.3, 0.1, 0.0)
    assert energy == pytest.approx(hamiltonian(cw_free, 0.3, 0.1))
