"""Characteristic flow: adaptive integration of the Hamilton equations.

State is (x, p, u) where u is the action accumulated along the trajectory,
du/dt = p dH/dp - H.  The conserved energy is evaluated once at the start
and used in the action equation; evaluating H live at large momenta is
ill-conditioned (sinh-scale cancellation) and would poison u.

Escape to a phase-space corner is detected operationally: the trajectory is
classified as escaped when |p| crosses ``p_cap`` while still moving outward.
For the spin-flip model the remaining lifetime at |p| = 30 is below 1e-25,
so the cap-crossing time is the escape time for all practical tolerances; a
model-specific quadrature of the remaining lifetime is added on top.  For
slowly blowing-up diffusion trajectories the added tail can push the
reported escape time marginally past a horizon that ends right after the
cap crossing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DomainError, IntegrationFailureError
from .models import (
    CurieWeiss,
    ModelSpec,
    _polyval,
    hamiltonian,
)

# Dormand-Prince 5(4) tableau, unrolled in the stepper for speed
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = (9017 / 3168, -355 / 33, 46732 / 5247,
                                49 / 176, -5103 / 18656)
_B1, _B3, _B4, _B5c, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                                -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@dataclass(frozen=True)
class PhasePoint:
    x: float
    p: float


@dataclass(frozen=True)
class Corner:
    """Idealized corner state: sign=+1 for the right corner (boundary with
    p -> +inf), sign=-1 for the left one."""

    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ConfigError("corner sign must be -1 or +1")


ExtendedPoint = Union[PhasePoint, Corner]


@dataclass(frozen=True)
class Alive:
    pass


@dataclass(frozen=True)
class Escaped:
    corner: int
    escape_time: float


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.05
    #: momentum magnitude treated as escaped
    p_cap: float = 30.0
    #: distance from the boundary below which a start is rejected
    boundary_margin: float = 1e-9

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "p_cap", "boundary_margin"):
            if not (getattr(self, name) > 0.0):
                raise ConfigError(f"{name} must be positive")
        if self.p_cap < 10.0:
            raise ConfigError("p_cap must be >= 10")

    def tightened(self, factor: float) -> "IntegratorConfig":
        return IntegratorConfig(
            rel_tol=self.rel_tol / factor, abs_tol=self.abs_tol / factor,
            max_step=self.max_step, p_cap=self.p_cap,
            boundary_margin=self.boundary_margin)


@dataclass
class FlowResult:
    ts: np.ndarray
    xs: np.ndarray
    ps: np.ndarray
    us: np.ndarray
    status: Union[Alive, Escaped]
    energy_drift: float

    @property
    def escaped(self) -> bool:
        return isinstance(self.status, Escaped)

    def final(self) -> tuple[float, float, float]:
        return float(self.xs[-1]), float(self.ps[-1]), float(self.us[-1])

    def state_at(self, t: float) -> tuple[float, float, float]:
        """State at a recorded sample time (checkpoint landings are exact)."""
        i = int(np.searchsorted(self.ts, t - 1e-12 * max(1.0, abs(t))))
        if i >= len(self.ts) or abs(self.ts[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"t={t} is not a recorded sample time")
        return float(self.xs[i]), float(self.ps[i]), float(self.us[i])


def _make_rhs(model: ModelSpec) -> Callable[[float, float], tuple[float, float]]:
    """Specialized (dx/dt, dp/dt) closure; the integrator hot path."""
    if isinstance(model, CurieWeiss):
        beta, h = model.beta, model.h
        sinh, cosh = math.sinh, math.cosh

        def rhs(x: float, p: float) -> tuple[float, float]:
            z = beta * x + h + p
            z2 = z + p
            v = 2.0 * sinh(z2) - 2.0 * x * cosh(z2)
            f = 2.0 * sinh(p) * ((1.0 - beta) * cosh(z) + beta * x * sinh(z))
            return v, f

        return rhs

    w1, w2 = model.w1, model.w2

    def rhs_diffusion(x: float, p: float) -> tuple[float, float]:
        return p - _polyval(w1, x), p * _polyval(w2, x)

    return rhs_diffusion


def _outward(model: ModelSpec, rhs, x: float, p: float) -> bool:
    """True when (x, p) beyond the cap is still heading for its corner.

    For the spin-flip model the position velocity is cancellation noise at
    large |p| (x is pinned at the boundary), so the momentum growth sign is
    used; for the diffusion model the position velocity is well conditioned.
    """
    v, f = rhs(x, p)
    if isinstance(model, CurieWeiss):
        return f * p > 0.0
    return v * p > 0.0


def _escape_tail(model: ModelSpec, x_end: float, p_end: float) -> float:
    """Estimated remaining lifetime after the cap crossing.

    Spin-flip: quadrature of the momentum equation with the position frozen
    at the boundary (exact for beta = 0, where the momentum is autonomous).
    Diffusion: quadrature of dx / sqrt(W'(x)^2 + 2E) to infinity by energy
    conservation; quadratic wells have no finite-time position escape, so
    their tail is zero (cap-crossing semantics).
    """
    sign = 1.0 if p_end > 0 else -1.0
    if isinstance(model, CurieWeiss):
        beta, h = model.beta, model.h
        x_frozen = sign  # the boundary the trajectory is pinned to

        def rate(q: float) -> float:
            z = beta * x_frozen + h + sign * q
            return abs(2.0 * math.sinh(q) * ((1.0 - beta) * math.cosh(z)
                                             + beta * x_frozen * math.sinh(z)))

        lo = abs(p_end)
        qs = np.linspace(lo, lo + 40.0, 401)
        integrand = np.array([1.0 / max(rate(q), 1e-300) for q in qs])
        return float(np.trapezoid(integrand, qs))

    k = len(model.w1) - 1  # degree of W'
    if k < 2:
        return 0.0
    energy = hamiltonian(model, x_end, p_end)

    def speed(y: float) -> float:
        w1 = _polyval(model.w1, sign * y)
        return math.sqrt(max(w1 * w1 + 2.0 * energy, 1e-300))

    y0 = sign * x_end
    y_far = max(10.0, 4.0 * abs(x_end))
    ys = np.linspace(y0, y_far, 2001)
    integrand = np.array([1.0 / speed(y) for y in ys])
    tail = float(np.trapezoid(integrand, ys))
    lead = abs(model.w1[-1])
    tail += y_far ** (1 - k) / (lead * (k - 1))
    return tail


def integrate(model: ModelSpec, start: PhasePoint, u0: float, t_end: float,
              config: IntegratorConfig,
              t_eval: Optional[Sequence[float]] = None) -> FlowResult:
    """Integrate the Hamilton equations plus action from ``start`` to
    ``t_end`` (or escape), with an embedded 5(4) pair and local error
    control.  ``t_eval`` times are hit exactly and appear among the samples.
    """
    lo, hi = model.state_space
    if not (lo + config.boundary_margin < start.x < hi - config.boundary_margin):
        raise DomainError(f"start x={start.x} too close to the boundary")
    if not (t_end > 0.0):
        raise DomainError("t_end must be positive")
    if not math.isfinite(start.p):
        raise DomainError("start momentum must be finite")

    rhs = _make_rhs(model)
    h0_energy = hamiltonian(model, start.x, start.p)

    requested = [] if t_eval is None else [float(t) for t in t_eval]
    checkpoints: list[float] = []
    for tc in sorted(t for t in requested if 0.0 < t <= t_end):
        if not checkpoints or tc - checkpoints[-1] > 1e-12:
            checkpoints.append(tc)
    if not checkpoints or t_end - checkpoints[-1] > 1e-12:
        checkpoints.append(t_end)
    cp_index = 0

    t, x, p, u = 0.0, float(start.x), float(start.p), float(u0)
    ts, xs, ps, us = [t], [x], [p], [u]

    v1, f1 = rhs(x, p)
    k1 = (v1, f1, p * v1 - h0_energy)
    abs_tol, rel_tol = config.abs_tol, config.rel_tol

    def rk_step(h: float) -> tuple[tuple, tuple, float]:
        """One 5(4) step of size h from (x, p, u); returns (y5, k7, err).

        Overly large trial steps can push stage momenta into sinh overflow;
        those steps report an infinite error and get rejected.
        """
        k1v, k1f, k1u = k1
        try:
            ax = x + h * (_A21 * k1v)
            ap = p + h * (_A21 * k1f)
            k2v, k2f = rhs(ax, ap)
            k2u = ap * k2v - h0_energy

            ax = x + h * (_A31 * k1v + _A32 * k2v)
            ap = p + h * (_A31 * k1f + _A32 * k2f)
            k3v, k3f = rhs(ax, ap)
            k3u = ap * k3v - h0_energy

            ax = x + h * (_A41 * k1v + _A42 * k2v + _A43 * k3v)
            ap = p + h * (_A41 * k1f + _A42 * k2f + _A43 * k3f)
            k4v, k4f = rhs(ax, ap)
            k4u = ap * k4v - h0_energy

            ax = x + h * (_A51 * k1v + _A52 * k2v + _A53 * k3v + _A54 * k4v)
            ap = p + h * (_A51 * k1f + _A52 * k2f + _A53 * k3f + _A54 * k4f)
            k5v, k5f = rhs(ax, ap)
            k5u = ap * k5v - h0_energy

            ax = x + h * (_A61 * k1v + _A62 * k2v + _A63 * k3v + _A64 * k4v
                          + _A65 * k5v)
            ap = p + h * (_A61 * k1f + _A62 * k2f + _A63 * k3f + _A64 * k4f
                          + _A65 * k5f)
            k6v, k6f = rhs(ax, ap)
            k6u = ap * k6v - h0_energy

            x5 = x + h * (_B1 * k1v + _B3 * k3v + _B4 * k4v + _B5c * k5v
                          + _B6 * k6v)
            p5 = p + h * (_B1 * k1f + _B3 * k3f + _B4 * k4f + _B5c * k5f
                          + _B6 * k6f)
            u5 = u + h * (_B1 * k1u + _B3 * k3u + _B4 * k4u + _B5c * k5u
                          + _B6 * k6u)
            v7, f7 = rhs(x5, p5)
        except OverflowError:
            return (x, p, u), k1, math.inf
        k7 = (v7, f7, p5 * v7 - h0_energy)

        ex = h * (_E1 * k1v + _E3 * k3v + _E4 * k4v + _E5 * k5v + _E6 * k6v
                  + _E7 * k7[0])
        ep = h * (_E1 * k1f + _E3 * k3f + _E4 * k4f + _E5 * k5f + _E6 * k6f
                  + _E7 * k7[1])
        eu = h * (_E1 * k1u + _E3 * k3u + _E4 * k4u + _E5 * k5u + _E6 * k6u
                  + _E7 * k7[2])
        err = max(
            abs(ex) / (abs_tol + rel_tol * max(abs(x), abs(x5))),
            abs(ep) / (abs_tol + rel_tol * max(abs(p), abs(p5))),
            abs(eu) / (abs_tol + rel_tol * max(abs(u), abs(u5))),
        )
        if not math.isfinite(err):
            return (x, p, u), k1, math.inf
        return (x5, p5, u5), k7, err

    def record(t_new: float, state: tuple[float, float, float]) -> None:
        # near blow-up h drops below the float resolution of t; the state
        # still advances, so overwrite the stalled sample instead of
        # breaking the strictly-increasing time invariant
        if t_new > ts[-1]:
            ts.append(t_new)
            xs.append(state[0])
            ps.append(state[1])
            us.append(state[2])
        else:
            xs[-1], ps[-1], us[-1] = state

    h = min(config.max_step, 1e-3, t_end)
    status: Union[Alive, Escaped, None] = None
    rejections = 0

    while status is None:
        target = checkpoints[cp_index]
        h = min(h, config.max_step, target - t)
        if h < 1e-300 or rejections > 80:
            raise IntegrationFailureError(
                f"step size underflow at t={t}", last_state=(t, x, p, u))

        y5, k7, err = rk_step(h)
        if err > 1.0:
            rejections += 1
            h *= _MIN_FACTOR if not math.isfinite(err) else \
                max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            continue
        rejections = 0

        x_new, p_new, u_new = y5
        crossed = abs(p_new) >= config.p_cap and abs(p) < config.p_cap
        if abs(p_new) >= config.p_cap and _outward(model, rhs, x_new, p_new):
            if crossed:
                # bisect the step for the cap-crossing time
                h_lo, h_hi = 0.0, h
                for _ in range(60):
                    h_mid = 0.5 * (h_lo + h_hi)
                    y_mid, _, _ = rk_step(h_mid)
                    if abs(y_mid[1]) >= config.p_cap:
                        h_hi = h_mid
                    else:
                        h_lo = h_mid
                    if h_hi - h_lo <= 1e-15 * max(1.0, h):
                        break
                y5, k7, _ = rk_step(h_hi)
                x_new, p_new, u_new = y5
                h = h_hi
            t += h
            record(t, (x_new, p_new, u_new))
            status = Escaped(corner=1 if p_new > 0 else -1,
                             escape_time=t + _escape_tail(model, x_new, p_new))
            break

        t += h
        if abs(t - target) <= 1e-12 * max(1.0, target):
            t = target
        x, p, u = x_new, p_new, u_new
        k1 = k7
        record(t, (x, p, u))

        if t >= checkpoints[-1]:
            status = Alive()
        else:
            if t >= target and cp_index < len(checkpoints) - 1:
                cp_index += 1
            factor = _MAX_FACTOR if err == 0.0 else \
                min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))
            h = h * factor

    ts_a = np.array(ts)
    xs_a = np.array(xs)
    ps_a = np.array(ps)
    us_a = np.array(us)

    # drift is measured where H evaluation is well conditioned
    window = max(10.0, abs(start.p) + 1.0)
    mask = np.abs(ps_a) <= window
    if isinstance(model, CurieWeiss):
        mask &= np.abs(xs_a) <= 1.0
    drift = 0.0
    for xi, pi in zip(xs_a[mask], ps_a[mask]):
        drift = max(drift, abs(hamiltonian(model, float(xi), float(pi))
                               - h0_energy))
    return FlowResult(ts=ts_a, xs=xs_a, ps=ps_a, us=us_a,
                      status=status, energy_drift=drift)


ESCAPE_HORIZON = 1e3


def escape_time(model: ModelSpec, start: PhasePoint,
                config: IntegratorConfig) -> float:
    """Maximal existence time of the trajectory from ``start``; ``math.inf``
    when the horizon (1e3) is reached alive.

    For the spin-flip model at beta = 0 the momentum equation is autonomous
    and the cap-crossing tail is a plain quadrature; otherwise the measured
    time is refined by a second run at rel_tol/32 (the step-halving
    equivalent for a fifth-order controller) and extrapolation of the pair.
    """
    res = integrate(model, start, 0.0, ESCAPE_HORIZON, config)
    if not res.escaped:
        return math.inf
    t1 = res.status.escape_time
    if isinstance(model, CurieWeiss) and model.beta == 0.0:
        return t1
    res2 = integrate(model, start, 0.0, ESCAPE_HORIZON, config.tightened(32.0))
    if not res2.escaped:
        return t1
    t2 = res2.status.escape_time
    return t2 + (t2 - t1) / 31.0


def extended_flow(model: ModelSpec, t: float, point: ExtendedPoint,
                  config: IntegratorConfig) -> ExtendedPoint:
    """Compactified flow: corners are fixed points; interior points map to
    their time-t state or to the corner they escape through before t."""
    if isinstance(point, Corner):
        return point
    if t < 0.0:
        raise DomainError("t must be >= 0")
    if t == 0.0:
        return point
    res = integrate(model, point, 0.0, t, config)
    if res.escaped:
        return Corner(sign=res.status.corner)
    x, p, _ = res.final()
    return PhasePoint(x=x, p=p)


def trajectory_rows(model: ModelSpec, result: FlowResult) -> list[tuple]:
    """Rows (t, x, p, u, H) for the CSV trajectory dump; x is clamped to the
    state space for the H column (float noise can leave it by ~1e-14)."""
    clamp = isinstance(model, CurieWeiss)
    rows = []
    for t, x, p, u in zip(result.ts, result.xs, result.ps, result.us):
        xc = min(max(float(x), -1.0), 1.0) if clamp else float(x)
        rows.append((float(t), float(x), float(p), float(u),
                     hamiltonian(model, xc, float(p))))
    return rows
