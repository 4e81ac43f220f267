"""Analytic thresholds, order-preservation certificates, rotating loops,
and scenario scans over the evolving rate function.

The vertical-tangent time of the pushed graph at a stationary point follows
from the linearized flow: with m the mixed derivative, c > 0 the momentum
curvature of H at (x0, 0), and q = I0''(x0) < min(-2m/c, 0),

    t0 = -log(1 + (c q / 2m)^(-1)) / (2m)     (m != 0)
    t0 = -1 / (c q)                            (m = 0)

and the exact flow's slope through x0 crosses zero at exactly t0 (the
linearizing chart has unit derivative at the fixed point).  The per-model
closed forms quoted for the heating scenario disagree with this by a sign
(+-1 model) or by coefficients (diffusion); the report computes both and
flags the discrepancy, trusting the numerically validated vertical-tangent
time.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ._rootfind import bisect, newton_bracketed
from .errors import (
    BracketError,
    ConfigError,
    EscapeError,
    InapplicableError,
    NonRotatingError,
)
from .flow import Escaped, IntegratorConfig, PhasePoint, integrate
from .models import (
    CurieWeiss,
    CWEntropy,
    Diffusion,
    ModelSpec,
    PolynomialRate,
    RateFunctionSpec,
    derivatives,
    hamiltonian,
    min_energy,
    momentum_of_min_energy,
    rate0,
    velocity,
)
from .pushforward import (
    TrajectoryPool,
    detect_overhangs,
    push_graph,
    sample_initial_graph,
)
from .rate_evolution import classify_differentiability, envelope


# ---------------------------------------------------------------------------
# linearization threshold


@dataclass(frozen=True)
class LinearizationData:
    """Ingredients of the vertical-tangent time at a stationary point."""

    x0: float
    d2Hdxdp: float
    d2Hdp2: float
    i0_second: float

    def __post_init__(self):
        if not (self.d2Hdp2 > 0.0):
            raise ConfigError("momentum curvature must be positive")


def linearization_data(model: ModelSpec, spec: RateFunctionSpec,
                       x0: float) -> LinearizationData:
    """Evaluate the linearization ingredients; x0 must be stationary."""
    if abs(velocity(model, x0, 0.0)) > 1e-10:
        raise InapplicableError(f"x0={x0} is not a stationary point")
    d = derivatives(model, x0, 0.0)
    return LinearizationData(x0=x0, d2Hdxdp=d.d2Hdxdp, d2Hdp2=d.d2Hdp2,
                             i0_second=rate0(spec, x0).second_deriv)


def linearization_threshold(data: LinearizationData) -> float:
    """Time at which the linearized flow turns the initial-slope line
    through the stationary point vertical; an overhang exists beyond it."""
    m, c, q = data.d2Hdxdp, data.d2Hdp2, data.i0_second
    if not (q < min(-2.0 * m / c, 0.0)):
        raise InapplicableError(
            f"profile curvature {q} does not satisfy q < min(-2m/c, 0) "
            f"= {min(-2.0 * m / c, 0.0)}")
    if m == 0.0:
        return -1.0 / (c * q)
    arg = 1.0 + 2.0 * m / (c * q)
    if arg <= 0.0:
        # unreachable under the precondition; float-pathology guard
        raise InapplicableError(f"log argument {arg} not positive")
    return -math.log(arg) / (2.0 * m)


def slope_sign_at(model: ModelSpec, spec: RateFunctionSpec, x0: float,
                  t: float, dx: float,
                  config: Optional[IntegratorConfig] = None) -> float:
    """Central-difference slope of the pushed position through x0 at time t;
    its sign flip marks the vertical tangent."""
    config = config or IntegratorConfig()
    if t == 0.0:
        return 1.0
    ends = []
    for x_start in (x0 - dx, x0 + dx):
        r = rate0(spec, x_start)
        res = integrate(model, PhasePoint(x_start, r.deriv), r.value, t, config)
        if isinstance(res.status, Escaped):
            raise EscapeError(f"neighbor at x0={x_start} escaped before t={t}")
        ends.append(res.final()[0])
    return (ends[1] - ends[0]) / (2.0 * dx)


def overhang_onset(model: ModelSpec, spec: RateFunctionSpec, t_lo: float,
                   t_hi: float, config: Optional[IntegratorConfig] = None,
                   n: int = 801, margin: float = 1e-6,
                   method: str = "overhang", x0: float = 0.0,
                   dx: float = 1e-3, width: float = 1e-3) -> float:
    """Bisect in time for the first overhang (default) or for the slope
    sign flip through x0 (``method='slope'``)."""
    config = config or IntegratorConfig()
    if method == "overhang":
        samples = sample_initial_graph(spec, n=n, margin=margin)

        def present(t: float) -> bool:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                pf = push_graph(model, samples, t, config)
            return not detect_overhangs(pf).is_graph
    elif method == "slope":
        def present(t: float) -> bool:
            return slope_sign_at(model, spec, x0, t, dx, config) < 0.0
    else:
        raise ConfigError(f"unknown onset method {method!r}")

    if present(t_lo):
        raise BracketError(f"already present at t_lo={t_lo}")
    if not present(t_hi):
        raise BracketError(f"still absent at t_hi={t_hi}")
    lo, hi = t_lo, t_hi
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if present(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# order preservation


@dataclass(frozen=True)
class OrderPreservationReport:
    criterion: str
    holds: bool
    counterexample: Optional[tuple[float, float, float]] = None


Region = Union[str, tuple]


def order_preservation_certificate(model: ModelSpec, region: Region = "whole",
                                   n_samples: int = 40,
                                   p_span: float = 5.0) -> OrderPreservationReport:
    """Sampled certificate that the flow preserves componentwise order.

    ``region`` is ``"whole"`` or ``("upper", y, q)`` / ``("lower", y, q)``
    for the quadrants {x >= y, p >= q} / {x <= y, p <= q} (sampled on their
    interiors with a small inset).  The criteria checked are monotonicity of
    the force in position alone (strict) or in both coordinates, evaluated
    on a lattice; for the diffusion model the force derivative factors
    through W''', whose sign is checked directly.
    """
    inset = 1e-3
    if region == "whole":
        if isinstance(model, CurieWeiss):
            x_lo, x_hi = -1.0 + inset, 1.0 - inset
        else:
            x_lo, x_hi = -10.0, 10.0
        p_lo, p_hi = -p_span, p_span
        label = "whole space"
    else:
        kind, y, q = region
        if kind == "upper":
            x_hi = 1.0 - inset if isinstance(model, CurieWeiss) else y + 10.0
            x_lo, p_lo, p_hi = y + inset, q + inset, q + p_span
        elif kind == "lower":
            x_lo = -1.0 + inset if isinstance(model, CurieWeiss) else y - 10.0
            x_hi, p_lo, p_hi = y - inset, q - p_span, q - inset
        else:
            raise ConfigError(f"unknown region kind {kind!r}")
        label = f"{kind} quadrant at ({y}, {q})"

    xs = np.linspace(x_lo, x_hi, n_samples)
    ps = np.linspace(p_lo, p_hi, n_samples)

    if isinstance(model, Diffusion):
        # d2Hdx2 = -p W'''(x): one-signed momentum makes the W''' sign decide
        w3 = [derivatives(model, float(x), 1.0).d2Hdx2 * -1.0 for x in xs]
        if region == "whole":
            ok = all(abs(v) <= 1e-12 for v in w3)
        elif region[0] == "upper":
            ok = all(v >= -1e-12 for v in w3)
        else:
            ok = all(v <= 1e-12 for v in w3)
        bad = None
        if not ok:
            for x, v in zip(xs, w3):
                if (region == "whole" and abs(v) > 1e-12) or \
                        (region != "whole" and region[0] == "upper" and v < -1e-12) or \
                        (region != "whole" and region[0] == "lower" and v > 1e-12):
                    bad = (float(x), 0.0, float(v))
                    break
        return OrderPreservationReport(
            criterion=f"W''' sign on {label}", holds=ok, counterexample=bad)

    strict = True
    weak = True
    bad = None
    for x in xs:
        for p in ps:
            d = derivatives(model, float(x), float(p))
            if not (d.d2Hdx2 < 0.0):
                strict = False
            if d.d2Hdx2 > 1e-12 or d.d2Hdxdp > 1e-12:
                weak = False
                if bad is None:
                    bad = (float(x), float(p), float(max(d.d2Hdx2, d.d2Hdxdp)))
    if strict:
        return OrderPreservationReport(
            criterion=f"force strictly decreasing in x on {label}", holds=True)
    if weak:
        return OrderPreservationReport(
            criterion=f"force decreasing in (x, p) on {label}", holds=True)
    return OrderPreservationReport(
        criterion=f"force monotonicity on {label}", holds=False,
        counterexample=bad)


# ---------------------------------------------------------------------------
# rotating loops


@dataclass
class Loop:
    """Closed level curve of H between two stationary points."""

    x_lo: float
    x_hi: float
    energy: float
    xs: np.ndarray
    upper: np.ndarray    # h(x), the larger momentum root
    lower: np.ndarray    # g(x), the smaller momentum root
    period: Optional[float] = None


def rotating_loop(model: ModelSpec, m1: float, m2: float,
                  e_frac: float = 0.5, n_points: int = 257) -> Loop:
    """Level curve {H = E} around the energy-floor dip between two adjacent
    stationary points, with E = e_frac times the floor maximum over the
    middle 60% of (m1, m2)."""
    if not (0.0 < e_frac < 1.0):
        raise ConfigError("e_frac must lie in (0, 1)")
    if not (m1 < m2):
        raise InapplicableError("need m1 < m2")
    for m in (m1, m2):
        if abs(velocity(model, m, 0.0)) > 1e-10:
            raise InapplicableError(f"{m} is not a stationary point")
        if abs(derivatives(model, m, 0.0).d2Hdxdp) <= 1e-8:
            raise InapplicableError(
                f"mixed derivative vanishes at {m}; no hyperbolic rotation")

    span = m2 - m1
    grid = np.linspace(m1 + 1e-9 * span, m2 - 1e-9 * span, 2001)
    floor = np.array([min_energy(model, float(x)) for x in grid])
    middle = (grid >= m1 + 0.2 * span) & (grid <= m2 - 0.2 * span)
    e_top = float(floor[middle].max())
    if not (e_top < 0.0):
        raise InapplicableError("energy floor is not negative strictly inside")
    energy = e_frac * e_top

    below = floor < energy
    crossings = np.nonzero(np.diff(below.astype(int)))[0]
    if len(crossings) != 2:
        raise InapplicableError(
            f"level set of E={energy:.3g} is not a single interval")

    def floor_minus_e(x: float) -> float:
        return min_energy(model, x) - energy

    a = bisect(floor_minus_e, float(grid[crossings[0]]),
               float(grid[crossings[0] + 1]), xtol=1e-13)
    b = bisect(floor_minus_e, float(grid[crossings[1]]),
               float(grid[crossings[1] + 1]), xtol=1e-13)

    xs = np.linspace(a, b, n_points)
    upper = np.empty(n_points)
    lower = np.empty(n_points)
    for i, x in enumerate(xs):
        x = float(x)
        p_bar = momentum_of_min_energy(model, x)
        if i == 0 or i == n_points - 1:
            upper[i] = lower[i] = p_bar
            continue

        def above(p: float) -> float:
            return hamiltonian(model, x, p) - energy

        hi = p_bar + 1.0
        while above(hi) < 0.0:
            hi += 1.0
        upper[i] = newton_bracketed(
            above, lambda p: derivatives(model, x, p).dHdp, p_bar, hi,
            ftol=1e-14, xtol=1e-14)
        lo = p_bar - 1.0
        while above(lo) < 0.0:
            lo -= 1.0
        lower[i] = newton_bracketed(
            lambda p: -above(p), lambda p: -derivatives(model, x, p).dHdp,
            lo, p_bar, ftol=1e-14, xtol=1e-14)

    assert abs(upper[0] - lower[0]) <= 1e-8
    assert abs(upper[-1] - lower[-1]) <= 1e-8
    return Loop(x_lo=a, x_hi=b, energy=energy, xs=xs, upper=upper, lower=lower)


LOOP_HORIZON = 1e3


def loop_period(model: ModelSpec, loop: Loop, start: PhasePoint,
                config: Optional[IntegratorConfig] = None,
                leave_radius: float = 0.1,
                return_radius: float = 1e-3) -> float:
    """First-return time to the transverse section through ``start``.

    The trajectory must first leave a 0.1-radius ball around the start and
    then cross the section (the line through the start perpendicular to the
    flow direction) moving forward within 1e-3 of the start point.
    """
    config = config or IntegratorConfig()
    if abs(hamiltonian(model, start.x, start.p) - loop.energy) > 1e-6:
        raise InapplicableError("start does not lie on the loop energy level")
    v0 = velocity(model, start.x, start.p)
    f0 = -derivatives(model, start.x, start.p).dHdx
    norm = math.hypot(v0, f0)
    if norm == 0.0:
        raise InapplicableError("start is stationary")
    nx, npb = v0 / norm, f0 / norm

    def section(x: float, p: float) -> float:
        return (x - start.x) * nx + (p - start.p) * npb

    res = integrate(model, start, 0.0, LOOP_HORIZON, config)
    left_ball = False
    for i in range(1, len(res.ts)):
        x, p = float(res.xs[i]), float(res.ps[i])
        dist = math.hypot(x - start.x, p - start.p)
        if not left_ball:
            left_ball = dist > leave_radius
            continue
        prev = section(float(res.xs[i - 1]), float(res.ps[i - 1]))
        curr = section(x, p)
        if prev < 0.0 <= curr:
            t_prev = float(res.ts[i - 1])
            dt_span = float(res.ts[i]) - t_prev
            from_state = PhasePoint(float(res.xs[i - 1]), float(res.ps[i - 1]))

            def section_after(dt: float) -> float:
                if dt <= 0.0:
                    return prev
                xq, pq, _ = integrate(model, from_state, 0.0, dt,
                                      config).final()
                return section(xq, pq)

            dt_ref = bisect(section_after, 1e-15, dt_span, xtol=1e-12)
            xq, pq, _ = integrate(model, from_state, 0.0, dt_ref,
                                  config).final()
            if math.hypot(xq - start.x, pq - start.p) <= return_radius:
                return t_prev + dt_ref
    raise NonRotatingError(
        f"no return to the section within t={LOOP_HORIZON}")


# ---------------------------------------------------------------------------
# recovery constants and scans


@dataclass(frozen=True)
class RecoveryConstants:
    """For a double-well slope profile at steepness alpha > 1: ``extremum``
    is the location z of the local slope minimum in (0, 1); ``threshold`` is
    the tilt magnitude above which the profile has a single zero."""

    extremum: float
    threshold: float


def recovery_constants(alpha: float) -> RecoveryConstants:
    if not (alpha > 1.0):
        raise InapplicableError("need alpha > 1")
    z = math.sqrt(1.0 - 1.0 / alpha)
    kappa = alpha * z - math.atanh(z)
    return RecoveryConstants(extremum=z, threshold=kappa)


@dataclass(frozen=True)
class TimelineEntry:
    t: float
    is_graph: bool
    overhang_regions: tuple[tuple[float, float], ...]
    certified: tuple[float, ...]


@dataclass
class ScenarioTimeline:
    times: np.ndarray
    entries: list[TimelineEntry]
    #: first scan time with an overhang
    onset_time: Optional[float]
    #: last scan time with a certified kink, plus one scan step
    certified_until: Optional[float]
    #: first scan time after the onset with the overhang gone
    clear_time: Optional[float]
    #: closed-form upper reference for the certified window (tilted scans)
    t1_ref: Optional[float]
    threshold: Optional[float]


def recovery_scan(model: ModelSpec, spec: RateFunctionSpec,
                  t_grid: Sequence[float],
                  config: Optional[IntegratorConfig] = None,
                  n: int = 201, margin: float = 1e-6,
                  grid: Optional[np.ndarray] = None,
                  cover: tuple[float, float] = (-0.97, 0.97)) -> ScenarioTimeline:
    """Push / overhang / certification sweep over an increasing time grid,
    with onset, certified-window, and recovery times extracted.

    Requires the free spin-flip dynamics (beta = h = 0), where the momentum
    equation is autonomous and recovery is possible.
    """
    if not isinstance(model, CurieWeiss) or model.beta != 0.0 or model.h != 0.0:
        raise InapplicableError("recovery scan needs beta = h = 0")
    times = np.asarray(sorted(float(t) for t in t_grid))
    if len(times) < 2 or times[0] < 0.0:
        raise ConfigError("need an increasing grid of nonnegative times")
    if grid is None:
        grid = np.linspace(-0.95, 0.95, 201)

    config = config or IntegratorConfig()
    pool = TrajectoryPool(model, config, times=[t for t in times if t > 0])
    samples = sample_initial_graph(spec, n=n, margin=margin)

    entries: list[TimelineEntry] = []
    for t in times:
        pf = pool.push_adaptive(spec, samples, float(t), cover=cover)
        report = detect_overhangs(pf)
        certified: tuple[float, ...] = ()
        if float(t) > 0.0:
            prof = envelope(pf, grid)
            certified = tuple(pt.x for pt in classify_differentiability(prof))
        entries.append(TimelineEntry(
            t=float(t), is_graph=report.is_graph,
            overhang_regions=tuple((r.x_lo, r.x_hi) for r in report.regions),
            certified=certified))

    onset = next((e.t for e in entries if not e.is_graph), None)
    clear = None
    if onset is not None:
        clear = next((e.t for e in entries
                      if e.t > onset and e.is_graph), None)
    certified_until = None
    certified_times = [e.t for e in entries if e.certified]
    if certified_times:
        step = float(np.median(np.diff(times)))
        certified_until = certified_times[-1] + step

    t1_ref = None
    threshold = None
    if isinstance(spec, CWEntropy) and spec.alpha > 1.0:
        consts = recovery_constants(spec.alpha)
        threshold = consts.threshold
        if abs(spec.theta) > consts.threshold:
            crest = consts.threshold + abs(spec.theta)
            t1_ref = -0.5 * math.log(math.tanh(crest))
            if onset is None:
                warnings.warn("tilt exceeds the threshold but no overhang "
                              "was scanned; refine the time grid")
    return ScenarioTimeline(times=times, entries=entries, onset_time=onset,
                            certified_until=certified_until, clear_time=clear,
                            t1_ref=t1_ref, threshold=threshold)


# ---------------------------------------------------------------------------
# heating threshold report


@dataclass(frozen=True)
class HeatingThresholdReport:
    """Vertical-tangent time against the per-model closed form quoted for
    the heating scenario; the two disagree (sign for the +-1 model,
    coefficients for the diffusion model), so the flag is expected."""

    vertical_tangent_time: float
    direct_formula_time: float
    discrepancy_flag: bool


def heating_threshold_report(model: ModelSpec,
                             spec: RateFunctionSpec) -> HeatingThresholdReport:
    if isinstance(model, CurieWeiss):
        if not isinstance(spec, CWEntropy):
            raise InapplicableError("spin-flip model needs the entropy family")
        alpha, beta = spec.alpha, model.beta
        if spec.theta != 0.0 or model.h != 0.0:
            raise InapplicableError("heating regime needs theta = h = 0")
        if not (alpha > max(beta, 1.0)) or beta == 1.0:
            raise InapplicableError(
                "heating regime needs alpha > max(beta, 1) and beta != 1")
        direct = -math.log((beta - alpha) / (1.0 - alpha)) / (4.0 * (1.0 - beta))
    else:
        if not isinstance(spec, PolynomialRate):
            raise InapplicableError("diffusion model needs a polynomial rate")
        a = _quartic_coefficient(spec.coeffs)
        b = _quartic_coefficient(model.w_coeffs)
        if not (a > max(b, 0.0)) or b == 0.0:
            raise InapplicableError(
                "heating regime needs a > max(b, 0) and b != 0")
        direct = -math.log((a - b) / a) / b

    data = linearization_data(model, spec, 0.0)
    vertical = linearization_threshold(data)
    flag = (not math.isfinite(direct)) or direct <= 0.0 \
        or abs(vertical - direct) > 1e-9
    return HeatingThresholdReport(vertical_tangent_time=vertical,
                                  direct_formula_time=direct,
                                  discrepancy_flag=flag)


def _quartic_coefficient(coeffs: tuple[float, ...]) -> float:
    """The well parameter d of x^4/4 - d x^2/2, validating the form."""
    padded = tuple(coeffs) + (0.0,) * (5 - len(coeffs))
    if len(coeffs) > 5 or any(c != 0.0 for i, c in enumerate(padded)
                              if i not in (2, 4)) or padded[4] != 0.25:
        raise InapplicableError(
            "heating closed form needs the quartic family x^4/4 - d x^2/2")
    return -2.0 * padded[2]
