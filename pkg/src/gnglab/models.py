"""Closed-form Hamiltonians, Legendre transforms, and initial rate functions.

Two concrete models are supported:

* ``CurieWeiss`` -- spin-flip dynamics on the magnetization interval [-1, 1]
  with exponential jump rates at inverse temperature ``beta`` and external
  field ``h``.  The energy function is evaluated in hyperbolic form, which is
  stable for large momenta; the raw exponential-rate form is reserved for
  test oracles.
* ``Diffusion`` -- mean-field interacting diffusions on the real line in a
  polynomial drift potential W, with H(x, p) = p^2/2 - p W'(x).

Initial rate-function families mirror the model pairing: the entropy-based
family on (-1, 1), polynomial wells on R, and tabulated data with monotone
cubic interpolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from ._rootfind import newton_bracketed, scan_roots
from .errors import ConfigError, DomainError, UnboundedVelocityError

#: momentum bracket for the dual (Legendre) solve: start +-NEWTON_BRACKET_0,
#: double up to +-NEWTON_BRACKET_MAX, then give up as unbounded velocity
NEWTON_BRACKET_0 = 5.0
NEWTON_BRACKET_MAX = 50.0

ROOT_SCAN_POINTS = 10_000


# ---------------------------------------------------------------------------
# model specifications


@dataclass(frozen=True)
class CurieWeiss:
    """Spin-flip model on [-1, 1]; jump rates ((1 -+ x)/2) e^{+-(beta x + h)}."""

    beta: float
    h: float = 0.0

    kind = "curie_weiss"

    def __post_init__(self):
        if not (self.beta >= 0.0):
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if not math.isfinite(self.h):
            raise ConfigError("h must be finite")

    @property
    def state_space(self) -> tuple[float, float]:
        return (-1.0, 1.0)


@dataclass(frozen=True)
class Diffusion:
    """Interacting diffusions on R; drift potential W given by coefficients
    (low-to-high degree). W must have even degree >= 2 with positive leading
    coefficient so that order at infinity and compact sublevel sets hold."""

    w_coeffs: tuple[float, ...]

    kind = "diffusion"

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.w_coeffs)
        object.__setattr__(self, "w_coeffs", coeffs)
        while coeffs and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        degree = len(coeffs) - 1
        if degree < 2 or degree % 2 != 0:
            raise ConfigError(f"W must have even degree >= 2, got degree {degree}")
        if coeffs[-1] <= 0.0:
            raise ConfigError("leading coefficient of W must be > 0")

    @property
    def state_space(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    @cached_property
    def w1(self) -> tuple[float, ...]:
        return _polyder(self.w_coeffs)

    @cached_property
    def w2(self) -> tuple[float, ...]:
        return _polyder(self.w1)

    @cached_property
    def w3(self) -> tuple[float, ...]:
        return _polyder(self.w2)


ModelSpec = Union[CurieWeiss, Diffusion]


def _polyder(coeffs: tuple[float, ...]) -> tuple[float, ...]:
    return tuple(k * c for k, c in enumerate(coeffs))[1:] or (0.0,)


def _polyval(coeffs, x):
    """Horner evaluation; works for scalars and numpy arrays."""
    acc = 0.0 * x
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _check_state(model: ModelSpec, x: float) -> None:
    if isinstance(model, CurieWeiss):
        if not (-1.0 <= x <= 1.0):
            raise DomainError(f"x={x} outside [-1, 1]")
    else:
        if not math.isfinite(x):
            raise DomainError(f"x={x} is not finite")


def _check_interior(model: ModelSpec, x: float, margin: float = 0.0) -> None:
    lo, hi = model.state_space
    if not (lo + margin < x < hi - margin):
        raise DomainError(f"x={x} not strictly interior to the state space")


# ---------------------------------------------------------------------------
# Hamiltonian and derivatives


def hamiltonian(model: ModelSpec, x: float, p: float) -> float:
    """Energy H(x, p); H(x, 0) = 0 exactly for both models."""
    _check_state(model, x)
    if isinstance(model, CurieWeiss):
        z = model.beta * x + model.h + p
        return 2.0 * math.sinh(p) * (math.sinh(z) - x * math.cosh(z))
    return 0.5 * p * p - p * _polyval(model.w1, x)


@dataclass(frozen=True)
class HamiltonianDerivatives:
    dHdx: float
    dHdp: float
    d2Hdx2: float
    d2Hdxdp: float
    d2Hdp2: float


def derivatives(model: ModelSpec, x: float, p: float) -> HamiltonianDerivatives:
    """First and second partials of H at (x, p); d2Hdp2 > 0 everywhere."""
    _check_state(model, x)
    if isinstance(model, CurieWeiss):
        beta, h = model.beta, model.h
        z = beta * x + h + p
        z2 = beta * x + h + 2.0 * p
        sp, cp = math.sinh(p), math.cosh(p)
        sz, cz = math.sinh(z), math.cosh(z)
        s2, c2 = math.sinh(z2), math.cosh(z2)
        return HamiltonianDerivatives(
            dHdx=-2.0 * sp * ((1.0 - beta) * cz + beta * x * sz),
            dHdp=2.0 * s2 - 2.0 * x * c2,
            d2Hdx2=-2.0 * beta * sp * ((2.0 - beta) * sz + beta * x * cz),
            d2Hdxdp=2.0 * (beta - 1.0) * c2 - 2.0 * beta * x * s2,
            d2Hdp2=4.0 * c2 - 4.0 * x * s2,
        )
    w1 = _polyval(model.w1, x)
    w2 = _polyval(model.w2, x)
    w3 = _polyval(model.w3, x)
    return HamiltonianDerivatives(
        dHdx=-p * w2,
        dHdp=p - w1,
        d2Hdx2=-p * w3,
        d2Hdxdp=-w2,
        d2Hdp2=1.0,
    )


def hamiltonian_grid(model: ModelSpec, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Vectorized H(x, p) on arrays."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if isinstance(model, CurieWeiss):
        z = model.beta * x + model.h + p
        return 2.0 * np.sinh(p) * (np.sinh(z) - x * np.cosh(z))
    return 0.5 * p * p - p * _polyval(model.w1, x)


def velocity_grid(model: ModelSpec, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Vectorized dHdp(x, p) on arrays."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if isinstance(model, CurieWeiss):
        z2 = model.beta * x + model.h + 2.0 * p
        return 2.0 * np.sinh(z2) - 2.0 * x * np.cosh(z2)
    return p - _polyval(model.w1, x)


def velocity(model: ModelSpec, x: float, p: float) -> float:
    """dHdp(x, p) alone; the hot path of the flow integrator."""
    if isinstance(model, CurieWeiss):
        z2 = model.beta * x + model.h + 2.0 * p
        return 2.0 * math.sinh(z2) - 2.0 * x * math.cosh(z2)
    return p - _polyval(model.w1, x)


def force(model: ModelSpec, x: float, p: float) -> float:
    """-dHdx(x, p) alone; the hot path of the flow integrator."""
    if isinstance(model, CurieWeiss):
        beta = model.beta
        z = beta * x + model.h + p
        return 2.0 * math.sinh(p) * ((1.0 - beta) * math.cosh(z)
                                     + beta * x * math.sinh(z))
    return p * _polyval(model.w2, x)


def momentum_of_min_energy(model: ModelSpec, x: float) -> float:
    """argmin_p H(x, p), closed form for both models."""
    _check_interior(model, x)
    if isinstance(model, CurieWeiss):
        return 0.5 * (math.atanh(x) - model.beta * x - model.h)
    return _polyval(model.w1, x)


def min_energy(model: ModelSpec, x: float) -> float:
    """min_p H(x, p) at interior x; <= 0 with equality iff x is stationary."""
    return hamiltonian(model, x, momentum_of_min_energy(model, x))


# ---------------------------------------------------------------------------
# Legendre transform


@dataclass(frozen=True)
class LagrangianValue:
    value: float
    p_star: float


def lagrangian(model: ModelSpec, x: float, v: float) -> LagrangianValue:
    """Path-space cost density L(x, v) = sup_p (p v - H(x, p)).

    The supremum is attained at the unique p with dHdp(x, p) = v (strict
    convexity of H in p).  For the diffusion model the solve is the explicit
    complete-the-square formula; for the spin-flip model a safeguarded Newton
    runs on a bracket that starts at +-5 and doubles up to +-50.  Failure to
    bracket inside +-50 means v is not a reachable velocity at x.
    """
    _check_interior(model, x)
    if not math.isfinite(v):
        raise DomainError(f"v={v} is not finite")
    if isinstance(model, Diffusion):
        p_star = v + _polyval(model.w1, x)
        return LagrangianValue(value=0.5 * p_star * p_star, p_star=p_star)

    def g(p: float) -> float:
        return velocity(model, x, p) - v

    lo, hi = -NEWTON_BRACKET_0, NEWTON_BRACKET_0
    while g(lo) > 0.0:
        lo *= 2.0
        if lo < -NEWTON_BRACKET_MAX:
            raise UnboundedVelocityError(f"v={v} unreachable at x={x}")
    while g(hi) < 0.0:
        hi *= 2.0
        if hi > NEWTON_BRACKET_MAX:
            raise UnboundedVelocityError(f"v={v} unreachable at x={x}")

    p_star = newton_bracketed(
        g, lambda p: derivatives(model, x, p).d2Hdp2, lo, hi,
        ftol=1e-12 * (1.0 + abs(v)), xtol=1e-15,
    )
    value = p_star * v - hamiltonian(model, x, p_star)
    return LagrangianValue(value=max(value, 0.0), p_star=p_star)


def lagrangian_grid(model: ModelSpec, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized L(x, v) on arrays of interior points.

    Solves the same dual equation as :func:`lagrangian` in closed form: for
    the spin-flip model dHdp(x, p) = v is quadratic in e^{2p}; for the
    diffusion model the square is completed.  Agreement with the scalar
    Newton route is asserted in the test suite.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if isinstance(model, Diffusion):
        p_star = v + _polyval(model.w1, x)
        return 0.5 * p_star * p_star
    # 2 v_plus W^2 - v W - 2 v_minus = 0 for W = e^{2p}; the v < 0 branch
    # uses the conjugate form to avoid cancellation in v + sqrt(.)
    ex = np.exp(model.beta * x + model.h)
    v_plus = 0.5 * (1.0 - x) * ex
    v_minus = 0.5 * (1.0 + x) / ex
    sq = np.sqrt(v * v + 4.0 * (1.0 - x * x))
    big_w = np.where(v >= 0.0, (v + sq) / (4.0 * v_plus),
                     4.0 * v_minus / (sq - v))
    p_star = 0.5 * np.log(big_w)
    value = p_star * v - (v_plus * (big_w - 1.0) + v_minus * (1.0 / big_w - 1.0))
    return np.maximum(value, 0.0)


# ---------------------------------------------------------------------------
# initial rate functions


@dataclass(frozen=True)
class CWEntropy:
    """Entropy-based family on (-1, 1):
    value = (1-x)/2 log(1-x) + (1+x)/2 log(1+x) - alpha x^2/2 - theta x + C,
    with C fixed so the infimum over [-1, 1] is zero."""

    alpha: float
    theta: float = 0.0

    kind = "cw_entropy"

    def __post_init__(self):
        if not (self.alpha >= 0.0):
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")

    @property
    def domain(self) -> tuple[float, float]:
        return (-1.0, 1.0)

    @cached_property
    def offset(self) -> float:
        def raw(x: float) -> float:
            return (_xlogx(1.0 - x) + _xlogx(1.0 + x)) / 2.0 \
                - 0.5 * self.alpha * x * x - self.theta * x

        def d(x: float) -> float:
            return math.atanh(x) - self.alpha * x - self.theta

        crit = scan_roots(d, -1.0 + 1e-12, 1.0 - 1e-12, n=ROOT_SCAN_POINTS)
        lowest = min([raw(x) for x in crit] + [raw(-1.0), raw(1.0)])
        return -lowest


def _xlogx(y: float) -> float:
    return 0.0 if y <= 0.0 else y * math.log(y)


@dataclass(frozen=True)
class PolynomialRate:
    """Polynomial well on R (even degree >= 2, positive leading coefficient),
    shifted so its global minimum is zero."""

    coeffs: tuple[float, ...]

    kind = "polynomial"

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        trimmed = coeffs
        while trimmed and trimmed[-1] == 0.0:
            trimmed = trimmed[:-1]
        degree = len(trimmed) - 1
        if degree < 2 or degree % 2 != 0 or trimmed[-1] <= 0.0:
            raise ConfigError(
                "rate polynomial must have even degree >= 2 with positive "
                f"leading coefficient, got {coeffs}")

    @property
    def domain(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    @cached_property
    def c1(self) -> tuple[float, ...]:
        return _polyder(self.coeffs)

    @cached_property
    def c2(self) -> tuple[float, ...]:
        return _polyder(self.c1)

    @cached_property
    def offset(self) -> float:
        roots = np.roots(list(reversed(self.c1)))
        xs = [float(r.real) for r in roots if abs(r.imag) < 1e-9]
        return -min(_polyval(self.coeffs, x) for x in xs)


@dataclass(frozen=True)
class TabulatedRate:
    """Sampled rate function: nodes (x, value, slope) with monotone cubic
    interpolation of the values and of the slopes separately.

    The samples must already be normalized (min value 0 within 1e-12) and
    must show the boundary slope divergence: the outermost slopes have to
    exceed ``deriv_threshold`` in magnitude with the correct signs.
    """

    xs: tuple[float, ...]
    values: tuple[float, ...]
    derivs: tuple[float, ...]
    deriv_threshold: float = 5.0

    kind = "tabulated"

    def __post_init__(self):
        xs = tuple(float(v) for v in self.xs)
        values = tuple(float(v) for v in self.values)
        derivs = tuple(float(v) for v in self.derivs)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "derivs", derivs)
        if not (len(xs) == len(values) == len(derivs)) or len(xs) < 4:
            raise ConfigError("tabulated rate needs >= 4 aligned samples")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ConfigError("tabulated grid must be strictly increasing")
        if abs(min(values)) > 1e-12:
            raise ConfigError("tabulated values must have minimum 0 (within 1e-12)")
        if derivs[0] > -self.deriv_threshold or derivs[-1] < self.deriv_threshold:
            raise ConfigError(
                "tabulated slopes must diverge at the boundary: outermost "
                f"samples must exceed +-{self.deriv_threshold}")

    @property
    def domain(self) -> tuple[float, float]:
        return (self.xs[0], self.xs[-1])

    @cached_property
    def _interp(self):
        from scipy.interpolate import PchipInterpolator
        val = PchipInterpolator(self.xs, self.values)
        der = PchipInterpolator(self.xs, self.derivs)
        return val, der, der.derivative()


RateFunctionSpec = Union[CWEntropy, PolynomialRate, TabulatedRate]


@dataclass(frozen=True)
class RateValue:
    value: float
    deriv: float
    second_deriv: float


def rate0(spec: RateFunctionSpec, x: float) -> RateValue:
    """Initial rate function with its first two derivatives at interior x."""
    lo, hi = spec.domain
    if not (lo < x < hi):
        raise DomainError(f"x={x} not strictly inside {spec.domain}")
    if isinstance(spec, CWEntropy):
        value = (_xlogx(1.0 - x) + _xlogx(1.0 + x)) / 2.0 \
            - 0.5 * spec.alpha * x * x - spec.theta * x + spec.offset
        return RateValue(
            value=value,
            deriv=math.atanh(x) - spec.alpha * x - spec.theta,
            second_deriv=1.0 / (1.0 - x * x) - spec.alpha,
        )
    if isinstance(spec, PolynomialRate):
        return RateValue(
            value=_polyval(spec.coeffs, x) + spec.offset,
            deriv=_polyval(spec.c1, x),
            second_deriv=_polyval(spec.c2, x),
        )
    val, der, der2 = spec._interp
    return RateValue(value=float(val(x)), deriv=float(der(x)),
                     second_deriv=float(der2(x)))


def rate0_values(spec: RateFunctionSpec, xs: np.ndarray) -> np.ndarray:
    """Vectorized rate-function values on interior grid points."""
    xs = np.asarray(xs, dtype=float)
    lo, hi = spec.domain
    if xs.size and (xs.min() <= lo or xs.max() >= hi):
        raise DomainError("grid leaves the rate-function domain")
    if isinstance(spec, CWEntropy):
        one_m, one_p = 1.0 - xs, 1.0 + xs
        ent = 0.5 * (np.where(one_m > 0, one_m * np.log(one_m), 0.0)
                     + np.where(one_p > 0, one_p * np.log(one_p), 0.0))
        return ent - 0.5 * spec.alpha * xs * xs - spec.theta * xs + spec.offset
    if isinstance(spec, PolynomialRate):
        return _polyval(spec.coeffs, xs) + spec.offset
    val, _, _ = spec._interp
    return np.asarray(val(xs), dtype=float)


def stationary_points(model: ModelSpec) -> list[float]:
    """Interior zeros of dHdp(x, 0), sorted; may be empty.

    Found by a sign-change scan on a 10^4-point grid with bisection
    refinement to 1e-12.
    """
    if isinstance(model, CurieWeiss):
        def f(x: float) -> float:
            return math.tanh(model.beta * x + model.h) - x
        roots = scan_roots(f, -1.0 + 1e-9, 1.0 - 1e-9, n=ROOT_SCAN_POINTS)
    else:
        # Cauchy bound on the roots of W'
        lead = abs(model.w1[-1])
        bound = 1.0 + max([abs(c) for c in model.w1[:-1]] or [0.0]) / lead
        roots = scan_roots(lambda x: _polyval(model.w1, x),
                           -bound, bound, n=ROOT_SCAN_POINTS)
    return [r for r in roots if abs(velocity(model, r, 0.0)) <= 1e-10]
