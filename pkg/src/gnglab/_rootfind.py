"""Scalar root-finding helpers: sign-change scans and safeguarded Newton."""
from __future__ import annotations

import math
from typing import Callable, Sequence


def bisect(f: Callable[[float], float], lo: float, hi: float,
           xtol: float = 1e-12, max_iter: int = 200) -> float:
    """Plain bisection; assumes f(lo) and f(hi) have opposite signs."""
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise ValueError("bisect: endpoints do not bracket a root")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < xtol:
            return mid
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def scan_roots(f: Callable[[float], float], lo: float, hi: float,
               n: int = 10_000, xtol: float = 1e-12) -> list[float]:
    """All roots of f on [lo, hi] found by an n-point sign-change scan
    plus bisection refinement. Tangential roots without a sign change are
    picked up only if the scan lands within float noise of zero."""
    xs = [lo + (hi - lo) * i / n for i in range(n + 1)]
    vals = [f(x) for x in xs]
    roots: list[float] = []
    for i in range(n):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(xs[i])
        elif a * b < 0.0:
            roots.append(bisect(f, xs[i], xs[i + 1], xtol=xtol))
    if vals[-1] == 0.0:
        roots.append(xs[-1])
    return _dedupe(roots, tol=10 * xtol + 1e-14 * (hi - lo))


def _dedupe(roots: Sequence[float], tol: float) -> list[float]:
    out: list[float] = []
    for r in sorted(roots):
        if not out or r - out[-1] > tol:
            out.append(r)
    return out


def newton_bracketed(f: Callable[[float], float], df: Callable[[float], float],
                     lo: float, hi: float, ftol: float = 0.0,
                     xtol: float = 1e-14, max_iter: int = 100) -> float:
    """Safeguarded Newton on a bracket [lo, hi] with f(lo) <= 0 <= f(hi).

    Falls back to bisection whenever the Newton step leaves the current
    bracket; f must be increasing across the bracket.
    """
    if f(lo) > 0.0 or f(hi) < 0.0:
        raise ValueError("newton_bracketed: invalid bracket")
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x)
        if abs(fx) <= ftol:
            return x
        if fx > 0.0:
            hi = x
        else:
            lo = x
        d = df(x)
        x_new = x - fx / d if d > 0.0 else math.inf
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if hi - lo <= xtol * max(1.0, abs(x)):
            return x_new
        x = x_new
    return x
