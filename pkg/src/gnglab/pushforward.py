"""Push-forward of the initial-slope graph under the characteristic flow.

The graph {(x, I0'(x))} is discretized into samples, each sample is flown to
time t, survivors are grouped into branches (maximal contiguous alive runs,
the sampled picture of the connected components of the surviving set), and
overhangs -- vertical lines meeting the pushed graph at two or more momenta
-- are detected from the monotone-arc decomposition of the branches.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .flow import Alive, Escaped, FlowResult, IntegratorConfig, PhasePoint, integrate
from .models import ModelSpec, RateFunctionSpec, rate0

#: minimum number of samples per branch before a resolution warning
MIN_BRANCH_SAMPLES = 8
#: default refinement budget on the slope gap between adjacent samples
SLOPE_BUDGET = 0.5
#: default slope window for unbounded-domain sampling
P_WINDOW = 10.0

#: overhang witnesses must differ in momentum by at least this much
WITNESS_P_GAP = 1e-6


@dataclass(frozen=True)
class GraphSample:
    x0: float
    p0: float
    u0: float


def sample_initial_graph(spec: RateFunctionSpec, n: int, margin: float,
                         p_window: float = P_WINDOW,
                         slope_budget: float = SLOPE_BUDGET) -> list[GraphSample]:
    """Discretize the initial-slope graph.

    ``n`` base points are placed uniformly over the interior shrunk by
    ``margin`` (for unbounded domains: over the window where |I0'| stays
    within ``p_window``), then midpoints are inserted wherever the slope gap
    between neighbors exceeds ``slope_budget``.
    """
    if n < 16:
        raise ConfigError(f"need n >= 16 base samples, got {n}")
    if not (margin > 0.0):
        raise ConfigError("margin must be positive")

    lo, hi = spec.domain
    if np.isfinite(lo) and np.isfinite(hi):
        lo, hi = lo + margin, hi - margin
    else:
        lo, hi = _slope_window(spec, p_window)
    if not lo < hi:
        raise ConfigError("empty sampling window")

    xs = list(np.linspace(lo, hi, n))
    ps = [rate0(spec, x).deriv for x in xs]
    budget = max(slope_budget, 1e-6)
    max_points = 64 * n
    i = 0
    while i < len(xs) - 1 and len(xs) < max_points:
        if abs(ps[i + 1] - ps[i]) > budget and xs[i + 1] - xs[i] > 1e-12:
            mid = 0.5 * (xs[i] + xs[i + 1])
            xs.insert(i + 1, mid)
            ps.insert(i + 1, rate0(spec, mid).deriv)
        else:
            i += 1
    return [GraphSample(x0=x, p0=p, u0=rate0(spec, x).value)
            for x, p in zip(xs, ps)]


def _slope_window(spec: RateFunctionSpec, p_window: float) -> tuple[float, float]:
    """Outermost interval on which |I0'| <= p_window (unbounded domains)."""
    probe = np.linspace(-50.0, 50.0, 20001)
    ok = [x for x in probe if abs(rate0(spec, x).deriv) <= p_window]
    if not ok:
        raise ConfigError("slope window is empty; increase p_window")
    return min(ok), max(ok)


@dataclass
class Branch:
    """Maximal contiguous run of samples alive at time t, ordered by x0."""

    index: int
    x0s: np.ndarray
    xs: np.ndarray
    ps: np.ndarray
    us: np.ndarray
    #: corner signs the branch connects to (escape corners of the flanking
    #: escaped samples; the outermost branches default to -1 / +1)
    left_limit: int = -1
    right_limit: int = 1

    @property
    def origin_interval(self) -> tuple[float, float]:
        return float(self.x0s[0]), float(self.x0s[-1])


@dataclass
class PushForward:
    t: float
    branches: list[Branch]
    escaped_fraction: float
    #: per input sample: x0, p0, pushed state and classification
    sample_x0: np.ndarray
    sample_p0: np.ndarray
    sample_x: np.ndarray         # nan for escaped samples
    sample_p: np.ndarray
    sample_u: np.ndarray
    sample_status: np.ndarray    # 0 = alive, -1/+1 = escape corner
    sample_branch: np.ndarray    # branch index, -1 for escaped


def push_graph(model: ModelSpec, samples: Sequence[GraphSample], t: float,
               config: IntegratorConfig, threads: int = 1) -> PushForward:
    """Flow every sample to time t and assemble the branch decomposition."""
    if t < 0.0:
        raise ConfigError("t must be >= 0")
    samples = sorted(samples, key=lambda s: s.x0)
    if t == 0.0:
        states = [("alive", (s.x0, s.p0, s.u0)) for s in samples]
    else:
        def run(s: GraphSample):
            res = integrate(model, PhasePoint(s.x0, s.p0), s.u0, t, config)
            if isinstance(res.status, Escaped):
                return ("escaped", res.status.corner)
            return ("alive", res.final())

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                states = list(pool.map(run, samples))
        else:
            states = [run(s) for s in samples]
    return assemble_pushforward(t, samples, states)


def assemble_pushforward(t: float, samples: Sequence[GraphSample],
                         states: Sequence[tuple]) -> PushForward:
    """Group alive samples into maximal contiguous runs = branches."""
    n = len(samples)
    x0 = np.array([s.x0 for s in samples])
    p0 = np.array([s.p0 for s in samples])
    x = np.full(n, np.nan)
    p = np.full(n, np.nan)
    u = np.full(n, np.nan)
    status = np.zeros(n, dtype=int)
    branch_of = np.full(n, -1, dtype=int)

    for i, (kind, payload) in enumerate(states):
        if kind == "alive":
            x[i], p[i], u[i] = payload
        else:
            status[i] = payload

    branches: list[Branch] = []
    i = 0
    while i < n:
        if status[i] != 0:
            i += 1
            continue
        j = i
        while j < n and status[j] == 0:
            j += 1
        idx = len(branches)
        left = int(status[i - 1]) if i > 0 else -1
        right = int(status[j]) if j < n else 1
        branches.append(Branch(
            index=idx, x0s=x0[i:j].copy(), xs=x[i:j].copy(),
            ps=p[i:j].copy(), us=u[i:j].copy(),
            left_limit=left, right_limit=right))
        branch_of[i:j] = idx
        i = j

    for b in branches:
        if len(b.x0s) < MIN_BRANCH_SAMPLES:
            warnings.warn(
                f"branch {b.index} has only {len(b.x0s)} samples; refine "
                "the initial sampling", stacklevel=2)
    if branches and not any(b.left_limit == -1 and b.right_limit == 1
                            for b in branches):
        warnings.warn("no sampled branch connects the two corners; "
                      "sampling may be too coarse", stacklevel=2)

    escaped = int(np.count_nonzero(status))
    return PushForward(
        t=t, branches=branches,
        escaped_fraction=escaped / n if n else 0.0,
        sample_x0=x0, sample_p0=p0, sample_x=x, sample_p=p, sample_u=u,
        sample_status=status, sample_branch=branch_of)


# ---------------------------------------------------------------------------
# monotone arcs and overhang detection


@dataclass
class Arc:
    """Maximal monotone-in-x piece of a branch, stored with x ascending.

    Along a branch the pushed value satisfies du/dx = p wherever x is
    monotone in x0, so value interpolation is cubic Hermite with the pushed
    momenta as slopes, and momentum interpolation is its derivative.
    """

    branch: int
    xs: np.ndarray
    ps: np.ndarray
    us: np.ndarray
    x0s: np.ndarray

    @property
    def x_lo(self) -> float:
        return float(self.xs[0])

    @property
    def x_hi(self) -> float:
        return float(self.xs[-1])

    def covers(self, x) -> np.ndarray:
        return (x >= self.xs[0]) & (x <= self.xs[-1])

    def _locate(self, x: np.ndarray):
        i = np.clip(np.searchsorted(self.xs, x, side="right") - 1,
                    0, len(self.xs) - 2)
        h = self.xs[i + 1] - self.xs[i]
        s = np.where(h > 0, (x - self.xs[i]) / np.where(h > 0, h, 1.0), 0.0)
        return i, h, s

    def u_at(self, x: np.ndarray) -> np.ndarray:
        i, h, s = self._locate(np.asarray(x, dtype=float))
        s2, s3 = s * s, s * s * s
        return ((2 * s3 - 3 * s2 + 1) * self.us[i]
                + (s3 - 2 * s2 + s) * h * self.ps[i]
                + (-2 * s3 + 3 * s2) * self.us[i + 1]
                + (s3 - s2) * h * self.ps[i + 1])

    def p_at(self, x: np.ndarray) -> np.ndarray:
        i, h, s = self._locate(np.asarray(x, dtype=float))
        s2 = s * s
        hs = np.where(h > 0, h, 1.0)
        return ((6 * s2 - 6 * s) * self.us[i] / hs
                + (3 * s2 - 4 * s + 1) * self.ps[i]
                + (6 * s - 6 * s2) * self.us[i + 1] / hs
                + (3 * s2 - 2 * s) * self.ps[i + 1])

    def x0_at(self, x: np.ndarray) -> np.ndarray:
        i, h, s = self._locate(np.asarray(x, dtype=float))
        return self.x0s[i] + s * (self.x0s[i + 1] - self.x0s[i])


def monotone_arcs(pf: PushForward) -> list[Arc]:
    """Split every branch into maximal monotone runs of the pushed position."""
    arcs: list[Arc] = []
    for b in pf.branches:
        if len(b.xs) < 2:
            continue
        d = np.diff(b.xs)
        start = 0
        direction = 0
        for i, step in enumerate(d):
            sign = 0 if step == 0.0 else (1 if step > 0 else -1)
            if direction == 0:
                direction = sign
            elif sign != 0 and sign != direction:
                arcs.append(_make_arc(b, start, i + 1, direction))
                start = i
                direction = sign
        arcs.append(_make_arc(b, start, len(b.xs), direction or 1))
    return [a for a in arcs if len(a.xs) >= 2 and a.x_hi > a.x_lo]


def _make_arc(b: Branch, i: int, j: int, direction: int) -> Arc:
    sl = slice(i, j) if direction >= 0 else slice(j - 1, None if i == 0 else i - 1, -1)
    return Arc(branch=b.index, xs=b.xs[sl].copy(), ps=b.ps[sl].copy(),
               us=b.us[sl].copy(), x0s=b.x0s[sl].copy())


@dataclass(frozen=True)
class OverhangRegion:
    x_lo: float
    x_hi: float
    witnesses: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class OverhangReport:
    regions: tuple[OverhangRegion, ...]
    is_graph: bool


def detect_overhangs(pf: PushForward) -> OverhangReport:
    """Regions of the pushed graph covered by two or more monotone arcs.

    Within a branch such regions are the folds where the pushed position is
    non-monotone in x0; across branches they are overlaps of the branch
    position ranges.  A region counts only with two momentum witnesses at a
    common position differing by at least 1e-6 (discretization ties are
    dropped).
    """
    arcs = monotone_arcs(pf)
    if len(arcs) <= 1:
        return OverhangReport(regions=(), is_graph=True)

    edges = sorted(set([a.x_lo for a in arcs] + [a.x_hi for a in arcs]))
    covered: list[tuple[float, float]] = []
    for lo, hi in zip(edges, edges[1:]):
        mid = 0.5 * (lo + hi)
        count = sum(1 for a in arcs if a.x_lo <= mid <= a.x_hi)
        if count >= 2:
            if covered and covered[-1][1] >= lo:
                covered[-1] = (covered[-1][0], hi)
            else:
                covered.append((lo, hi))

    regions = []
    for lo, hi in covered:
        witness = _witnesses(arcs, lo, hi)
        if witness is not None:
            regions.append(OverhangRegion(x_lo=lo, x_hi=hi, witnesses=witness))
    return OverhangReport(regions=tuple(regions), is_graph=not regions)


def _witnesses(arcs: list[Arc], lo: float, hi: float):
    """Best pair of distinct-momentum witnesses on [lo, hi], or None."""
    best = None
    best_gap = WITNESS_P_GAP
    for frac in (0.5, 0.25, 0.75, 0.1, 0.9):
        x = lo + frac * (hi - lo)
        hits = [(a.branch, float(a.p_at(np.array([x]))[0]))
                for a in arcs if a.x_lo <= x <= a.x_hi]
        if len(hits) < 2:
            continue
        ps = [p for _, p in hits]
        gap = max(ps) - min(ps)
        if gap >= best_gap:
            best_gap = gap
            i_min = int(np.argmin(ps))
            i_max = int(np.argmax(ps))
            best = (hits[i_min], hits[i_max])
    return best


# ---------------------------------------------------------------------------
# adaptive refinement


def push_graph_adaptive(model: ModelSpec, spec: RateFunctionSpec,
                        samples: Sequence[GraphSample], t: float,
                        config: IntegratorConfig,
                        cover: Optional[tuple[float, float]] = None,
                        x_gap: float = 0.02,
                        max_new: int = 800,
                        threads: int = 1) -> PushForward:
    """push_graph plus sample refinement driven by the pushed geometry.

    Midpoints are inserted (a) between alive neighbors of one branch whose
    pushed positions differ by more than ``x_gap``, (b) across alive/escaped
    boundaries until the alive side lands beyond ``cover`` (so the surviving
    branches genuinely span the requested window), and (c) inside branches
    that are thinner than the resolution warning threshold.
    """
    pool = TrajectoryPool(model, config, times=[t] if t > 0 else [])
    return pool.push_adaptive(spec, list(samples), t, cover=cover,
                              x_gap=x_gap, max_new=max_new, threads=threads)


class TrajectoryPool:
    """Per-start trajectory cache with checkpoint landings.

    Scans over many times integrate each start once up to the last time (or
    escape) and read states off the recorded checkpoints.
    """

    def __init__(self, model: ModelSpec, config: IntegratorConfig,
                 times: Sequence[float]):
        self.model = model
        self.config = config
        self.times = sorted(set(float(t) for t in times if t > 0.0))
        self._cache: dict[float, FlowResult] = {}

    def _result(self, s: GraphSample) -> FlowResult:
        res = self._cache.get(s.x0)
        if res is None:
            horizon = self.times[-1] if self.times else 1.0
            res = integrate(self.model, PhasePoint(s.x0, s.p0), s.u0,
                            horizon, self.config, t_eval=self.times)
            self._cache[s.x0] = res
        return res

    def state(self, s: GraphSample, t: float) -> tuple:
        """('alive', (x, p, u)) or ('escaped', corner) at checkpoint t."""
        if t == 0.0:
            return ("alive", (s.x0, s.p0, s.u0))
        res = self._result(s)
        if isinstance(res.status, Alive) or t <= res.ts[-1]:
            try:
                return ("alive", res.state_at(t))
            except KeyError:
                pass
        return ("escaped", res.status.corner)

    def push_at(self, samples: Sequence[GraphSample], t: float,
                threads: int = 1) -> PushForward:
        samples = sorted(samples, key=lambda s: s.x0)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as tp:
                list(tp.map(self._result, samples))
        states = [self.state(s, t) for s in samples]
        return assemble_pushforward(t, samples, states)

    def push_adaptive(self, spec: RateFunctionSpec,
                      samples: list[GraphSample], t: float,
                      cover: Optional[tuple[float, float]] = None,
                      x_gap: float = 0.02, max_new: int = 800,
                      threads: int = 1) -> PushForward:
        """Refined push; ``samples`` is extended in place, so a scan reusing
        the list pays each refinement integration only once."""
        samples.sort(key=lambda s: s.x0)
        inserted = 0
        while True:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                pf = self.push_at(samples, t, threads=threads)
            if inserted >= max_new:
                return self.push_at(samples, t, threads=threads)
            new_x0 = self._refinement_points(pf, cover, x_gap)
            if not new_x0:
                return self.push_at(samples, t, threads=threads)
            for x0 in new_x0:
                r = rate0(spec, x0)
                samples.append(GraphSample(x0=x0, p0=r.deriv, u0=r.value))
            inserted += len(new_x0)
            samples.sort(key=lambda s: s.x0)

    def _refinement_points(self, pf: PushForward,
                           cover: Optional[tuple[float, float]],
                           x_gap: float) -> list[float]:
        x0 = pf.sample_x0
        status = pf.sample_status
        alive_x = pf.sample_x
        new: list[float] = []

        def midpoint(i: int, j: int):
            if x0[j] - x0[i] > 1e-12:
                new.append(0.5 * (x0[i] + x0[j]))

        for i in range(len(x0) - 1):
            a, b = status[i], status[i + 1]
            if a == 0 and b == 0:
                if pf.sample_branch[i] == pf.sample_branch[i + 1] \
                        and abs(alive_x[i + 1] - alive_x[i]) > x_gap:
                    midpoint(i, i + 1)
            elif (a == 0) != (b == 0) and cover is not None:
                alive_i = i if a == 0 else i + 1
                corner = int(b if a == 0 else a)
                target = cover[1] if corner > 0 else cover[0]
                reached = alive_x[alive_i] >= target if corner > 0 \
                    else alive_x[alive_i] <= target
                if not reached:
                    midpoint(i, i + 1)

        for b in pf.branches:
            if 0 < len(b.x0s) < MIN_BRANCH_SAMPLES:
                for i in range(len(b.x0s) - 1):
                    if b.x0s[i + 1] - b.x0s[i] > 1e-12:
                        new.append(0.5 * (b.x0s[i] + b.x0s[i + 1]))
        return sorted(set(new))


def pushforward_rows(pf: PushForward) -> list[tuple]:
    """Rows (t, x0, p0, x, p, u, branch_id, status) for the CSV dump."""
    rows = []
    for i in range(len(pf.sample_x0)):
        st = int(pf.sample_status[i])
        label = "alive" if st == 0 else ("escaped+" if st > 0 else "escaped-")
        rows.append((pf.t, float(pf.sample_x0[i]), float(pf.sample_p0[i]),
                     float(pf.sample_x[i]), float(pf.sample_p[i]),
                     float(pf.sample_u[i]), int(pf.sample_branch[i]), label))
    return rows
