"""Scenario-driven command line front end.

Subcommands map one-to-one onto the library operations::

    flow        integrate one trajectory, dump t,x,p,u,H
    push        push the initial-slope graph to one time, dump branches
    rate        reconstruct the evolved rate function (envelope/dp/fd/all)
    thresholds  vertical-tangent time and closed-form discrepancy report
    loop        rotating-loop extraction and period measurement
    scan        loss/recovery sweep over a time grid
    scenario    run a TOML scenario config end to end (CSV/JSON/SVG)

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.  Outputs
are deterministic: identical configs produce byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:            # Python < 3.11
    import tomli as tomllib

from . import analysis, flow, models, pushforward, rate_evolution
from ._svg import PALETTE, SvgFigure
from .errors import ConfigError, GnglabError

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# scenario configuration


@dataclass
class GridConfig:
    n: int = 201
    margin: float = 1e-6
    p_window: float = 10.0
    rate_n: int = 201
    lo: Optional[float] = None
    hi: Optional[float] = None


@dataclass
class ScanConfig:
    enabled: bool = False
    t_max: float = 1.0
    t_step: float = 0.02


@dataclass
class OutputConfig:
    csv_dir: str = "out"
    json_path: str = "out/report.json"
    svg: bool = True


@dataclass
class ScenarioConfig:
    model: models.ModelSpec
    rate0: models.RateFunctionSpec
    times: list[float]
    grid: GridConfig
    integrator: flow.IntegratorConfig
    outputs: OutputConfig
    thresholds: bool = False
    loop: bool = False
    certificates: bool = False
    scan: ScanConfig = field(default_factory=ScanConfig)
    threads: int = 1


def _table(data: dict, key: str, where: str) -> dict:
    value = data.get(key)
    if not isinstance(value, dict):
        raise ConfigError(f"{where}: missing [{key}] table")
    return value


def model_from_table(table: dict, where: str = "config") -> models.ModelSpec:
    kind = table.get("kind")
    if kind in ("curie_weiss", "cw"):
        return models.CurieWeiss(beta=float(table.get("beta", 0.0)),
                                 h=float(table.get("h", 0.0)))
    if kind == "diffusion":
        coeffs = table.get("w_coeffs")
        if not coeffs:
            raise ConfigError(f"{where}.model: diffusion needs w_coeffs")
        return models.Diffusion(w_coeffs=tuple(float(c) for c in coeffs))
    raise ConfigError(f"{where}.model.kind must be curie_weiss or diffusion, "
                      f"got {kind!r}")


def rate_from_table(table: dict, where: str = "config") -> models.RateFunctionSpec:
    kind = table.get("kind")
    if kind == "cw_entropy":
        return models.CWEntropy(alpha=float(table.get("alpha", 0.0)),
                                theta=float(table.get("theta", 0.0)))
    if kind == "polynomial":
        coeffs = table.get("coeffs")
        if not coeffs:
            raise ConfigError(f"{where}.rate0: polynomial needs coeffs")
        return models.PolynomialRate(coeffs=tuple(float(c) for c in coeffs))
    if kind == "tabulated":
        try:
            return models.TabulatedRate(
                xs=tuple(table["xs"]), values=tuple(table["values"]),
                derivs=tuple(table["derivs"]),
                deriv_threshold=float(table.get("deriv_threshold", 5.0)))
        except KeyError as missing:
            raise ConfigError(
                f"{where}.rate0: tabulated needs xs/values/derivs "
                f"(missing {missing})") from None
    raise ConfigError(f"{where}.rate0.kind must be cw_entropy, polynomial, "
                      f"or tabulated, got {kind!r}")


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    where = str(path)
    model = model_from_table(_table(data, "model", where), where)
    rate0 = rate_from_table(_table(data, "rate0", where), where)

    times = data.get("times")
    if not times or not isinstance(times, list):
        raise ConfigError(f"{where}: need a nonempty 'times' list")
    times = [float(t) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0.0:
        raise ConfigError(f"{where}: times must be nonnegative and increasing")

    grid_tab = data.get("grid", {})
    grid = GridConfig(
        n=int(grid_tab.get("n", 201)),
        margin=float(grid_tab.get("margin", 1e-6)),
        p_window=float(grid_tab.get("p_window", 10.0)),
        rate_n=int(grid_tab.get("rate_n", 201)),
        lo=grid_tab.get("lo"),
        hi=grid_tab.get("hi"),
    )
    if grid.rate_n < 64:
        raise ConfigError(f"{where}: grid.rate_n must be >= 64 for rate "
                          "reconstruction")

    integ_tab = data.get("integrator", {})
    integrator = flow.IntegratorConfig(
        rel_tol=float(integ_tab.get("rel_tol", 1e-10)),
        abs_tol=float(integ_tab.get("abs_tol", 1e-12)),
        max_step=float(integ_tab.get("max_step", 0.05)),
        p_cap=float(integ_tab.get("p_cap", 30.0)),
        boundary_margin=float(integ_tab.get("boundary_margin", 1e-9)),
    )

    out_tab = data.get("outputs", {})
    outputs = OutputConfig(
        csv_dir=str(out_tab.get("csv_dir", "out")),
        json_path=str(out_tab.get("json_path", "out/report.json")),
        svg=bool(out_tab.get("svg", True)),
    )

    ana_tab = data.get("analysis", {})
    scan_tab = data.get("scan", {})
    scan = ScanConfig(
        enabled=bool(scan_tab.get("enabled", False)),
        t_max=float(scan_tab.get("t_max", 1.0)),
        t_step=float(scan_tab.get("t_step", 0.02)),
    )
    return ScenarioConfig(
        model=model, rate0=rate0, times=times, grid=grid,
        integrator=integrator, outputs=outputs,
        thresholds=bool(ana_tab.get("thresholds", False)),
        loop=bool(ana_tab.get("loop", False)),
        certificates=bool(ana_tab.get("certificates", False)),
        scan=scan,
        threads=int(data.get("threads", 0)) or _env_threads(),
    )


def _env_threads() -> int:
    try:
        return max(1, int(os.environ.get("GNGLAB_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# writers


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _model_json(model: models.ModelSpec) -> dict:
    if isinstance(model, models.CurieWeiss):
        return {"kind": "curie_weiss", "beta": model.beta, "h": model.h}
    return {"kind": "diffusion", "w_coeffs": list(model.w_coeffs)}


def _rate_json(spec: models.RateFunctionSpec) -> dict:
    if isinstance(spec, models.CWEntropy):
        return {"kind": "cw_entropy", "alpha": spec.alpha, "theta": spec.theta}
    if isinstance(spec, models.PolynomialRate):
        return {"kind": "polynomial", "coeffs": list(spec.coeffs)}
    return {"kind": "tabulated", "n": len(spec.xs)}


# ---------------------------------------------------------------------------
# scenario runner


def default_rate_window(model: models.ModelSpec,
                        spec: models.RateFunctionSpec,
                        grid: GridConfig) -> tuple[float, float]:
    if grid.lo is not None and grid.hi is not None:
        return float(grid.lo), float(grid.hi)
    if isinstance(model, models.CurieWeiss):
        return (-0.95, 0.95)
    lo, hi = pushforward._slope_window(spec, grid.p_window)
    pad = 0.15 * (hi - lo)
    return lo + pad, hi - pad


def run_scenario(config: ScenarioConfig) -> dict:
    csv_dir = Path(config.outputs.csv_dir)
    window = default_rate_window(config.model, config.rate0, config.grid)
    xs = np.linspace(window[0], window[1], config.grid.rate_n)
    cover = (window[0] - 0.01 * (window[1] - window[0]),
             window[1] + 0.01 * (window[1] - window[0]))
    if isinstance(config.model, models.CurieWeiss):
        cover = (max(cover[0], -1 + 1e-7), min(cover[1], 1 - 1e-7))

    samples = pushforward.sample_initial_graph(
        config.rate0, n=config.grid.n, margin=config.grid.margin,
        p_window=config.grid.p_window)
    pool = pushforward.TrajectoryPool(
        config.model, config.integrator,
        times=[t for t in config.times if t > 0])

    rate_fig = SvgFigure(title="evolved rate function", x_label="x",
                         y_label="I_t")
    push_fig = SvgFigure(title="pushed slope graph", x_label="x",
                         y_label="p")
    i0 = models.rate0_values(config.rate0, xs)
    rate_fig.add_line(xs, i0 - i0.min(), label="t=0", color="#444444",
                      dash=True)

    entries = []
    for i, t in enumerate(config.times):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pf = pool.push_adaptive(config.rate0, samples, t, cover=cover,
                                    threads=config.threads)
        report = pushforward.detect_overhangs(pf)
        prof = rate_evolution.envelope(pf, xs)
        certified = rate_evolution.classify_differentiability(prof) \
            if t > 0 else []

        tag = f"t{i:02d}"
        _write_csv(csv_dir / f"push_{tag}.csv",
                   ["t", "x0", "p0", "x", "p", "u", "branch_id", "status"],
                   pushforward.pushforward_rows(pf))
        _write_csv(csv_dir / f"rate_{tag}.csv",
                   ["t", "x", "I_t", "left_slope", "right_slope",
                    "nondiff_flag"],
                   rate_evolution.rate_profile_rows(prof))

        color = PALETTE[i % len(PALETTE)]
        rate_fig.add_line(prof.xs, prof.values, label=f"t={t:g}", color=color)
        for pt in prof.nondiff_points:
            j = int(np.argmin(np.abs(prof.xs - pt.x)))
            rate_fig.add_marker(pt.x, float(prof.values[j]))
        for b in pf.branches:
            push_fig.add_line(b.xs, b.ps, color=color,
                              label=f"t={t:g}" if b.index == 0 else "")
        for region in report.regions:
            push_fig.add_band(region.x_lo, region.x_hi)

        entries.append({
            "t": t,
            "is_graph": report.is_graph,
            "escaped_fraction": pf.escaped_fraction,
            "n_branches": len(pf.branches),
            "overhang_regions": [[r.x_lo, r.x_hi] for r in report.regions],
            "nondiff_points": [{"x": pt.x, "gradients": list(pt.gradients)}
                               for pt in prof.nondiff_points],
            "certified_nondiff": [{"x": pt.x,
                                   "gradients": list(pt.gradients)}
                                  for pt in certified],
        })

    payload = {
        "schema_version": SCHEMA_VERSION,
        "model": _model_json(config.model),
        "rate0": _rate_json(config.rate0),
        "times": config.times,
        "grid": {"n": config.grid.n, "rate_n": config.grid.rate_n,
                 "window": list(window)},
        "entries": entries,
    }

    if config.thresholds:
        payload["thresholds"] = _threshold_json(config.model, config.rate0)
    if config.certificates:
        payload["order_preservation"] = _certificate_json(config.model)
    if config.loop:
        payload["loop"] = _loop_json(config.model, csv_dir)
    if config.scan.enabled:
        t_grid = np.arange(0.0, config.scan.t_max + 1e-12, config.scan.t_step)
        timeline = analysis.recovery_scan(
            config.model, config.rate0, t_grid, config=config.integrator,
            n=config.grid.n, margin=config.grid.margin)
        payload["scan"] = _timeline_json(timeline)

    _write_json(Path(config.outputs.json_path), _jsonable(payload))
    if config.outputs.svg:
        csv_dir.mkdir(parents=True, exist_ok=True)
        rate_fig.save(csv_dir / "rates.svg")
        push_fig.save(csv_dir / "pushforward.svg")
    return payload


def _threshold_json(model, spec) -> dict:
    try:
        report = analysis.heating_threshold_report(model, spec)
    except GnglabError as exc:
        return {"applicable": False, "reason": str(exc)}
    return {
        "applicable": True,
        "vertical_tangent_time": report.vertical_tangent_time,
        "direct_formula_time": report.direct_formula_time,
        "discrepancy_flag": report.discrepancy_flag,
    }


def _certificate_json(model) -> list[dict]:
    reports = []
    for region in ("whole", ("upper", 0.0, 0.0), ("lower", 0.0, 0.0)):
        rep = analysis.order_preservation_certificate(model, region)
        reports.append({
            "region": "whole" if region == "whole" else list(region),
            "criterion": rep.criterion,
            "holds": rep.holds,
            "counterexample": list(rep.counterexample)
            if rep.counterexample else None,
        })
    return reports


def _loop_json(model, csv_dir: Path) -> dict:
    points = models.stationary_points(model)
    if len(points) < 3:
        return {"applicable": False,
                "reason": "fewer than three stationary points"}
    loop = analysis.rotating_loop(model, points[-2], points[-1], e_frac=0.5)
    mid = len(loop.xs) // 2
    period = analysis.loop_period(
        model, loop, flow.PhasePoint(float(loop.xs[mid]),
                                     float(loop.upper[mid])))
    rows = [(float(x), float(g), float(h))
            for x, g, h in zip(loop.xs, loop.lower, loop.upper)]
    _write_csv(csv_dir / "loop.csv", ["x", "lower_p", "upper_p"], rows)
    return {
        "applicable": True,
        "x_lo": loop.x_lo, "x_hi": loop.x_hi,
        "energy": loop.energy, "period": period,
    }


def _timeline_json(tl: analysis.ScenarioTimeline) -> dict:
    return {
        "times": [float(t) for t in tl.times],
        "onset_time": tl.onset_time,
        "certified_until": tl.certified_until,
        "clear_time": tl.clear_time,
        "t1_ref": tl.t1_ref,
        "threshold": tl.threshold,
        "entries": [{
            "t": e.t, "is_graph": e.is_graph,
            "overhang_regions": [list(r) for r in e.overhang_regions],
            "certified": list(e.certified),
        } for e in tl.entries],
    }


# ---------------------------------------------------------------------------
# argument parsing


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model", "dynamics selection")
    group.add_argument("--model", choices=["cw", "diffusion"], default="cw",
                       help="spin-flip interval model or diffusion on R")
    group.add_argument("--beta", type=float, default=0.0,
                       help="inverse temperature of the dynamics (cw)")
    group.add_argument("--h", type=float, default=0.0,
                       help="external field of the dynamics (cw)")
    group.add_argument("--w-coeffs", type=str, default="0,0,-0.5,0,0.25",
                       help="drift potential coefficients, low to high "
                            "(diffusion)")


def _add_rate_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("rate0", "initial rate function")
    group.add_argument("--alpha", type=float, default=1.0,
                       help="profile steepness (entropy family)")
    group.add_argument("--theta", type=float, default=0.0,
                       help="profile tilt (entropy family)")
    group.add_argument("--rate-coeffs", type=str, default=None,
                       help="polynomial rate coefficients, low to high "
                            "(diffusion models)")


def _parse_model(args) -> models.ModelSpec:
    if args.model == "cw":
        return models.CurieWeiss(beta=args.beta, h=args.h)
    coeffs = tuple(float(c) for c in args.w_coeffs.split(","))
    return models.Diffusion(w_coeffs=coeffs)


def _parse_rate(args, model) -> models.RateFunctionSpec:
    if isinstance(model, models.CurieWeiss):
        return models.CWEntropy(alpha=args.alpha, theta=args.theta)
    if args.rate_coeffs:
        coeffs = tuple(float(c) for c in args.rate_coeffs.split(","))
        return models.PolynomialRate(coeffs=coeffs)
    raise ConfigError("diffusion runs need --rate-coeffs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnglab",
        description="Hamiltonian-flow laboratory for time-evolved "
                    "large-deviation rate functions in one dimension.")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap for data-parallel pushes "
                             "(default: GNGLAB_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flow", help="integrate one characteristic")
    _add_model_args(p)
    p.add_argument("--x", type=float, required=True, help="start position")
    p.add_argument("--p", type=float, required=True, help="start momentum")
    p.add_argument("--u0", type=float, default=0.0, help="start action value")
    p.add_argument("--t", type=float, required=True, help="horizon")
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--out", type=str, default=None, help="CSV path")

    p = sub.add_parser("push", help="push the initial-slope graph")
    _add_model_args(p)
    _add_rate_args(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--n", type=int, default=201, help="base sample count")
    p.add_argument("--margin", type=float, default=1e-6)
    p.add_argument("--out", type=str, default=None, help="CSV path")

    p = sub.add_parser("rate", help="reconstruct the evolved rate function")
    _add_model_args(p)
    _add_rate_args(p)
    p.add_argument("--method", choices=["envelope", "dp", "fd", "all"],
                   default="all")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--grid-lo", type=float, default=None)
    p.add_argument("--grid-hi", type=float, default=None)
    p.add_argument("--grid-n", type=int, default=201)
    p.add_argument("--dp-steps", type=int, default=32)
    p.add_argument("--n", type=int, default=201, help="base sample count")
    p.add_argument("--margin", type=float, default=1e-6)
    p.add_argument("--out-dir", type=str, default=None)

    p = sub.add_parser("thresholds", help="overhang-onset threshold report")
    _add_model_args(p)
    _add_rate_args(p)
    p.add_argument("--out", type=str, default=None, help="JSON path")

    p = sub.add_parser("loop", help="rotating loop and period")
    _add_model_args(p)
    p.add_argument("--m1", type=float, default=None,
                   help="left stationary point (default: from the model)")
    p.add_argument("--m2", type=float, default=None)
    p.add_argument("--e-frac", type=float, default=0.5)
    p.add_argument("--out", type=str, default=None, help="JSON path")
    p.add_argument("--csv", type=str, default=None, help="polyline CSV path")

    p = sub.add_parser("scan", help="loss/recovery sweep over time")
    _add_model_args(p)
    _add_rate_args(p)
    p.add_argument("--t-max", type=float, default=1.5)
    p.add_argument("--t-step", type=float, default=0.01)
    p.add_argument("--n", type=int, default=201)
    p.add_argument("--out", type=str, default=None, help="JSON path")

    p = sub.add_parser("scenario", help="run a TOML scenario config")
    p.add_argument("--config", type=str, required=True)
    return parser


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_flow(args) -> dict:
    model = _parse_model(args)
    config = flow.IntegratorConfig(rel_tol=args.rel_tol)
    result = flow.integrate(model, flow.PhasePoint(args.x, args.p), args.u0,
                            args.t, config)
    if args.out:
        _write_csv(Path(args.out), ["t", "x", "p", "u", "H"],
                   flow.trajectory_rows(model, result))
    x, p, u = result.final()
    summary = {"status": "escaped" if result.escaped else "alive",
               "t_end": float(result.ts[-1]), "x": x, "p": p, "u": u,
               "energy_drift": result.energy_drift}
    if result.escaped:
        summary["corner"] = result.status.corner
        summary["escape_time"] = result.status.escape_time
    return summary


def _cmd_push(args) -> dict:
    model = _parse_model(args)
    spec = _parse_rate(args, model)
    samples = pushforward.sample_initial_graph(spec, n=args.n,
                                               margin=args.margin)
    config = flow.IntegratorConfig()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pf = pushforward.push_graph(model, samples, args.t, config,
                                    threads=args.threads_resolved)
    report = pushforward.detect_overhangs(pf)
    if args.out:
        _write_csv(Path(args.out),
                   ["t", "x0", "p0", "x", "p", "u", "branch_id", "status"],
                   pushforward.pushforward_rows(pf))
    return {"t": args.t, "n_samples": len(samples),
            "n_branches": len(pf.branches),
            "escaped_fraction": pf.escaped_fraction,
            "is_graph": report.is_graph,
            "overhang_regions": [[r.x_lo, r.x_hi] for r in report.regions]}


def _cmd_rate(args) -> dict:
    model = _parse_model(args)
    spec = _parse_rate(args, model)
    grid_cfg = GridConfig(n=args.n, margin=args.margin, rate_n=args.grid_n,
                          lo=args.grid_lo, hi=args.grid_hi)
    window = default_rate_window(model, spec, grid_cfg)
    xs = np.linspace(window[0], window[1], args.grid_n)
    config = flow.IntegratorConfig()

    out_dir = Path(args.out_dir) if args.out_dir else None
    profiles = {}
    if args.method in ("envelope", "all"):
        samples = pushforward.sample_initial_graph(spec, n=args.n,
                                                   margin=args.margin)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pf = pushforward.push_graph_adaptive(
                model, spec, samples, args.t, config,
                cover=(window[0] - 1e-3, window[1] + 1e-3))
        profiles["envelope"] = rate_evolution.envelope(pf, xs)
    if args.method in ("dp", "all"):
        profiles["dp"] = rate_evolution.hopf_lax_dp(model, spec, args.t, xs,
                                                    n_steps=args.dp_steps)
    if args.method in ("fd", "all"):
        profiles["fd"] = rate_evolution.hj_fd_solve(model, spec, args.t, xs)

    summary = {"t": args.t, "grid_n": args.grid_n, "window": list(window)}
    for name, prof in profiles.items():
        if out_dir:
            _write_csv(out_dir / f"rate_{name}.csv",
                       ["t", "x", "I_t", "left_slope", "right_slope",
                        "nondiff_flag"],
                       rate_evolution.rate_profile_rows(prof))
        summary[name] = {
            "nondiff_points": [{"x": pt.x, "gradients": list(pt.gradients)}
                               for pt in prof.nondiff_points]}
    names = sorted(profiles)
    agreement = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            gap = float(np.abs(profiles[a].values - profiles[b].values).max())
            agreement[f"{a}_vs_{b}"] = gap
    if agreement:
        summary["linf_agreement"] = agreement
    return summary


def _cmd_thresholds(args) -> dict:
    model = _parse_model(args)
    spec = _parse_rate(args, model)
    return _threshold_json(model, spec)


def _cmd_loop(args) -> dict:
    model = _parse_model(args)
    if args.m1 is None or args.m2 is None:
        points = models.stationary_points(model)
        if len(points) < 3:
            raise ConfigError("model has no rotation cell; pass --m1/--m2")
        m1, m2 = points[-2], points[-1]
    else:
        m1, m2 = args.m1, args.m2
    loop = analysis.rotating_loop(model, m1, m2, e_frac=args.e_frac)
    mid = len(loop.xs) // 2
    period = analysis.loop_period(
        model, loop, flow.PhasePoint(float(loop.xs[mid]),
                                     float(loop.upper[mid])))
    if args.csv:
        rows = [(float(x), float(g), float(hh))
                for x, g, hh in zip(loop.xs, loop.lower, loop.upper)]
        _write_csv(Path(args.csv), ["x", "lower_p", "upper_p"], rows)
    return {"m1": m1, "m2": m2, "x_lo": loop.x_lo, "x_hi": loop.x_hi,
            "energy": loop.energy, "period": period}


def _cmd_scan(args) -> dict:
    model = _parse_model(args)
    spec = _parse_rate(args, model)
    t_grid = np.arange(0.0, args.t_max + 1e-12, args.t_step)
    timeline = analysis.recovery_scan(model, spec, t_grid, n=args.n)
    return _timeline_json(timeline)


def _cmd_scenario(args) -> dict:
    config = load_scenario(args.config)
    if args.threads_resolved > 1:
        config.threads = args.threads_resolved
    return run_scenario(config)


_COMMANDS = {
    "flow": _cmd_flow,
    "push": _cmd_push,
    "rate": _cmd_rate,
    "thresholds": _cmd_thresholds,
    "loop": _cmd_loop,
    "scan": _cmd_scan,
    "scenario": _cmd_scenario,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.threads_resolved = args.threads if args.threads else _env_threads()
    try:
        summary = _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GnglabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_path = getattr(args, "out", None)
    if out_path and args.command in ("thresholds", "scan", "loop"):
        _write_json(Path(out_path), _jsonable(summary))
    print(json.dumps(_jsonable(summary), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
