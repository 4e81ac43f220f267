"""Config parsing, subcommands, scenario runs, determinism."""
import json
import warnings
from pathlib import Path

import numpy as np
import pytest

from gnglab import cli
from gnglab.errors import ConfigError
from gnglab.flow import IntegratorConfig
from gnglab.models import Diffusion, PolynomialRate
from gnglab.pushforward import push_graph_adaptive, sample_initial_graph
from gnglab.rate_evolution import envelope, hj_fd_solve, hopf_lax_dp

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

SMALL_CONFIG = """
times = [0.3]

[model]
kind = "curie_weiss"
beta = 0.0

[rate0]
kind = "cw_entropy"
alpha = 2.0

[grid]
n = 64
rate_n = 64

[outputs]
csv_dir = "{out}"
json_path = "{out}/report.json"
svg = true
"""


# --- config parsing ----------------------------------------------------------

def test_all_shipped_configs_parse():
    kinds = {}
    for path in sorted(SCENARIOS.glob("*.toml")):
        config = cli.load_scenario(path)
        assert config.times
        kinds[path.stem] = config.model.kind
    assert kinds["equilibrium"] == "curie_weiss"
    assert kinds["heating_diffusion"] == "diffusion"
    assert len(kinds) == 6


def test_config_validation_errors(tmp_path):
    def check(text, fragment):
        path = tmp_path / "bad.toml"
        path.write_text(text)
        with pytest.raises(ConfigError) as err:
            cli.load_scenario(path)
        assert fragment in str(err.value)

    check("times = [0.1]\n[rate0]\nkind = 'cw_entropy'\n", "[model]")
    check("times = [0.1]\n[model]\nkind = 'bogus'\n", "kind")
    check("times = [0.2, 0.1]\n[model]\nkind = 'cw'\n[rate0]\n"
          "kind = 'cw_entropy'\nalpha = 1.0\n", "increasing")
    check("times = [0.1]\n[model]\nkind = 'cw'\n[rate0]\n"
          "kind = 'cw_entropy'\nalpha = 1.0\n[grid]\nrate_n = 32\n", "64")
    check("times = [0.1]\n[model]\nkind = 'diffusion'\n[rate0]\n"
          "kind = 'polynomial'\ncoeffs = [0.0, 0.0, 1.0]\n", "w_coeffs")
    with pytest.raises(ConfigError):
        cli.load_scenario(tmp_path / "missing.toml")
    bad = tmp_path / "syntax.toml"
    bad.write_text("times = [0.1\n")
    with pytest.raises(ConfigError):
        cli.load_scenario(bad)


def test_model_and_rate_tables():
    model = cli.model_from_table({"kind": "diffusion",
                                  "w_coeffs": [0, 0, -0.5, 0, 0.25]})
    assert isinstance(model, Diffusion)
    spec = cli.rate_from_table({"kind": "polynomial",
                                "coeffs": [0, 0, -1.5, 0, 0.25]})
    assert isinstance(spec, PolynomialRate)


# --- scenario runs -----------------------------------------------------------

def test_run_scenario_outputs(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    config_path = tmp_path / "small.toml"
    config_path.write_text(SMALL_CONFIG.format(out="artifacts"))
    payload = cli.run_scenario(cli.load_scenario(config_path))
    assert payload["schema_version"] == 1
    assert len(payload["entries"]) == 1
    entry = payload["entries"][0]
    assert entry["t"] == 0.3
    assert not entry["is_graph"]          # past the onset
    out = tmp_path / "artifacts"
    for name in ("push_t00.csv", "rate_t00.csv", "rates.svg",
                 "pushforward.svg", "report.json"):
        assert (out / name).exists(), name
    header = (out / "rate_t00.csv").read_text().splitlines()[0]
    assert header == "t,x,I_t,left_slope,right_slope,nondiff_flag"
    header = (out / "push_t00.csv").read_text().splitlines()[0]
    assert header == "t,x0,p0,x,p,u,branch_id,status"
    report = json.loads((out / "report.json").read_text())
    assert report["schema_version"] == 1


def test_scenario_determinism(tmp_path, monkeypatch):
    results = []
    for run in ("a", "b"):
        run_dir = tmp_path / run
        run_dir.mkdir()
        monkeypatch.chdir(run_dir)
        config_path = run_dir / "small.toml"
        config_path.write_text(SMALL_CONFIG.format(out="artifacts"))
        cli.run_scenario(cli.load_scenario(config_path))
        results.append({p.name: p.read_bytes()
                        for p in sorted((run_dir / "artifacts").iterdir())})
    assert results[0].keys() == results[1].keys()
    for name in results[0]:
        assert results[0][name] == results[1][name], name


# --- subcommands -------------------------------------------------------------

def run_cli(capsys, argv):
    rc = cli.main(argv)
    captured = capsys.readouterr()
    return rc, captured.out


def test_cmd_flow_escape_report(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    rc, stdout = run_cli(capsys, ["flow", "--model", "cw", "--beta", "0",
                                  "--x", "0", "--p", "1.2328", "--t", "1",
                                  "--out", str(out)])
    assert rc == 0
    summary = json.loads(stdout)
    assert summary["status"] == "escaped"
    assert summary["corner"] == 1
    import math
    assert summary["escape_time"] == pytest.approx(
        -0.5 * math.log(math.tanh(1.2328)), abs=1e-4)
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x,p,u,H"
    assert len(lines) > 10


def test_cmd_push(tmp_path, capsys):
    out = tmp_path / "push.csv"
    rc, stdout = run_cli(capsys, ["push", "--model", "cw", "--beta", "0",
                                  "--alpha", "2", "--t", "0.25",
                                  "--n", "64", "--out", str(out)])
    assert rc == 0
    summary = json.loads(stdout)
    assert summary["is_graph"] is False
    assert out.exists()


def test_cmd_rate_agreement(tmp_path, capsys):
    rc, stdout = run_cli(capsys, [
        "rate", "--model", "cw", "--beta", "0", "--alpha", "2",
        "--method", "all", "--t", "0.35", "--grid-n", "201", "--n", "201",
        "--dp-steps", "32", "--out-dir", str(tmp_path)])
    assert rc == 0
    summary = json.loads(stdout)
    assert set(summary["linf_agreement"]) == {"dp_vs_envelope", "dp_vs_fd",
                                              "envelope_vs_fd"}
    assert all(v <= 5e-2 for v in summary["linf_agreement"].values())
    for name in ("rate_envelope.csv", "rate_dp.csv", "rate_fd.csv"):
        assert (tmp_path / name).exists()


def test_cmd_thresholds(capsys):
    rc, stdout = run_cli(capsys, ["thresholds", "--model", "cw",
                                  "--beta", "0", "--alpha", "2"])
    assert rc == 0
    summary = json.loads(stdout)
    assert summary["discrepancy_flag"] is True
    import math
    assert summary["vertical_tangent_time"] == pytest.approx(
        math.log(2.0) / 4.0, rel=1e-9)


def test_cmd_loop(tmp_path, capsys):
    csv = tmp_path / "loop.csv"
    rc, stdout = run_cli(capsys, ["loop", "--model", "cw", "--beta", "1.5",
                                  "--csv", str(csv)])
    assert rc == 0
    summary = json.loads(stdout)
    assert summary["period"] > 0
    assert summary["energy"] < 0
    assert csv.exists()


def test_cmd_scan(capsys):
    rc, stdout = run_cli(capsys, ["scan", "--model", "cw", "--beta", "0",
                                  "--alpha", "2", "--theta", "-0.7",
                                  "--t-max", "0.3", "--t-step", "0.05",
                                  "--n", "101"])
    assert rc == 0
    summary = json.loads(stdout)
    assert summary["onset_time"] is not None
    assert summary["threshold"] == pytest.approx(0.532840, abs=1e-6)


def test_exit_codes(tmp_path, capsys):
    rc, _ = run_cli(capsys, ["scenario", "--config",
                             str(tmp_path / "nope.toml")])
    assert rc == 2
    # runtime precondition failure: recovery scan needs beta = 0
    rc, _ = run_cli(capsys, ["scan", "--model", "cw", "--beta", "1.5",
                             "--alpha", "2", "--t-max", "0.2",
                             "--t-step", "0.1"])
    assert rc == 1
    with pytest.raises(SystemExit) as exc_info:
        cli.main(["push", "--bogus-flag"])
    assert exc_info.value.code == 2


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("GNGLAB_THREADS", "3")
    assert cli._env_threads() == 3
    monkeypatch.setenv("GNGLAB_THREADS", "junk")
    assert cli._env_threads() == 1


# --- shipped-scenario oracle agreement -----------------------------------------

@pytest.mark.parametrize("name,t,steps", [
    ("equilibrium", 1.0, 64),
    ("heating", 0.35, 64),
    ("high_temperature", 1.0, 64),
    ("cooling", 2.0, 32),
    ("recovery", 0.2, 64),
    ("heating_diffusion", 0.3, 8),
])
def test_shipped_scenarios_triple_oracle(name, t, steps):
    config = cli.load_scenario(SCENARIOS / f"{name}.toml")
    window = cli.default_rate_window(config.model, config.rate0, config.grid)
    xs = np.linspace(window[0], window[1], config.grid.rate_n)
    samples = sample_initial_graph(config.rate0, n=config.grid.n,
                                   margin=config.grid.margin,
                                   p_window=config.grid.p_window)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pf = push_graph_adaptive(config.model, config.rate0, samples, t,
                                 IntegratorConfig(),
                                 cover=(window[0] - 1e-3, window[1] + 1e-3))
    env = envelope(pf, xs)
    dp = hopf_lax_dp(config.model, config.rate0, t, xs, n_steps=steps)
    fd = hj_fd_solve(config.model, config.rate0, t, xs)
    assert np.abs(env.values - dp.values).max() <= 5e-2
    assert np.abs(env.values - fd.values).max() <= 5e-2
    assert np.abs(dp.values - fd.values).max() <= 5e-2


def test_shipped_scenarios_behaviour_and_runtime(tmp_path, monkeypatch):
    import time

    expectations = {
        "equilibrium": lambda rep: all(e["is_graph"] for e in rep["entries"]),
        "heating": lambda rep: 0.171 <= rep["thresholds"][
            "vertical_tangent_time"] <= 0.176,
        "high_temperature": lambda rep: all(
            e["is_graph"] and not e["certified_nondiff"]
            for e in rep["entries"])
        and any(c["holds"] and c["region"] != "whole"
                for c in rep["order_preservation"]),
        "cooling": lambda rep: len(
            rep["entries"][-1]["certified_nondiff"]) >= 2
        and rep["loop"]["period"] > 0,
        "recovery": lambda rep: rep["scan"]["onset_time"] is not None
        and rep["scan"]["clear_time"] is not None,
        "heating_diffusion": lambda rep: 0.544 <= rep["thresholds"][
            "vertical_tangent_time"] <= 0.555,
    }
    for name, check in expectations.items():
        run_dir = tmp_path / name
        run_dir.mkdir()
        monkeypatch.chdir(run_dir)
        start = time.perf_counter()
        payload = cli.run_scenario(
            cli.load_scenario(SCENARIOS / f"{name}.toml"))
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0, (name, elapsed)
        assert check(payload), name
