import csv
import json

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentz_fick import cli
from lorentz_fick.config import OUT_ENV, ConfigError, default_config, load_config, parse_config
from lorentz_fick.pipeline import CriterionResult

SMALL = {
    "grid": {"n_x": 60, "n_theta": 32},
    "sampler": {"n_samples": 200, "points": [[0.5, 0.0], [0.25, 2.0]]},
    "scatter": {"n_points": 64, "epsilons": [0.1]},
    "sweep": {"n_x": 60, "n_theta": 32, "delta": 0.86},
    "seed": 5,
}


def _write(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def _read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# config_hash=")
    return list(csv.DictReader(lines[1:]))


def test_defaults_and_views():
    cfg = parse_config({})
    assert cfg.params.epsilon == 0.05 and cfg.potential.profile == "poly"
    assert cfg.seed is None and cfg.data == default_config()


@pytest.mark.parametrize("override,where", [
    ({"params": {"epsilon": -1}}, "params.epsilon"),
    ({"params": {"alpha": 0.6}}, "params.alpha"),
    ({"grid": {"n_theta": 33}}, "grid.n_theta"),
    ({"grid": {"method": "magic"}}, "grid.method"),
    ({"sampler": {"points": [[2.0, 0.0]]}}, "sampler.points[0][0]"),
    ({"conventions": {"D": "weird"}}, "conventions.D"),
    ({"seed": -3}, "seed"),
    ({"bogus": 1}, "bogus"),
    ({"params": {"epsilon": "x"}}, "params.epsilon"),
    ({"potential": {"name": "gauss"}}, "potential"),
])
def test_validation_names_the_field(override, where):
    with pytest.raises(ConfigError) as err:
        parse_config(override)
    assert err.value.path == where


def test_bad_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("params: [unclosed")
    with pytest.raises(ConfigError):
        load_config(p)


@settings(max_examples=40, deadline=None)
@given(eps=st.floats(1e-3, 0.5), alpha=st.floats(0.01, 0.49), lam=st.floats(0, 0.3),
       nx=st.integers(8, 500), seed=st.integers(0, 2 ** 64 - 1), coef=st.sampled_from(["table", "mu_half", 0.7]))
def test_round_trip(eps, alpha, lam, nx, seed, coef):
    cfg = parse_config({"params": {"epsilon": eps, "alpha": alpha, "lam": lam}, "grid": {"n_x": nx},
                        "seed": seed, "conventions": {"landau_coefficient": coef}})
    again = parse_config(yaml.safe_load(cfg.to_yaml()))
    assert again == cfg and again.hash() == cfg.hash()


def test_seed_and_output_dir(monkeypatch):
    cfg = parse_config({})
    seeded, drawn = cfg.ensure_seed()
    assert drawn and 0 <= seeded.seed < 2 ** 63
    assert parse_config({"seed": 4}).ensure_seed() == (parse_config({"seed": 4}), False)
    monkeypatch.setenv(OUT_ENV, "/tmp/from-env")
    assert cfg.output_dir() == "/tmp/from-env"
    assert cfg.output_dir("flag") == "flag"
    assert parse_config({"workers": 3}).hash() == cfg.hash()
    assert parse_config({"seed": 1}).hash() != parse_config({"seed": 2}).hash()


def test_grid_equilibrium_run(tmp_path):
    data = dict(SMALL, params={"rho1": 1.5, "rho2": 1.5})
    assert cli.main(["grid", "--config", _write(tmp_path, data), "--out", str(tmp_path / "o")]) == 0
    run = next((tmp_path / "o").iterdir())
    rows = _read_csv(run / "profile_landau.csv")
    assert all(float(r["rho"]) == 1.5 and float(r["J"]) == 0.0 for r in rows)
    summary = json.loads((run / "summary.json").read_text())
    assert summary["results"]["landau"]["fick"]["pass"] is True
    assert summary["seed"] == 5 and summary["config_hash"] in run.name
    assert set(summary["regime_flags"]) >= {"assumption_1", "theorem_1_regime"}


def test_runs_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, SMALL)
    for out in ("a", "b"):
        assert cli.main(["boltzmann", "--config", cfg, "--out", str(tmp_path / out), "--workers", "1"]) == 0
    run_a = next((tmp_path / "a").iterdir())
    run_b = tmp_path / "b" / run_a.name
    for name in ("summary.json", "estimates.csv"):
        assert (run_a / name).read_bytes() == (run_b / name).read_bytes()


def test_seed_flag_changes_results(tmp_path):
    cfg = _write(tmp_path, SMALL)
    cli.main(["landau", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    cli.main(["landau", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    a = _read_csv(next((tmp_path / "a").iterdir()) / "estimates.csv")
    b = _read_csv(next((tmp_path / "b").iterdir()) / "estimates.csv")
    assert [r["mean"] for r in a] != [r["mean"] for r in b]


def test_sweep_rows(tmp_path):
    assert cli.main(["sweep", "--config", _write(tmp_path, SMALL), "--out", str(tmp_path)]) == 0
    run = next(p for p in tmp_path.iterdir() if p.is_dir())
    rows = _read_csv(run / "convergence.csv")
    d = [float(r["distance"]) for r in rows]
    assert len(rows) == 3 and d[0] > d[1] > d[2]


def test_scatter_micro_and_fick(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert cli.main(["scatter", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert cli.main(["micro", "--config", cfg, "--out", str(tmp_path / "m")]) == 0
    cli.main(["fick", "--config", cfg, "--out", str(tmp_path / "f")])
    s = json.loads((next((tmp_path / "s").iterdir()) / "summary.json").read_text())
    assert s["results"]["pass"] is True
    f = json.loads((next((tmp_path / "f").iterdir()) / "summary.json").read_text())
    assert {"D_used", "J_mean", "residual", "pass"} <= set(f["results"]["report"])


def test_all_exit_status(tmp_path, monkeypatch):
    fake = [CriterionResult(1, "one", True), CriterionResult(2, "two", False)]
    monkeypatch.setattr(cli, "run_acceptance", lambda echo=None: fake)
    assert cli.main(["all", "--out", str(tmp_path), "--seed", "1"]) == 1
    monkeypatch.setattr(cli, "run_acceptance", lambda echo=None: fake[:1])
    assert cli.main(["all", "--out", str(tmp_path), "--seed", "1"]) == 0


def test_config_errors_exit_2(tmp_path, capsys):
    assert cli.main(["grid", "--config", _write(tmp_path, {"grid": {"n_x": 2}})]) == 2
    assert "grid.n_x" in capsys.readouterr().err
    assert cli.main(["grid", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        cli.main(["explode"])
