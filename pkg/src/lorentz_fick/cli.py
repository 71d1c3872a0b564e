"""``lorentz-fick <subcommand> --config FILE [--seed N] [--workers N] [--out DIR]``.

Each invocation writes one run directory ``<out>/<subcommand>-<config hash>``
holding ``summary.json`` and the per-artifact CSVs.  Every file carries the
config hash, the seed and the package version; nothing time-dependent is
written, so the same config and seed reproduce the files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import subprocess
import sys

import numpy as np

from . import __version__, _rng
from ._accel import backend_name, set_workers
from .analysis import (
    convergence_study,
    fick_check,
    green_kubo_D,
    landau_coefficient,
    linear_profile,
    profile_from_estimates,
    profile_from_field,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .grid_solver import Grid, hilbert_residual, solve_boltzmann, solve_landau
from .kinetic_sim import GeneratorSpec, stationary_estimate_kinetic
from .micro_sim import stationary_estimate_micro
from .pipeline import run_acceptance
from .scattering import build_table, landau_coefficient_B, verify_angle_bound

SUBCOMMANDS = ("scatter", "micro", "boltzmann", "landau", "grid", "fick", "sweep", "all")


def version_string():
    """Package version with the git revision appended when available."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        rev = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return __version__
    tag = rev.stdout.strip()
    return f"{__version__}+g{tag}" if rev.returncode == 0 and tag else __version__


class Run:
    """Output directory plus the metadata stamped into every artifact."""

    def __init__(self, cfg: ExperimentConfig, subcommand, out_root):
        self.cfg = cfg
        self.meta = {
            "subcommand": subcommand,
            "config_hash": cfg.hash(),
            "seed": cfg.seed,
            "version": version_string(),
            "regime_flags": cfg.regime_flags(),
        }
        self.dir = os.path.join(out_root, f"{subcommand}-{cfg.hash()}")
        os.makedirs(self.dir, exist_ok=True)
        self.files = []

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.dir, name)

    def stamp_csv(self, name, writer):
        """Write a CSV via ``writer(path)`` and prepend a metadata comment line."""
        p = self.path(name)
        writer(p)
        with open(p) as fh:
            body = fh.read()
        head = f"# config_hash={self.meta['config_hash']} seed={self.meta['seed']} version={self.meta['version']}\n"
        with open(p, "w", newline="") as fh:
            fh.write(head + body)

    def write_summary(self, results):
        doc = dict(self.meta)
        doc["config"] = self.cfg.science()
        doc["results"] = results
        doc["files"] = sorted(self.files)
        with open(os.path.join(self.dir, "summary.json"), "w") as fh:
            json.dump(_plain(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def _table(cfg, params=None):
    p = params or cfg.params
    return build_table(cfg.potential, p.epsilon, p.alpha, cfg.data["scatter"]["n_points"])


def _coefficient(cfg, params, table=None):
    return landau_coefficient(params, cfg.data["conventions"]["landau_coefficient"], cfg.potential, table)


def _grid(cfg, params):
    g = cfg.data["grid"]
    return Grid.for_params(params, g["n_x"], g["n_theta"], g["delta"])


def _point_seed(seed, k, stream):
    return int(_rng.derive_key(np.uint64(seed), k, stream))


# ----------------------------------------------------------------- commands

def cmd_scatter(run: Run):
    cfg = run.cfg
    p = cfg.params
    out = {}
    for eps in cfg.data["scatter"]["epsilons"]:
        table = build_table(cfg.potential, float(eps), p.alpha, cfg.data["scatter"]["n_points"])
        report = verify_angle_bound(table, cfg.potential)
        run.stamp_csv(f"table_eps{eps!r}.csv", table.to_csv)
        out[repr(float(eps))] = {
            "bound": report.to_dict(),
            "B": landau_coefficient_B(table, p.mu),
            "max_angle": float(np.max(np.abs(table.angle))),
        }
    ok = all(v["bound"]["pass"] for v in out.values())
    return {"tables": out, "pass": ok}, ok


_ESTIMATE_COLUMNS = ["x1", "theta", "mean", "stderr", "n", "censored_fraction", "dropped"]


def _estimates_csv(rows):
    def write(path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(_ESTIMATE_COLUMNS)
            for (x1, th), e in rows:
                w.writerow([repr(float(x1)), repr(float(th)), repr(float(e.mean)), repr(float(e.stderr)),
                            e.n, repr(float(e.censored_fraction)), e.dropped])

    return write


def _sample(cfg, level, x1, th, seed, n=None, params=None, table=None, gen=None):
    p = params or cfg.params
    s = cfg.data["sampler"]
    n = n or s["n_samples"]
    if level == "micro":
        return stationary_estimate_micro((x1, 0.0), (math.cos(th), math.sin(th)), p, n,
                                         t_cap=s["t_cap"], seed=seed, pot=cfg.potential)
    if level == "boltzmann":
        return stationary_estimate_kinetic("boltzmann", (x1, 0.0), th, p, n, t_cap=s["t_cap"],
                                           seed=seed, table=table)
    return stationary_estimate_kinetic("landau", (x1, 0.0), th, p, n, t_cap=s["t_cap"], seed=seed,
                                       gen=gen, dt=s["dt"])


def _generators(cfg, level, params):
    table = gen = None
    if level in ("boltzmann", "landau"):
        table = _table(cfg, params)
    if level == "landau":
        gen = GeneratorSpec.landau(params, _coefficient(cfg, params, table))
    return table, gen


def cmd_estimates(run: Run, level):
    cfg = run.cfg
    p = cfg.params
    table, gen = _generators(cfg, level, p)
    rows = []
    for k, (x1, th) in enumerate(cfg.data["sampler"]["points"]):
        e = _sample(cfg, level, float(x1), float(th), _point_seed(cfg.seed, k, 3), params=p, table=table, gen=gen)
        rows.append(((x1, th), e))
    run.stamp_csv("estimates.csv", _estimates_csv(rows))
    lo, hi = min(p.rho1, p.rho2), max(p.rho1, p.rho2)
    ok = all(lo <= e.mean <= hi for _, e in rows)
    res = {
        "level": level,
        "estimates": [e.to_record() for _, e in rows],
        "max_censored_fraction": max(e.censored_fraction for _, e in rows),
        "maximum_principle": ok,
    }
    if gen is not None:
        res["landau_coefficient"] = gen.diffusion
    return res, ok


def _solve(cfg, level, params, grid, table=None):
    g = cfg.data["grid"]
    if level == "landau":
        coef = _coefficient(cfg, params, table)
        return solve_landau(params, grid, coef, method=g["method"], scheme=g["scheme"]), coef
    table = table or _table(cfg, params)
    return (solve_boltzmann(params, grid, table, method=g["method"], scheme=g["scheme"]),
            landau_coefficient_B(table, params.mu))


def cmd_grid(run: Run):
    cfg = run.cfg
    p = cfg.params
    grid = _grid(cfg, p)
    table = _table(cfg, p)
    out = {"grid": {"n_x": grid.n_x, "n_theta": grid.n_theta, "delta": grid.delta}}
    ok = True
    for level in ("landau", "boltzmann"):
        f, coef = _solve(cfg, level, p, grid, table)
        run.stamp_csv(f"profile_{level}.csv", f.profile_csv)
        run.stamp_csv(f"field_{level}.csv", f.to_csv)
        D = green_kubo_D(p.mu, cfg.data["conventions"]["D"], coefficient=coef)
        prof = profile_from_field(f)
        rep = fick_check(prof, D, cfg.data["fick"]["flux_tol"], cfg.data["fick"]["residual_tol"],
                         cfg.data["fick"]["n_test"])
        exact = linear_profile(p.rho1, p.rho2, p.L, grid.x)
        entry = {
            "coefficient": coef,
            "maximum_principle": f.info.get("maximum_principle"),
            "sup_distance_linear": float(np.max(np.abs(f.rho - exact))),
            "fick": rep.to_dict(),
            "solver": {k: v for k, v in f.info.items() if k != "history"},
        }
        if level == "landau":
            h = hilbert_residual(f, p, grid)
            entry["hilbert"] = {k: h[k] for k in ("a_mean", "a_expected", "a_flatness",
                                                  "remainder_norm", "remainder_norm_scaled")}
        out[level] = entry
        ok = ok and bool(f.info.get("maximum_principle", True))
    return out, ok


def cmd_fick(run: Run):
    cfg = run.cfg
    p = cfg.params
    fk = cfg.data["fick"]
    source = fk["source"]
    table = _table(cfg, p)
    if source == "grid":
        grid = _grid(cfg, p)
        f, coef = _solve(cfg, "landau", p, grid, table)
        prof = profile_from_field(f)
    else:
        # Monte Carlo profile on 9 interior positions and 8 angles
        xs = np.linspace(0.1, 0.9, 9) * p.L
        angles = np.arange(8) * (math.pi / 4)
        table, gen = _generators(cfg, source, p)
        coef = gen.diffusion if gen is not None else landau_coefficient_B(table, p.mu)
        ests = [[_sample(cfg, source, float(x1), float(th), _point_seed(cfg.seed, 8 * i + j, 5),
                         params=p, table=table, gen=gen)
                 for j, th in enumerate(angles)] for i, x1 in enumerate(xs)]
        prof = profile_from_estimates(xs, angles, ests, p, source=source)
    D = green_kubo_D(p.mu, cfg.data["conventions"]["D"], coefficient=coef)
    rep = fick_check(prof, D, fk["flux_tol"], fk["residual_tol"], fk["n_test"])
    run.stamp_csv("profile.csv", prof.to_csv)
    return {"source": source, "coefficient": coef, "report": rep.to_dict()}, rep.passed


def cmd_sweep(run: Run):
    cfg = run.cfg
    sw = cfg.data["sweep"]
    p = cfg.params
    regimes = [p.with_(epsilon=float(e)) for e in sw["epsilons"]]
    study = convergence_study(
        regimes, sw["level_pair"], mode=sw["mode"], delta=sw["delta"], deltas=sw["deltas"],
        grid=(sw["n_x"], sw["n_theta"]), landau_coefficient=cfg.data["conventions"]["landau_coefficient"],
        points=[tuple(pt) for pt in cfg.data["sampler"]["points"]], n_samples=sw["n_samples"],
        seed=_point_seed(cfg.seed, 0, 6), potential=cfg.potential, table_points=cfg.data["scatter"]["n_points"],
        allow_short=True,
    )
    run.stamp_csv("convergence.csv", study.to_csv)
    return study.to_dict(), True


def cmd_all(run: Run):
    results = run_acceptance(echo=print)
    doc = []
    for r in results:
        d = r.to_dict()
        d.pop("seconds", None)
        doc.append(d)
    ok = all(r.passed for r in results)
    return {"criteria": doc, "passed": sum(r.passed for r in results), "total": len(results)}, ok


def execute(subcommand, cfg: ExperimentConfig, out_root):
    """Run one subcommand; returns ``(run directory, results, ok)``."""
    run = Run(cfg, subcommand, out_root)
    if subcommand == "scatter":
        res, ok = cmd_scatter(run)
    elif subcommand in ("micro", "boltzmann", "landau"):
        res, ok = cmd_estimates(run, subcommand)
    elif subcommand == "grid":
        res, ok = cmd_grid(run)
    elif subcommand == "fick":
        res, ok = cmd_fick(run)
    elif subcommand == "sweep":
        res, ok = cmd_sweep(run)
    elif subcommand == "all":
        res, ok = cmd_all(run)
    else:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    run.write_summary(res)
    return run.dir, res, ok


def build_parser():
    ap = argparse.ArgumentParser(prog="lorentz-fick", description="Stationary Lorentz gas in a slab between two particle reservoirs.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="YAML experiment file (defaults apply when omitted)")
    ap.add_argument("--seed", type=int, help="64-bit seed; overrides the config")
    ap.add_argument("--workers", type=int, help="kernel threads; overrides the config")
    ap.add_argument("--out", help="output root; overrides the config and $LORENTZ_FICK_OUT")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else parse_config({})
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.workers is not None:
            d = cfg.to_dict()
            d["workers"] = args.workers
            cfg = ExperimentConfig(d)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    cfg, drawn = cfg.ensure_seed()
    if drawn:
        print(f"seed not given; drew seed={cfg.seed}")
    set_workers(cfg.data["workers"])
    out_root = cfg.output_dir(args.out)
    run_dir, _, ok = execute(args.subcommand, cfg, out_root)
    print(f"{args.subcommand}: {'ok' if ok else 'FAILED'} ({backend_name()}) -> {run_dir}")
    return 0 if ok or args.subcommand != "all" else 1


if __name__ == "__main__":
    sys.exit(main())
