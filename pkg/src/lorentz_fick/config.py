"""Experiment configuration: a YAML mapping validated into :class:`ExperimentConfig`.

Schema (every section optional, defaults shown by ``default_config()``)::

    params:      epsilon, alpha, lam, mu, L, rho1, rho2
    potential:   name (poly | cos2 | zero | quartic), height, exponent
    grid:        n_x, n_theta, delta (null = eps^lam), method, scheme
    sampler:     n_samples, t_cap (null = 10 eps^-lam L), dt, points [[x1, theta], ...]
    scatter:     n_points, epsilons
    sweep:       level_pair, mode, epsilons, deltas, delta, n_x, n_theta, n_samples
    fick:        source (grid | landau | boltzmann), flux_tol, residual_tol, n_test
    conventions: D (component_normalized | paper_literal),
                 landau_coefficient (table | limit | mu_half | number)
    seed:        64-bit integer (null = drawn and printed)
    output_dir:  directory for run folders
    workers:     kernel threads

``output_dir`` and ``workers`` only decide where and how fast a run goes;
they are left out of :meth:`ExperimentConfig.hash` and of
:meth:`ExperimentConfig.science`.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import secrets

import yaml

from .params import KineticParams
from .scattering import RadialPotential

__all__ = ["ConfigError", "ExperimentConfig", "default_config", "load_config", "parse_config", "OUT_ENV"]

OUT_ENV = "LORENTZ_FICK_OUT"
EXECUTION_KEYS = ("output_dir", "workers")

_DEFAULTS = {
    "params": {"epsilon": 0.05, "alpha": 0.1, "lam": 0.05, "mu": 1.0, "L": 1.0, "rho1": 1.0, "rho2": 2.0},
    "potential": {"name": "poly", "height": 1.0, "exponent": 2},
    "grid": {"n_x": 800, "n_theta": 128, "delta": None, "method": "direct", "scheme": "upwind"},
    "sampler": {
        "n_samples": 10000,
        "t_cap": None,
        "dt": None,
        "points": [[0.5, 0.0], [0.5, 0.7853981633974483], [0.25, 3.141592653589793]],
    },
    "scatter": {"n_points": 512, "epsilons": [0.1, 0.05, 0.025]},
    "sweep": {
        "level_pair": "boltzmann-landau",
        "mode": "grid",
        "epsilons": [0.1, 0.05, 0.025],
        "deltas": None,
        "delta": None,
        "n_x": 200,
        "n_theta": 128,
        "n_samples": 10000,
    },
    "fick": {"source": "grid", "flux_tol": 0.03, "residual_tol": 0.05, "n_test": 5},
    "conventions": {"D": "component_normalized", "landau_coefficient": "table"},
    "seed": None,
    "output_dir": "runs",
    "workers": 1,
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


def default_config():
    return copy.deepcopy(_DEFAULTS)


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(where, "unknown field")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(where, "expected a mapping")
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = val
    return out


def _num(raw, path, positive=False, nonneg=False, optional=False, integer=False):
    if raw is None and optional:
        return None
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(path, f"expected a number, got {raw!r}")
    if integer and int(raw) != raw:
        raise ConfigError(path, "expected an integer")
    if positive and not raw > 0:
        raise ConfigError(path, "must be > 0")
    if nonneg and not raw >= 0:
        raise ConfigError(path, "must be >= 0")
    return int(raw) if integer else float(raw)


class ExperimentConfig:
    """Validated configuration; ``data`` is the normalized mapping."""

    def __init__(self, data):
        self.data = data
        self._validate()

    def _validate(self):
        d = self.data
        p = d["params"]
        for key in ("epsilon", "mu", "L"):
            _num(p[key], f"params.{key}", positive=True)
        for key in ("lam", "rho1", "rho2"):
            _num(p[key], f"params.{key}", nonneg=True)
        a = _num(p["alpha"], "params.alpha")
        if not 0 < a < 0.5:
            raise ConfigError("params.alpha", "must lie in (0, 1/2)")
        try:
            self.potential
        except ValueError as exc:
            raise ConfigError("potential", str(exc)) from None
        g = d["grid"]
        nx = _num(g["n_x"], "grid.n_x", integer=True)
        nt = _num(g["n_theta"], "grid.n_theta", integer=True)
        if nx < 8:
            raise ConfigError("grid.n_x", "must be >= 8")
        if nt < 4 or nt % 2:
            raise ConfigError("grid.n_theta", "must be even and >= 4")
        _num(g["delta"], "grid.delta", positive=True, optional=True)
        if g["method"] not in ("direct", "source_iteration"):
            raise ConfigError("grid.method", "must be 'direct' or 'source_iteration'")
        if g["scheme"] not in ("upwind", "muscl"):
            raise ConfigError("grid.scheme", "must be 'upwind' or 'muscl'")
        s = d["sampler"]
        _num(s["n_samples"], "sampler.n_samples", positive=True, integer=True)
        _num(s["t_cap"], "sampler.t_cap", positive=True, optional=True)
        _num(s["dt"], "sampler.dt", positive=True, optional=True)
        if not isinstance(s["points"], list) or not s["points"]:
            raise ConfigError("sampler.points", "expected a non-empty list of [x1, theta]")
        for k, pt in enumerate(s["points"]):
            if not (isinstance(pt, (list, tuple)) and len(pt) == 2):
                raise ConfigError(f"sampler.points[{k}]", "expected [x1, theta]")
            x1 = _num(pt[0], f"sampler.points[{k}][0]")
            _num(pt[1], f"sampler.points[{k}][1]")
            if not 0 <= x1 <= p["L"]:
                raise ConfigError(f"sampler.points[{k}][0]", "x1 must lie in [0, L]")
        sc = d["scatter"]
        if _num(sc["n_points"], "scatter.n_points", integer=True) < 16:
            raise ConfigError("scatter.n_points", "must be >= 16")
        self._eps_list(sc["epsilons"], "scatter.epsilons")
        sw = d["sweep"]
        if sw["mode"] not in ("grid", "mc"):
            raise ConfigError("sweep.mode", "must be 'grid' or 'mc'")
        parts = str(sw["level_pair"]).split("-")
        if len(parts) != 2 or any(q not in ("micro", "boltzmann", "landau", "linear") for q in parts):
            raise ConfigError("sweep.level_pair", "expected '<level>-<level>' with levels micro|boltzmann|landau|linear")
        self._eps_list(sw["epsilons"], "sweep.epsilons")
        if sw["deltas"] is not None:
            self._eps_list(sw["deltas"], "sweep.deltas")
            if len(sw["deltas"]) != len(sw["epsilons"]):
                raise ConfigError("sweep.deltas", "must have one entry per epsilon")
        _num(sw["delta"], "sweep.delta", positive=True, optional=True)
        _num(sw["n_x"], "sweep.n_x", positive=True, integer=True)
        if _num(sw["n_theta"], "sweep.n_theta", integer=True) % 2:
            raise ConfigError("sweep.n_theta", "must be even")
        _num(sw["n_samples"], "sweep.n_samples", positive=True, integer=True)
        f = d["fick"]
        if f["source"] not in ("grid", "landau", "boltzmann"):
            raise ConfigError("fick.source", "must be grid, landau or boltzmann")
        _num(f["flux_tol"], "fick.flux_tol", positive=True)
        _num(f["residual_tol"], "fick.residual_tol", positive=True)
        _num(f["n_test"], "fick.n_test", positive=True, integer=True)
        c = d["conventions"]
        if c["D"] not in ("component_normalized", "paper_literal"):
            raise ConfigError("conventions.D", "must be component_normalized or paper_literal")
        lc = c["landau_coefficient"]
        if not (lc in ("table", "limit", "mu_half") or (isinstance(lc, (int, float)) and not isinstance(lc, bool) and lc > 0)):
            raise ConfigError("conventions.landau_coefficient", "must be table, limit, mu_half or a positive number")
        if d["seed"] is not None:
            seed = _num(d["seed"], "seed", nonneg=True, integer=True)
            if seed >= 2 ** 64:
                raise ConfigError("seed", "must fit in 64 bits")
        if not isinstance(d["output_dir"], str) or not d["output_dir"]:
            raise ConfigError("output_dir", "expected a path string")
        _num(d["workers"], "workers", positive=True, integer=True)

    @staticmethod
    def _eps_list(vals, path):
        if not isinstance(vals, list) or not vals:
            raise ConfigError(path, "expected a non-empty list")
        for k, v in enumerate(vals):
            _num(v, f"{path}[{k}]", positive=True)

    # ---------------------------------------------------------------- views
    @property
    def params(self):
        p = self.data["params"]
        return KineticParams(**{k: float(v) for k, v in p.items()})

    @property
    def potential(self):
        return RadialPotential.from_spec(self.data["potential"])

    @property
    def seed(self):
        return self.data["seed"]

    def with_seed(self, seed):
        d = copy.deepcopy(self.data)
        d["seed"] = int(seed)
        return ExperimentConfig(d)

    def ensure_seed(self):
        """Config with a concrete seed; an omitted seed is drawn (and should be printed)."""
        if self.data["seed"] is not None:
            return self, False
        return self.with_seed(secrets.randbits(63)), True

    def output_dir(self, override=None):
        if override:
            return override
        return os.environ.get(OUT_ENV) or self.data["output_dir"]

    def regime_flags(self):
        return self.params.regime_flags()

    def to_dict(self):
        return copy.deepcopy(self.data)

    def to_yaml(self):
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=False)

    def science(self):
        """The mapping without the execution-only keys."""
        return {k: copy.deepcopy(v) for k, v in self.data.items() if k not in EXECUTION_KEYS}

    def hash(self):
        blob = json.dumps(self.science(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.data == other.data

    def __repr__(self):
        return f"ExperimentConfig(hash={self.hash()})"


def parse_config(mapping) -> ExperimentConfig:
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigError("<root>", "expected a mapping")
    return ExperimentConfig(_merge(_DEFAULTS, mapping))


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    return parse_config(raw)
