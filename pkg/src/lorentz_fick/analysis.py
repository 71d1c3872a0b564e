"""Macroscopic observables: profiles, fluxes, Fick's law and convergence studies.

Velocity integrals use the normalized uniform measure on the circle, so a
constant field ``c`` has density ``c`` and the reservoir values are
densities directly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid_solver import DiscreteField, Grid, solve_boltzmann, solve_landau
from .params import KineticParams
from .scattering import DomainError, RadialPotential, build_table, landau_coefficient_B, landau_limit_B

__all__ = [
    "StationaryProfile",
    "FickReport",
    "ConvergenceRow",
    "ConvergenceStudy",
    "linear_profile",
    "green_kubo_D",
    "fick_check",
    "convergence_study",
    "profile_from_field",
    "profile_from_estimates",
    "landau_coefficient",
    "sup_distance",
]

LEVELS = ("micro", "boltzmann", "landau", "linear")


@dataclass
class StationaryProfile:
    x1_grid: np.ndarray
    rho: np.ndarray
    J: np.ndarray
    rho_err: np.ndarray
    J_err: np.ndarray
    source: str
    rho1: float = 1.0
    rho2: float = 2.0
    L: float = 1.0

    def __post_init__(self):
        self.x1_grid = np.asarray(self.x1_grid, dtype=float)
        n = self.x1_grid.size
        for name in ("rho", "J", "rho_err", "J_err"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            setattr(self, name, arr)
        if self.source not in ("micro", "boltzmann", "landau", "grid", "linear"):
            raise ValueError(f"unknown profile source {self.source!r}")

    def within_bounds(self, k=3.0, atol=1e-10):
        lo, hi = min(self.rho1, self.rho2), max(self.rho1, self.rho2)
        slack = k * self.rho_err + atol
        return bool(np.all(self.rho >= lo - slack) and np.all(self.rho <= hi + slack))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "rho", "J", "rho_err", "J_err"])
            for row in zip(self.x1_grid, self.rho, self.J, self.rho_err, self.J_err):
                w.writerow([repr(float(v)) for v in row])


@dataclass
class FickReport:
    D_used: float
    J_mean: float
    gradient: float
    residual: float
    residual_components: list
    flux_error: float
    flux_constancy: float
    residual_tol: float
    flux_tol: float
    weak_pass: bool
    flux_pass: bool
    passed: bool
    n_test_functions: int = 5

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def linear_profile(rho1, rho2, L, x1):
    """``(rho1 (L - x1) + rho2 x1) / L``; arrays accepted."""
    x = np.asarray(x1, dtype=float)
    if np.any(x < 0) or np.any(x > L):
        raise DomainError("x1 must lie in [0, L]")
    out = (rho1 * (L - x) + rho2 * x) / L
    return float(out) if out.ndim == 0 else out


def green_kubo_D(mu, convention="component_normalized", coefficient=None, n=64):
    """Diffusion coefficient from the inverse angular Laplacian.

    ``component_normalized``: ``(2/mu) <cos (-Delta)^-1 cos>`` with the
    normalized measure, ``= 1/mu``; this is the value that makes the flux of
    the first-order correction equal to ``-D grad rho``.
    ``paper_literal``: ``(2/mu) int_0^{2 pi} v . (-Delta)^-1 v d theta``
    with arclength and both components, ``= 4 pi / mu``.
    If ``coefficient`` is given the generator is ``coefficient * Delta``
    instead of ``(mu/2) Delta``.
    """
    if not mu > 0:
        raise ValueError("mu must be > 0")
    pref = 1.0 / coefficient if coefficient is not None else 2.0 / mu
    th = 2.0 * np.pi * np.arange(n) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    inv = np.zeros(n)
    inv[k != 0] = 1.0 / k[k != 0] ** 2

    def inv_neg_laplacian(f):
        return np.real(np.fft.ifft(np.fft.fft(f) * inv))

    c, s = np.cos(th), np.sin(th)
    if convention == "component_normalized":
        return float(pref * np.mean(c * inv_neg_laplacian(c)))
    if convention == "paper_literal":
        arc = 2.0 * np.pi / n
        return float(pref * arc * np.sum(c * inv_neg_laplacian(c) + s * inv_neg_laplacian(s)))
    raise ValueError(f"unknown convention {convention!r}")


def _test_functions(x, L, n_test):
    k = np.arange(1, n_test + 1)[:, None]
    return np.sin(k * np.pi * x[None, :] / L)


def fick_check(profile: StationaryProfile, D, flux_tol=0.03, residual_tol=0.05, n_test=5,
               abs_flux_tol=1e-8) -> FickReport:
    """Weak and integrated checks of ``J + D d rho/dx = 0``.

    The weak residual pairs ``J + D rho'`` with ``sin(k pi x / L)``,
    ``k = 1..n_test``, using midpoint differences between profile points;
    it vanishes identically for a linear profile with the matching constant
    flux.  It is reported relative to ``|D (rho2 - rho1) / L| sqrt(L / 2)``
    when the reservoirs differ.
    """
    x = profile.x1_grid
    if x.size < 8:
        raise ValueError("profile needs at least 8 positions")
    rho, J = profile.rho, profile.J
    xc = x - x.mean()
    # least-squares slope; measured from rho[0] so a flat profile gives exactly 0
    gradient = float(xc @ (rho - rho[0]) / (xc @ xc))
    xm = 0.5 * (x[1:] + x[:-1])
    dx = np.diff(x)
    integrand = 0.5 * (J[1:] + J[:-1]) + D * np.diff(rho) / dx
    comps = _test_functions(xm, profile.L, n_test) @ (integrand * dx)
    scale = abs(D * (profile.rho2 - profile.rho1) / profile.L)
    raw = float(np.sqrt(np.sum(comps ** 2)))
    residual = raw / (scale * math.sqrt(profile.L / 2.0)) if scale > 0 else raw
    J_mean = float(np.mean(J))
    target = -D * (profile.rho2 - profile.rho1) / profile.L
    if scale > 0:
        flux_error = abs(J_mean - target) / scale
        flux_pass = flux_error <= flux_tol
    else:
        flux_error = abs(J_mean)
        flux_pass = flux_error <= abs_flux_tol
    constancy = float(np.max(np.abs(J - J_mean)) / abs(J_mean)) if J_mean != 0 else float(np.max(np.abs(J)))
    weak_pass = residual <= (residual_tol if scale > 0 else abs_flux_tol)
    return FickReport(
        D_used=float(D), J_mean=J_mean, gradient=gradient, residual=float(residual),
        residual_components=[float(c) for c in comps], flux_error=float(flux_error),
        flux_constancy=constancy, residual_tol=residual_tol, flux_tol=flux_tol,
        weak_pass=bool(weak_pass), flux_pass=bool(flux_pass), passed=bool(weak_pass and flux_pass),
        n_test_functions=n_test,
    )


def profile_from_field(f: DiscreteField, source="grid") -> StationaryProfile:
    n = f.grid.n_x
    return StationaryProfile(f.grid.x, f.rho, f.flux, np.zeros(n), np.zeros(n), source,
                             f.rho1, f.rho2, f.grid.L)


def profile_from_estimates(x1_grid, angles, estimates, params: KineticParams, delta=None, source="landau"):
    """Profile from MC estimates ``estimates[i][j]`` at ``(x1_grid[i], angles[j])``.

    ``angles`` must be uniform on the circle; the density and flux are the
    equal-weight angle averages.
    """
    delta = params.delta if delta is None else delta
    angles = np.asarray(angles, dtype=float)
    m = np.array([[e.mean for e in row] for row in estimates])
    se = np.array([[e.stderr for e in row] for row in estimates])
    c = np.cos(angles)[None, :]
    k = angles.size
    rho = m.mean(axis=1)
    J = (m * c).mean(axis=1) / delta
    rho_err = np.sqrt((se ** 2).sum(axis=1)) / k
    J_err = np.sqrt(((se * c) ** 2).sum(axis=1)) / k / delta
    return StationaryProfile(x1_grid, rho, J, rho_err, J_err, source, params.rho1, params.rho2, params.L)


# ------------------------------------------------------- convergence study

def landau_coefficient(params: KineticParams, source="table", pot=None, table=None, n_points=512):
    if isinstance(source, (int, float)):
        return float(source)
    if source == "mu_half":
        return 0.5 * params.mu
    pot = pot or RadialPotential.quartic()
    if source == "table":
        table = table or build_table(pot, params.epsilon, params.alpha, n_points)
        return landau_coefficient_B(table, params.mu)
    if source == "limit":
        return landau_limit_B(pot, params.mu)
    raise ValueError(f"unknown Landau coefficient source {source!r}")


def sup_distance(a, b, err_a=None, err_b=None):
    """``max |a - b|`` and the combined error at the maximizing entry."""
    a, b = np.ravel(np.asarray(a, dtype=float)), np.ravel(np.asarray(b, dtype=float))
    d = np.abs(a - b)
    i = int(np.argmax(d))
    ea = 0.0 if err_a is None else float(np.ravel(err_a)[i])
    eb = 0.0 if err_b is None else float(np.ravel(err_b)[i])
    return float(d[i]), math.hypot(ea, eb)


@dataclass
class ConvergenceRow:
    epsilon: float
    delta: float
    distance: float
    err: float


@dataclass
class ConvergenceStudy:
    level_pair: str
    rows: list
    fitted_rate: float
    rate_err: float
    status: str
    reference_exponents: dict
    strictly_decreasing: bool
    sweep_variable: str = "epsilon"
    details: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["rows"] = [asdict(r) for r in self.rows]
        return d

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "delta", "distance", "err"])
            for r in self.rows:
                w.writerow([repr(float(r.epsilon)), repr(float(r.delta)), repr(float(r.distance)), repr(float(r.err))])


def _normalize_pair(level_pair):
    if isinstance(level_pair, str):
        parts = level_pair.replace("<->", "-").replace("↔", "-").split("-")
    else:
        parts = list(level_pair)
    if len(parts) != 2 or any(p not in LEVELS for p in parts):
        raise ValueError(f"level pair must name two of {LEVELS}, got {level_pair!r}")
    return tuple(parts)


def _fit(xs, ds, errs):
    xs, ds, errs = map(lambda v: np.asarray(v, dtype=float), (xs, ds, errs))
    if np.any(ds <= 0) or len(ds) < 2:
        return float("nan"), float("nan"), "unresolved"
    if np.any(ds <= 2.0 * errs):
        status = "unresolved"
    else:
        status = "resolved"
    lx, ly = np.log(xs), np.log(ds)
    if len(ds) >= 3:
        coef, cov = np.polyfit(lx, ly, 1, cov="unscaled")
        resid = ly - np.polyval(coef, lx)
        s2 = float(resid @ resid) / (len(ds) - 2)
        # log-error from the distance error bars where they dominate the scatter
        w = errs / ds
        s2 = max(s2, float(np.mean(w ** 2)))
        rate, rate_err = float(coef[0]), float(math.sqrt(s2 * cov[0, 0]))
    else:
        rate = float((ly[1] - ly[0]) / (lx[1] - lx[0]))
        rate_err = float(math.hypot(*(errs / ds)) / abs(lx[1] - lx[0]))
    if not (abs(rate) > 2.0 * rate_err):
        status = "unresolved"
    return rate, rate_err, status


def _grid_level(level, params, opts, delta, table_cache):
    n_x, n_theta = opts.get("grid", (200, 128))
    grid = Grid(n_x, n_theta, params.L, delta)
    pot = opts.get("potential") or RadialPotential.quartic()
    key = (params.epsilon, params.alpha)
    if level in ("boltzmann", "landau") and key not in table_cache:
        table_cache[key] = build_table(pot, params.epsilon, params.alpha, opts.get("table_points", 512))
    if level == "boltzmann":
        return solve_boltzmann(params, grid, table_cache[key])
    if level == "landau":
        coef = landau_coefficient(params, opts.get("landau_coefficient", "table"), pot, table_cache.get(key))
        return solve_landau(params, grid, coef)
    raise ValueError(level)


def _mc_level(level, params, opts, delta, table_cache):
    from .kinetic_sim import GeneratorSpec, stationary_estimate_kinetic
    from .micro_sim import stationary_estimate_micro

    pot = opts.get("potential") or RadialPotential.quartic()
    points = opts.get("points", [(0.5 * params.L, k * math.pi / 4) for k in range(8)])
    n = int(opts.get("n_samples", 10_000))
    seed = int(opts.get("seed", 0))
    key = (params.epsilon, params.alpha)
    if level in ("boltzmann", "landau") and key not in table_cache:
        table_cache[key] = build_table(pot, params.epsilon, params.alpha, opts.get("table_points", 512))
    means, errs = [], []
    for k, (x1, th) in enumerate(points):
        s = seed + 7919 * k
        if level == "micro":
            e = stationary_estimate_micro((x1, 0.0), (math.cos(th), math.sin(th)), params, n, seed=s, pot=pot)
        elif level == "boltzmann":
            e = stationary_estimate_kinetic("boltzmann", (x1, 0.0), th, params, n, seed=s, table=table_cache[key])
        else:
            gen = GeneratorSpec.landau(params, opts.get("landau_coefficient", "table"), table_cache[key], pot)
            e = stationary_estimate_kinetic("landau", (x1, 0.0), th, params, n, seed=s, gen=gen)
        means.append(e.mean)
        errs.append(e.stderr)
    return np.array(means), np.array(errs)


def convergence_study(regime_list, level_pair, mode="grid", **opts) -> ConvergenceStudy:
    """Sup distance between two levels of description along a parameter sweep.

    ``regime_list`` holds :class:`KineticParams`; ``level_pair`` is e.g.
    ``"boltzmann-landau"``.  ``mode="grid"`` compares deterministic solutions
    (full fields, or densities when one side is the linear profile) with
    ``delta`` fixed to ``opts["delta"]`` or taken from each regime (or from
    ``opts["deltas"]``).  ``mode="mc"`` compares Monte Carlo estimates at
    ``opts["points"]``.  The sweep variable is ``epsilon`` unless the pair
    involves the linear profile, where it is ``delta``.
    """
    a, b = _normalize_pair(level_pair)
    regimes = list(regime_list)
    if len(regimes) < 3 and not opts.get("allow_short", False):
        raise ValueError("a convergence study needs at least 3 regimes")
    deltas = opts.get("deltas")
    fixed = opts.get("delta")
    linear = "linear" in (a, b)
    cache: dict = {}
    rows = []
    for k, p in enumerate(regimes):
        delta = float(deltas[k]) if deltas is not None else (float(fixed) if fixed is not None else p.delta)
        if a == b:
            rows.append(ConvergenceRow(p.epsilon, delta, 0.0, 0.0))
            continue
        if mode == "grid":
            if "micro" in (a, b):
                raise ValueError("the mechanical level has no grid solver; use mode='mc'")
            if linear:
                other = b if a == "linear" else a
                f = _grid_level(other, p, opts, delta, cache)
                exact = linear_profile(p.rho1, p.rho2, p.L, f.grid.x)
                d, e = sup_distance(f.rho, exact)
            else:
                fa = _grid_level(a, p, opts, delta, cache)
                fb = _grid_level(b, p, opts, delta, cache)
                d, e = sup_distance(fa.values, fb.values)
        elif mode == "mc":
            if linear:
                raise ValueError("compare with the linear profile in grid mode")
            ma, ea = _mc_level(a, p, opts, delta, cache)
            mb, eb = _mc_level(b, p, opts, delta, cache)
            d, e = sup_distance(ma, mb, ea, eb)
        else:
            raise ValueError("mode must be 'grid' or 'mc'")
        rows.append(ConvergenceRow(p.epsilon, delta, d, e))
    var = "delta" if linear else "epsilon"
    xs = [r.delta if linear else r.epsilon for r in rows]
    dists = [r.distance for r in rows]
    errs = [r.err for r in rows]
    rate, rate_err, status = _fit(xs, dists, errs)
    order = np.argsort(xs)[::-1]
    seq = [dists[i] for i in order]
    decreasing = all(seq[i + 1] < seq[i] for i in range(len(seq) - 1))
    p0 = regimes[0]
    refs = {}
    if {a, b} == {"boltzmann", "landau"}:
        refs["2(alpha-lambda)"] = 2.0 * (p0.alpha - p0.lam)
    if {a, b} == {"micro", "boltzmann"} or {a, b} == {"micro", "landau"}:
        refs["gamma_plus"] = p0.gamma_plus
        refs["gamma_minus"] = p0.gamma_minus
        refs["gamma_minus-3lambda"] = p0.gamma_minus - 3.0 * p0.lam
        refs["gamma_plus-3lambda"] = p0.gamma_plus - 3.0 * p0.lam
    return ConvergenceStudy(
        level_pair=f"{a}-{b}", rows=rows, fitted_rate=rate, rate_err=rate_err, status=status,
        reference_exponents=refs, strictly_decreasing=decreasing, sweep_variable=var,
        details={"mode": mode},
    )
