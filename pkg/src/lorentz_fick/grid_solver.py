"""Deterministic stationary solver on an ``(x1, theta)`` grid.

Finite volumes in ``x1`` (cell centres, upwind by the sign of ``cos theta``,
optional limited second-order faces) and a uniform periodic angle grid
``theta_j = (j + 1/2) 2 pi / n_theta``.  With ``n_theta`` even no node has
``cos theta = 0`` and ``pi - theta_j`` is again a node.

The discrete problem is ``A g = b`` with ``A = T + K``: ``T`` the interior
transport, ``K = -Q`` the (scaled) collision operator, ``b`` the inflow
data.  Both collision operators annihilate constants and have zero column
sums, so the face flux is exactly constant in ``x1``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spl
from scipy.interpolate import CubicSpline

from ._accel import njit, prange
from .params import KineticParams
from .scattering import ScatteringTable

__all__ = [
    "Grid",
    "DiscreteField",
    "GridSolveError",
    "NeumannDivergence",
    "solve_landau",
    "solve_boltzmann",
    "neumann_iterate",
    "hilbert_residual",
    "grid_convergence",
    "landau_operator",
    "boltzmann_operator",
]

RESIDUAL_TOL = 1e-10
INCREMENT_TOL = 1e-12


class GridSolveError(RuntimeError):
    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class NeumannDivergence(RuntimeError):
    def __init__(self, message, ratios=()):
        super().__init__(message)
        self.ratios = list(ratios)


@dataclass(frozen=True)
class Grid:
    n_x: int
    n_theta: int
    L: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        if self.n_x < 8:
            raise ValueError("n_x must be >= 8")
        if self.n_theta < 4 or self.n_theta % 2:
            raise ValueError("n_theta must be even and >= 4")
        if not self.L > 0 or not self.delta > 0:
            raise ValueError("L and delta must be > 0")

    @classmethod
    def for_params(cls, params: KineticParams, n_x, n_theta, delta=None):
        return cls(int(n_x), int(n_theta), params.L, params.delta if delta is None else float(delta))

    @property
    def dx(self):
        return self.L / self.n_x

    @property
    def dtheta(self):
        return 2.0 * math.pi / self.n_theta

    @property
    def x(self):
        return (np.arange(self.n_x) + 0.5) * self.dx

    @property
    def faces(self):
        return np.arange(self.n_x + 1) * self.dx

    @property
    def theta(self):
        return (np.arange(self.n_theta) + 0.5) * self.dtheta

    def refined(self, factor=2):
        return Grid(self.n_x * factor, self.n_theta * factor, self.L, self.delta)


@dataclass
class DiscreteField:
    """Converged nodal values ``g[i, j]`` at ``(x_i, theta_j)`` plus solve metadata."""

    grid: Grid
    values: np.ndarray
    rho1: float
    rho2: float
    kind: str
    coefficient: float = float("nan")
    info: dict = field(default_factory=dict)

    @property
    def rho(self):
        """Density: angular mean under the normalized uniform measure."""
        return self.values.mean(axis=1)

    @property
    def flux(self):
        """``delta^-1 <cos theta g>`` at the cell centres."""
        return _cos_moment(self.values, self.grid) / self.grid.delta

    @property
    def face_flux(self):
        """Flux through the cell faces from the upwind face values (exactly conserved)."""
        faces = _upwind_faces(self.values, self.grid, self.rho1, self.rho2)
        return _cos_moment(faces, self.grid) / self.grid.delta

    def value_at(self, x1, theta):
        """Linear in ``x1`` between centres, periodic cubic in ``theta``."""
        g = self.grid
        col = np.array([np.interp(x1, g.x, self.values[:, j]) for j in range(g.n_theta)])
        th = np.concatenate([g.theta, [g.theta[0] + 2.0 * math.pi]])
        spline = CubicSpline(th, np.concatenate([col, col[:1]]), bc_type="periodic")
        return float(spline(np.mod(theta - g.theta[0], 2.0 * math.pi) + g.theta[0]))

    def to_csv(self, path):
        g = self.grid
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "theta", "g"])
            for i, x in enumerate(g.x):
                for j, th in enumerate(g.theta):
                    w.writerow([repr(float(x)), repr(float(th)), repr(float(self.values[i, j]))])

    def profile_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "rho", "J"])
            for x, r, j in zip(self.grid.x, self.rho, self.flux):
                w.writerow([repr(float(x)), repr(float(r)), repr(float(j))])

    def history_json(self, path):
        with open(path, "w") as fh:
            json.dump(_jsonable(self.info), fh, indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


# ---------------------------------------------------------------- operators

def landau_operator(grid: Grid, coefficient):
    """``K = -delta^-1 coef d^2/dtheta^2`` (periodic three-point), sparse."""
    n = grid.n_theta
    k = coefficient / grid.delta / grid.dtheta ** 2
    main = np.full(n, 2.0 * k)
    off = np.full(n, -k)
    K = sp.diags([main, off[:-1], off[:-1]], [0, 1, -1], shape=(n, n), format="lil")
    K[0, n - 1] += -k
    K[n - 1, 0] += -k
    return K.tocsr()


def _rho_nodes(table: ScatteringTable, n_rho=None):
    """Gauss nodes and weights on ``[0, 1]``: two per table interval, or ``n_rho`` uniform panels."""
    if table.kind == "hard_disk" or n_rho is not None:
        m = n_rho or 512
        knots = np.linspace(0.0, 1.0, m // 2 + 1)
    else:
        knots = np.asarray(table.half_grid, dtype=float)
    a, b = knots[:-1], knots[1:]
    gx, gw = np.polynomial.legendre.leggauss(2)
    nodes = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * gx[None, :]
    weights = (0.5 * (b - a))[:, None] * gw[None, :]
    return nodes.ravel(), weights.ravel()


def _circulant_row(n, dtheta, shifts, weights, interp):
    row = np.zeros(n)
    s = shifts / dtheta
    base = np.floor(s).astype(np.int64)
    f = s - base
    if interp == "cubic":
        lw = (
            -f * (f - 1.0) * (f - 2.0) / 6.0,
            (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
            -(f + 1.0) * f * (f - 2.0) / 2.0,
            (f + 1.0) * f * (f - 1.0) / 6.0,
        )
        offsets = (-1, 0, 1, 2)
    elif interp == "linear":
        lw = (1.0 - f, f)
        offsets = (0, 1)
    else:
        raise ValueError("interp must be 'cubic' or 'linear'")
    for off, l in zip(offsets, lw):
        np.add.at(row, np.mod(base + off, n), weights * l)
    return row


def _cos_moment(values, grid: Grid):
    # theta and theta + pi paired, so an isotropic row gives exactly zero
    h = grid.n_theta // 2
    c = np.cos(grid.theta[:h])
    return ((values[:, :h] - values[:, h:]) * c).sum(axis=1) / grid.n_theta


def boltzmann_operator(grid: Grid, table: ScatteringTable, mu, n_rho=None, interp="linear"):
    """Dense ``K = -delta^-1 eps^-2alpha mu int drho [g(theta + theta_eps(rho)) - g(theta)]``.

    The rotated value is interpolated periodically on the angle grid; the
    loss term uses the exact weight sum, so constants are annihilated.
    """
    n = grid.n_theta
    nodes, w = _rho_nodes(table, n_rho)
    ang = np.asarray(table(nodes), dtype=float)
    # rho and -rho with the odd deflection
    shifts = np.concatenate([ang, -ang])
    weights = np.concatenate([w, w])
    row = _circulant_row(n, grid.dtheta, shifts, weights, interp)
    rate = mu * table.epsilon ** (-2.0 * table.alpha) / grid.delta
    idx = np.arange(n)
    off = row.copy()
    off[0] = 0.0
    K = -rate * off[np.mod(idx[None, :] - idx[:, None], n)]
    K[idx, idx] = rate * off.sum()
    return K


def _transport_parts(grid: Grid):
    c = np.cos(grid.theta)
    h = grid.dx
    return np.abs(c) / h, np.where(c > 0, c, 0.0) / h, np.where(c < 0, -c, 0.0) / h


def _inflow(grid: Grid, rho1, rho2):
    diag, lo, up = _transport_parts(grid)
    b = np.zeros((grid.n_x, grid.n_theta))
    b[0] += lo * rho1
    b[-1] += up * rho2
    return b


def _apply(K, g, grid):
    """``A g`` for the interior operator (no boundary data)."""
    diag, lo, up = _transport_parts(grid)
    out = g * diag
    out[1:] -= g[:-1] * lo
    out[:-1] -= g[1:] * up
    if sp.issparse(K):
        out += (K @ g.T).T
    else:
        out += g @ K.T
    return out


def _upwind_faces(g, grid, rho1, rho2):
    c = np.cos(grid.theta)
    pos = c > 0
    faces = np.empty((grid.n_x + 1, grid.n_theta))
    faces[1:, pos] = g[:, pos]
    faces[0, pos] = rho1
    faces[:-1, ~pos] = g[:, ~pos]
    faces[-1, ~pos] = rho2
    return faces


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _muscl_faces(g, grid, rho1, rho2):
    """Limited second-order upwind face values (first order at outflow cells)."""
    c = np.cos(grid.theta)
    pos = c > 0
    ext = np.empty((grid.n_x + 2, grid.n_theta))
    ext[1:-1] = g
    ext[0] = 2.0 * rho1 - g[0]
    ext[-1] = 2.0 * rho2 - g[-1]
    dl = ext[1:-1] - ext[:-2]
    dr = ext[2:] - ext[1:-1]
    slope = _minmod(dl, dr)
    slope[-1, pos] = 0.0
    slope[0, ~pos] = 0.0
    faces = np.empty((grid.n_x + 1, grid.n_theta))
    faces[1:, pos] = (g + 0.5 * slope)[:, pos]
    faces[0, pos] = rho1
    faces[:-1, ~pos] = (g - 0.5 * slope)[:, ~pos]
    faces[-1, ~pos] = rho2
    return faces


def _transport_from_faces(faces, grid):
    c = np.cos(grid.theta)
    return c * (faces[1:] - faces[:-1]) / grid.dx


# ------------------------------------------------------------------ solvers

class _SparseFactor:
    def __init__(self, K, grid, shift=0.0):
        n, m = grid.n_x, grid.n_theta
        diag, lo, up = _transport_parts(grid)
        T = (
            sp.kron(sp.eye(n), sp.diags(diag + shift))
            - sp.kron(sp.eye(n, k=-1), sp.diags(lo))
            - sp.kron(sp.eye(n, k=1), sp.diags(up))
        )
        A = (T + sp.kron(sp.eye(n), sp.csr_matrix(K))).tocsc()
        self._lu = spl.splu(A)
        self.shape = (n, m)

    def solve(self, rhs):
        return self._lu.solve(rhs.ravel()).reshape(self.shape)


class _BlockFactor:
    """Block-tridiagonal elimination along ``x1`` with dense angular blocks."""

    MAX_BYTES = 2 * 1024 ** 3

    def __init__(self, K, grid, shift=0.0):
        n, m = grid.n_x, grid.n_theta
        if n * m * m * 8 > self.MAX_BYTES:
            raise MemoryError(f"dense angular blocks need {n * m * m * 8 / 1e9:.1f} GB; reduce the grid")
        diag, lo, up = _transport_parts(grid)
        base = np.asarray(K, dtype=float) + np.diag(diag + shift)
        self.lo, self.up = lo, up
        self.factors = []
        prev = None
        for i in range(n):
            M = base.copy()
            if prev is not None:
                # M_i = A - Lo * M_{i-1}^{-1} * Up
                E = sla.lu_solve(prev, np.diag(up))
                M -= lo[:, None] * E
            prev = sla.lu_factor(M, check_finite=False)
            self.factors.append(prev)

    def solve(self, rhs):
        n = len(self.factors)
        y = np.empty_like(rhs)
        for i in range(n):
            r = rhs[i] if i == 0 else rhs[i] + self.lo * y[i - 1]
            y[i] = sla.lu_solve(self.factors[i], r, check_finite=False)
        g = np.empty_like(rhs)
        g[-1] = y[-1]
        for i in range(n - 2, -1, -1):
            g[i] = y[i] + sla.lu_solve(self.factors[i], self.up * g[i + 1], check_finite=False)
        return g


def _factor(K, grid, shift=0.0):
    if sp.issparse(K):
        return _SparseFactor(K, grid, shift)
    return _BlockFactor(K, grid, shift)


def _scaled_residual(K, g, b, grid):
    diag, _, _ = _transport_parts(grid)
    kd = K.diagonal() if sp.issparse(K) else np.diag(K)
    r = b - _apply(K, g, grid)
    return float(np.max(np.abs(r) / (diag + kd)[None, :]))


@njit(parallel=True)
def _sweep(mu, h, sig, src, rho1, rho2):
    """Exact upwind transport sweep per angle with a given source."""
    nx, nt = src.shape
    g = np.empty_like(src)
    for j in prange(nt):
        a = abs(mu[j]) / h
        d = a + sig[j]
        if mu[j] > 0:
            prev = rho1
            for i in range(nx):
                prev = (a * prev + src[i, j]) / d
                g[i, j] = prev
        else:
            prev = rho2
            for i in range(nx - 1, -1, -1):
                prev = (a * prev + src[i, j]) / d
                g[i, j] = prev
    return g


def _source_iteration(K, grid, rho1, rho2, damping, max_iter, scheme):
    mu = np.cos(grid.theta)
    kd = np.asarray(K.diagonal() if sp.issparse(K) else np.diag(K), dtype=float)
    Koff = K - sp.diags(kd) if sp.issparse(K) else K - np.diag(kd)
    g = np.full((grid.n_x, grid.n_theta), 0.5 * (rho1 + rho2))
    b = _inflow(grid, rho1, rho2)
    history = []
    for it in range(1, max_iter + 1):
        coll = (Koff @ g.T).T if sp.issparse(Koff) else g @ Koff.T
        src = -coll
        if scheme == "muscl":
            src = src - _high_order_correction(g, grid, rho1, rho2)
        new = _sweep(mu, grid.dx, kd, np.ascontiguousarray(src), float(rho1), float(rho2))
        inc = float(np.max(np.abs(new - g)))
        g = damping * new + (1.0 - damping) * g
        res = _scaled_residual(K, g, b - (_high_order_correction(g, grid, rho1, rho2) if scheme == "muscl" else 0.0), grid)
        history.append({"iteration": it, "increment": inc, "residual": res})
        if res < RESIDUAL_TOL or inc < INCREMENT_TOL:
            return g, history
    raise GridSolveError(f"source iteration did not converge in {max_iter} iterations", history)


def _high_order_correction(g, grid, rho1, rho2):
    t2 = _transport_from_faces(_muscl_faces(g, grid, rho1, rho2), grid)
    t1 = _transport_from_faces(_upwind_faces(g, grid, rho1, rho2), grid)
    return t2 - t1


def _solve(K, grid, rho1, rho2, method, scheme, damping, max_iter):
    b = _inflow(grid, rho1, rho2)
    if rho1 == rho2:
        # constants are an exact discrete solution
        g = np.full((grid.n_x, grid.n_theta), float(rho1))
        return g, [{"iteration": 0, "residual": _scaled_residual(K, g, b, grid)}]
    if scheme not in ("upwind", "muscl"):
        raise ValueError("scheme must be 'upwind' or 'muscl'")
    if method == "source_iteration":
        return _source_iteration(K, grid, rho1, rho2, damping, max_iter, scheme)
    if method != "direct":
        raise ValueError("method must be 'direct' or 'source_iteration'")
    fac = _factor(K, grid)
    g = fac.solve(b)
    history = [{"iteration": 1, "residual": _scaled_residual(K, g, b, grid)}]
    if scheme == "muscl":
        # deferred correction: A_1 g_{k+1} = b - (T_2 - T_1) g_k
        for it in range(2, max_iter + 2):
            new = fac.solve(b - _high_order_correction(g, grid, rho1, rho2))
            inc = float(np.max(np.abs(new - g)))
            g = new
            res = _scaled_residual(K, g, b - _high_order_correction(g, grid, rho1, rho2), grid)
            history.append({"iteration": it, "increment": inc, "residual": res})
            if res < RESIDUAL_TOL or inc < INCREMENT_TOL:
                break
        else:
            raise GridSolveError("deferred correction did not converge", history)
    elif history[-1]["residual"] > RESIDUAL_TOL * max(1.0, abs(rho1), abs(rho2)):
        raise GridSolveError("direct solve left a large residual", history)
    return g, history


def _finish(grid, g, params, kind, coef, history, method, scheme, extra=None):
    lo, hi = min(params.rho1, params.rho2), max(params.rho1, params.rho2)
    info = {
        "method": method,
        "scheme": scheme,
        "history": history,
        "residual": history[-1]["residual"],
        "min": float(g.min()),
        "max": float(g.max()),
        "maximum_principle": bool(g.min() >= lo - 1e-10 and g.max() <= hi + 1e-10),
    }
    if extra:
        info.update(extra)
    return DiscreteField(grid, g, params.rho1, params.rho2, kind, float(coef), info)


def solve_landau(params: KineticParams, grid: Grid, gen_coefficient, method="direct", scheme="upwind",
                 damping=1.0, max_iter=20000) -> DiscreteField:
    """Solve ``cos theta d_x g = delta^-1 coef d_theta^2 g`` with reservoir inflow data."""
    if not gen_coefficient > 0:
        raise ValueError("gen_coefficient must be > 0")
    K = landau_operator(grid, gen_coefficient)
    g, hist = _solve(K, grid, params.rho1, params.rho2, method, scheme, damping, max_iter)
    return _finish(grid, g, params, "landau", gen_coefficient, hist, method, scheme)


def solve_boltzmann(params: KineticParams, grid: Grid, table: ScatteringTable, method="direct",
                    scheme="upwind", damping=1.0, max_iter=20000, n_rho=None, interp="linear") -> DiscreteField:
    """Solve the linear Boltzmann problem with the tabulated deflection."""
    if table.kind != "hard_disk" and table.n_points < grid.n_theta // 4:
        raise ValueError("scattering table is coarser than the angular grid")
    K = boltzmann_operator(grid, table, params.mu, n_rho, interp)
    g, hist = _solve(K, grid, params.rho1, params.rho2, method, scheme, damping, max_iter)
    rate = params.mu * table.epsilon ** (-2.0 * table.alpha) / grid.delta
    return _finish(grid, g, params, "boltzmann", rate, hist, method, scheme, {"interp": interp})


# ------------------------------------------------------------ diagnostics

def neumann_iterate(problem, t0, n_terms=200, n_steps=64, tol=1e-13):
    """Stationary field as the series ``sum_n G(t0)^n g_out(t0)``.

    ``problem`` is ``(params, grid, K)`` or a dict with those keys, ``K``
    from :func:`landau_operator` or :func:`boltzmann_operator`.  Evolution
    over ``t0`` uses ``n_steps`` implicit Euler steps of the time-dependent
    problem; ``g_out`` starts from zero with the reservoirs switched on and
    ``G`` propagates interior data with the reservoirs switched off.  The
    series' fixed point is therefore exactly the stationary discrete field.
    """
    if isinstance(problem, dict):
        params, grid, K = problem["params"], problem["grid"], problem["K"]
    else:
        params, grid, K = problem
    if not t0 > 0:
        raise ValueError("t0 must be > 0")
    dt = t0 / n_steps
    fac = _factor(K, grid, shift=1.0 / dt)
    b = _inflow(grid, params.rho1, params.rho2)

    def evolve(g, source):
        for _ in range(n_steps):
            g = fac.solve(g / dt + source)
        return g

    zero = np.zeros_like(b)
    term = evolve(zero, b)
    total = term.copy()
    norms = [float(np.max(np.abs(term)))]
    ratios = []
    above = 0
    for _ in range(1, n_terms):
        if norms[-1] == 0.0 or norms[-1] <= tol * max(1.0, float(np.max(np.abs(total)))):
            break
        term = evolve(term, zero)
        total += term
        norms.append(float(np.max(np.abs(term))))
        ratios.append(norms[-1] / norms[-2])
        above = above + 1 if ratios[-1] >= 1.0 else 0
        if above >= 3:
            raise NeumannDivergence("term ratios stayed >= 1", ratios)
    field_ = DiscreteField(
        grid, total, params.rho1, params.rho2, "neumann", float("nan"),
        {"t0": t0, "n_steps": n_steps, "term_norms": norms, "ratios": ratios,
         "residual": _scaled_residual(K, total, b, grid)},
    )
    return {"field": field_, "contraction_estimates": ratios, "term_norms": norms}


def hilbert_residual(field: DiscreteField, params: KineticParams, grid: Grid):
    """Split ``g = rho(x) + delta a(x) cos theta + remainder`` by angular projection.

    ``remainder_norm`` is the L2 norm over ``(0, L) x S1`` with the
    normalized angle measure; ``remainder_norm_scaled`` divides it by
    ``delta``.  ``a_expected`` is ``-(rho2 - rho1) / (coef L)`` for a Landau
    field with coefficient ``coef``.
    """
    g = field.values
    th = grid.theta
    rho = g.mean(axis=1)
    a = 2.0 * _cos_moment(g, grid) / grid.delta
    rem = g - rho[:, None] - grid.delta * a[:, None] * np.cos(th)[None, :]
    norm = float(math.sqrt(np.mean(rem ** 2) * grid.L))
    coef = field.coefficient
    expected = -(params.rho2 - params.rho1) / (coef * params.L) if coef == coef and coef > 0 else float("nan")
    inner = (grid.x > 0.25 * grid.L) & (grid.x < 0.75 * grid.L)
    am = float(a[inner].mean())
    flat = float(np.max(np.abs(a[inner] - am)) / abs(am)) if am != 0 else 0.0
    return {
        "x1": grid.x,
        "g1_profile": a,
        "a_mean": am,
        "a_expected": expected,
        "a_flatness": flat,
        "remainder_norm": norm,
        "remainder_norm_scaled": norm / grid.delta,
    }


def _coarsen(v, factor):
    return v.reshape(-1, factor).mean(axis=1)


def grid_convergence(solver, grid: Grid, levels=3, factor=2):
    """Richardson check of the density profile under uniform refinement.

    ``solver(grid)`` returns a :class:`DiscreteField`.  Profiles are compared
    on the coarse cells (fine values averaged); returns the observed order
    and an error estimate for the finest level.
    """
    grids = [grid]
    for _ in range(levels - 1):
        grids.append(grids[-1].refined(factor))
    fields = [solver(g) for g in grids]
    profs = [_coarsen(f.rho, factor ** k) for k, f in enumerate(fields)]
    diffs = [float(np.max(np.abs(profs[k + 1] - profs[k]))) for k in range(levels - 1)]
    order = float("nan")
    estimate = float("nan")
    if levels >= 3 and diffs[-1] > 0 and diffs[-2] > 0:
        order = math.log(diffs[-2] / diffs[-1]) / math.log(factor)
        estimate = diffs[-1] / (factor ** order - 1.0) if order > 0 else float("inf")
    return {"grids": [(g.n_x, g.n_theta) for g in grids], "differences": diffs,
            "order": order, "error_estimate": estimate, "fields": fields}
