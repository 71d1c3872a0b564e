"""Classical scattering of a unit-speed particle by one rescaled radial bump.

A scatterer of radius ``eps`` carries the potential ``coupling * phi(|x|/eps)``
with ``coupling = eps**alpha``.  Because the orbit of a unit-speed particle
in ``coupling * phi(r / eps)`` is the orbit in ``coupling * phi(r)`` scaled by
``eps``, every deflection here is computed in units of the scatterer radius.

Sign convention: the impact parameter is ``b = v x (x - c)`` (z component of
the cross product of the incoming direction with the offset from the
centre), and a positive ``b`` rotates the velocity counterclockwise.  Both
the kinetic samplers and the grid solver rely on it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

__all__ = [
    "DomainError",
    "RadialPotential",
    "ScatteringTable",
    "AngleBoundReport",
    "deflection_angle",
    "hard_disk_deflection",
    "reflect",
    "build_table",
    "landau_coefficient_B",
    "landau_limit_B",
    "born_limit_B_quartic",
    "verify_angle_bound",
]

# profile codes understood by the jitted kernels
PROFILE_POLY = 0
PROFILE_COS2 = 1
PROFILE_ZERO = 2


class DomainError(ValueError):
    """Argument outside the domain of a scattering operation."""


@dataclass(frozen=True)
class RadialPotential:
    """Radial profile ``phi`` on ``[0, 1]``, extended by zero outside.

    Supported families:

    ``poly``
        ``height * (1 - r**2)**exponent`` with integer ``exponent >= 2``;
        ``exponent = 2`` is the canonical profile.
    ``cos2``
        ``height * cos(pi r / 2)**2``.
    ``zero``
        identically zero, for collisionless reference runs.
    """

    profile: str = "poly"
    height: float = 1.0
    exponent: int = 2

    def __post_init__(self):
        if self.profile not in ("poly", "cos2", "zero"):
            raise ValueError(f"unknown potential profile {self.profile!r}")
        if self.profile == "zero":
            return
        if not self.height > 0:
            raise ValueError("potential height must be > 0")
        if self.profile == "poly" and (int(self.exponent) != self.exponent or self.exponent < 2):
            raise ValueError("poly exponent must be an integer >= 2 (phi'(1) = 0)")

    @classmethod
    def quartic(cls, height=1.0):
        """The canonical ``height * (1 - r^2)^2``."""
        return cls("poly", float(height), 2)

    @classmethod
    def zero(cls):
        return cls("zero", 0.0, 2)

    @classmethod
    def from_spec(cls, spec):
        """Build from a config mapping ``{name, height, exponent}``."""
        spec = dict(spec)
        name = spec.pop("name", "poly")
        if name == "quartic":
            name = "poly"
            spec.setdefault("exponent", 2)
        return cls(name, float(spec.get("height", 1.0)), int(spec.get("exponent", 2)))

    def to_spec(self):
        return {"name": self.profile, "height": self.height, "exponent": self.exponent}

    @property
    def is_null(self):
        return self.profile == "zero"

    @property
    def code(self):
        return {"poly": PROFILE_POLY, "cos2": PROFILE_COS2, "zero": PROFILE_ZERO}[self.profile]

    def value(self, r):
        r = np.asarray(r, dtype=float)
        inside = r < 1.0
        if self.profile == "poly":
            out = self.height * np.clip(1.0 - r * r, 0.0, None) ** self.exponent
        elif self.profile == "cos2":
            out = self.height * np.cos(0.5 * np.pi * np.minimum(r, 1.0)) ** 2
        else:
            out = np.zeros_like(r)
        return np.where(inside, out, 0.0)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        inside = r < 1.0
        if self.profile == "poly":
            k = self.exponent
            w = np.clip(1.0 - r * r, 0.0, None)
            out = -2.0 * k * self.height * r * w ** (k - 1)
        elif self.profile == "cos2":
            out = -0.5 * np.pi * self.height * np.sin(np.pi * np.minimum(r, 1.0))
        else:
            out = np.zeros_like(r)
        return np.where(inside, out, 0.0)

    def drop_ratio(self, r0, d):
        """``(phi(r0) - phi(r0 + d)) / ((r0 + d)^2 - r0^2)`` without cancellation, ``r0 + d <= 1``."""
        d = np.asarray(d, dtype=float)
        r1 = r0 + d
        if self.profile == "poly":
            # a0^k - a1^k = (a0 - a1) sum a0^j a1^(k-1-j) with a0 - a1 = r1^2 - r0^2
            a0 = 1.0 - r0 * r0
            a1 = np.clip(1.0 - r1 * r1, 0.0, None)
            acc = np.zeros_like(d)
            for j in range(self.exponent):
                acc = acc + a0 ** j * a1 ** (self.exponent - 1 - j)
            return self.height * acc
        if self.profile == "cos2":
            # cos^2 x - cos^2 y = sin(y - x) sin(y + x)
            num = np.sin(0.5 * np.pi * d) * np.sin(0.5 * np.pi * (r0 + r1))
            den = d * (r0 + r1)
            safe = np.where(den > 0, den, 1.0)
            lim = 0.5 * np.pi * np.sin(np.pi * r0) / (2.0 * r0) if r0 > 0 else 0.25 * np.pi ** 2
            return self.height * np.where(den > 0, num / safe, lim)
        return np.zeros_like(d)

    @cached_property
    def sup_r_dphi(self):
        """``sup_{r in [0,1]} |r phi'(r)|``, the constant in the angle bound."""
        if self.is_null:
            return 0.0
        r = np.linspace(0.0, 1.0, 20001)
        return float(np.max(np.abs(r * self.derivative(r))))

    def check(self, n=2001):
        """Sampled check of the profile hypotheses; raises ValueError on failure."""
        if self.is_null:
            return
        r = np.linspace(0.0, 1.0, n)
        if not self.value(0.0) > 0:
            raise ValueError("phi(0) must be positive")
        if np.any(self.derivative(r[1:-1]) >= 0):
            raise ValueError("phi must be strictly decreasing on (0, 1)")
        if abs(float(self.value(1.0))) > 1e-14 or abs(float(self.derivative(1.0))) > 1e-14:
            raise ValueError("phi(1) and phi'(1) must vanish")


def reflect(v, omega, tol=1e-12):
    """Specular reflection ``v - 2 (omega . v) omega`` of a unit vector."""
    v = np.asarray(v, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > tol or abs(np.linalg.norm(omega) - 1.0) > tol:
        raise DomainError("reflect expects unit vectors")
    return v - 2.0 * np.dot(omega, v) * omega


def hard_disk_deflection(b):
    """Signed deflection for specular reflection off the unit disk."""
    if abs(b) > 1.0:
        raise DomainError(f"impact parameter {b} outside [-1, 1]")
    if b == 0:
        return math.pi
    return math.copysign(math.pi - 2.0 * math.asin(abs(b)), b)


# Gauss-Legendre nodes on [0, 1], cached by order
_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss01(n):
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


def _turning_point(pot, coupling, b):
    """Distance of closest approach; root of ``1 - b^2/r^2 - 2 c phi(r)`` in ``(|b|, 1)``."""

    def radial(r):
        return 1.0 - (b * b) / (r * r) - 2.0 * coupling * float(pot.value(r))

    # radial(|b|) = -2 c phi(|b|) < 0 and radial(1) = 1 - b^2 > 0
    return brentq(radial, abs(b), 1.0, xtol=1e-15, rtol=1e-15, maxiter=500)


def _inner_integral(pot, coupling, b, r_min, n):
    # r = r_min + (1 - r_min) s^2 removes the inverse square root at r_min.
    # The radial function is written as (r - r_min)(r + r_min)[b^2/(r r_min)^2 + 2c Q]
    # with Q the divided difference of phi, which stays accurate when r_min -> 1.
    s, w = _gauss01(n)
    span = 1.0 - r_min
    d = span * s * s
    r = r_min + d
    bracket = (b * b) / (r * r * r_min * r_min) + 2.0 * coupling * pot.drop_ratio(r_min, d)
    integrand = 2.0 * math.sqrt(span) * abs(b) / (r * r * np.sqrt((r + r_min) * bracket))
    return float(np.dot(w, integrand))


def deflection_angle(pot, coupling, b, order=64, tol=1e-11):
    """Signed deflection of a unit-speed particle by ``coupling * phi``.

    Parameters
    ----------
    pot : RadialPotential
    coupling : float
        Strength multiplying ``phi`` (``eps**alpha`` in the scaled problem).
    b : float
        Impact parameter in units of the support radius, ``|b| <= 1``.
    order, tol
        Gauss-Legendre order of the turning-point quadrature; the order is
        doubled until two successive rules agree to ``tol``.

    Returns
    -------
    float
        Deflection in ``[-pi, pi]``; positive for counterclockwise rotation.

    Notes
    -----
    The potential is repulsive and monotone, so every orbit with ``b != 0``
    has exactly one turning point even when ``coupling * phi(0) >= 1/2``;
    in that case the head-on orbit is reflected and the deflection tends
    to ``pi`` as ``b -> 0``.
    """
    if abs(b) > 1.0:
        raise DomainError(f"impact parameter {b} outside [-1, 1]")
    if coupling < 0:
        raise DomainError("coupling must be non-negative")
    if coupling == 0 or pot.is_null or abs(b) == 1.0:
        return 0.0
    if b == 0:
        return math.pi if coupling * float(pot.value(0.0)) >= 0.5 else 0.0

    r_min = _turning_point(pot, coupling, b)
    prev = _inner_integral(pot, coupling, b, r_min, order)
    n = order
    while True:
        n *= 2
        cur = _inner_integral(pot, coupling, b, r_min, n)
        if abs(cur - prev) <= tol or n >= 1024:
            break
        prev = cur
    # apsidal angle = asin|b| (outside the support) + inner integral
    chi = math.pi - 2.0 * (math.asin(abs(b)) + cur)
    return math.copysign(chi, b)


@dataclass(frozen=True)
class ScatteringTable:
    """Tabulated deflection ``theta_eps(rho)`` on a symmetric impact grid.

    The angle is odd in the impact parameter, so only ``[0, 1]`` is
    interpolated (monotone cubic, no overshoot); negative impact parameters
    use the mirror image.  ``angle`` at ``rho = 0`` holds the one-sided limit
    (``pi`` for reflecting head-on orbits).
    """

    epsilon: float
    alpha: float
    impact_grid: np.ndarray
    angle: np.ndarray
    potential: RadialPotential = field(default_factory=RadialPotential.zero)
    kind: str = "potential"

    @property
    def coupling(self):
        return self.epsilon ** self.alpha

    @property
    def half_grid(self):
        m = (len(self.impact_grid) - 1) // 2
        return self.impact_grid[m:]

    @property
    def half_angle(self):
        m = (len(self.angle) - 1) // 2
        return self.angle[m:]

    @property
    def n_points(self):
        return len(self.half_grid)

    @cached_property
    def _interp(self):
        return PchipInterpolator(self.half_grid, self.half_angle, extrapolate=False)

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "hard_disk":
            a = np.abs(rho)
            out = np.where(a > 0, np.pi - 2.0 * np.arcsin(np.minimum(a, 1.0)), np.pi)
            return np.sign(np.where(rho == 0, 1.0, rho)) * out
        a = np.abs(rho)
        val = np.where(a >= 1.0, 0.0, self._interp(np.minimum(a, 1.0)))
        return np.where(rho < 0, -val, val)

    def kernel_arrays(self):
        """``(kind_code, breakpoints, coefficients)`` for the jitted samplers.

        Coefficients follow scipy's ``PPoly`` layout, shape ``(4, m - 1)``.
        """
        if self.kind == "hard_disk":
            return 1, np.zeros(2), np.zeros((4, 1))
        pp = self._interp
        return 0, np.ascontiguousarray(pp.x), np.ascontiguousarray(pp.c)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["b", "theta"])
            for b, th in zip(self.impact_grid, self.angle):
                writer.writerow([repr(float(b)), repr(float(th))])

    @classmethod
    def hard_disk(cls, n_points=257):
        half = np.linspace(0.0, 1.0, n_points)
        ang = np.array([hard_disk_deflection(b) for b in half])
        grid = np.concatenate([-half[:0:-1], half])
        angle = np.concatenate([-ang[:0:-1], ang])
        return cls(1.0, 0.0, grid, angle, RadialPotential.zero(), kind="hard_disk")


def build_table(pot, epsilon, alpha, n_points=512):
    """Tabulate ``deflection_angle(pot, eps**alpha, .)`` on ``n_points`` nodes of ``[0, 1]``.

    The returned impact grid is the symmetric extension to ``[-1, 1]``
    (``2 * n_points - 1`` nodes).
    """
    if n_points < 16:
        raise ValueError("n_points must be >= 16")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    coupling = epsilon ** alpha
    half = np.linspace(0.0, 1.0, n_points)
    ang = np.empty(n_points)
    for i, b in enumerate(half):
        if i == 0 and not pot.is_null and coupling * float(pot.value(0.0)) >= 0.5:
            ang[i] = math.pi
        else:
            ang[i] = deflection_angle(pot, coupling, b)
    grid = np.concatenate([-half[:0:-1], half])
    angle = np.concatenate([-ang[:0:-1], ang])
    return ScatteringTable(float(epsilon), float(alpha), grid, angle, pot)


def _square_integral(table):
    """Exact integral of the squared monotone interpolant over ``[-1, 1]``."""
    if table.kind == "hard_disk":
        s, w = _gauss01(200)
        return 2.0 * float(np.dot(w, table(s) ** 2))
    pp = table._interp
    x = pp.x
    c = pp.c
    s, w = _gauss01(4)  # exact for the degree-6 square of a cubic
    total = 0.0
    for j in range(len(x) - 1):
        hj = x[j + 1] - x[j]
        t = s * hj
        val = ((c[0, j] * t + c[1, j]) * t + c[2, j]) * t + c[3, j]
        total += hj * float(np.dot(w, val * val))
    return 2.0 * total


def landau_coefficient_B(table, mu):
    """``(mu / 2) eps^(-2 alpha) * int_{-1}^{1} theta_eps(rho)^2 d rho`` on the table."""
    c = table.coupling
    if table.kind == "hard_disk":
        c = 1.0
    return 0.5 * mu * _square_integral(table) / (c * c)


def landau_limit_B(pot, mu, coupling=1e-3, n_points=512):
    """Grazing limit of :func:`landau_coefficient_B`.

    Uses one Richardson step between couplings ``c`` and ``c/2``; the
    remaining error is second order in the coupling.
    """
    if pot.is_null:
        return 0.0

    def b_at(c):
        # alpha = 1 makes eps equal to the coupling
        return landau_coefficient_B(build_table(pot, c, 1.0, n_points), mu)

    return 2.0 * b_at(0.5 * coupling) - b_at(coupling)


def born_limit_B_quartic(mu, height=1.0):
    """Closed-form grazing limit for ``height * (1 - r^2)^2``.

    First-order deflection is ``(16/3) h b (1 - b^2)^(3/2)``, whose square
    integrates to ``4096 h^2 / 2835`` after the ``mu / 2`` prefactor.
    """
    return 4096.0 / 2835.0 * mu * height * height


@dataclass(frozen=True)
class AngleBoundReport:
    lhs_max: float
    rhs: float
    c_tilde: float
    margin: float
    passed: bool
    fitted_exponent: float
    sweep_epsilon: tuple
    sweep_lhs: tuple

    def to_dict(self):
        return {
            "lhs_max": self.lhs_max,
            "rhs": self.rhs,
            "c_tilde": self.c_tilde,
            "margin": self.margin,
            "pass": self.passed,
            "fitted_exponent": self.fitted_exponent,
            "sweep_epsilon": list(self.sweep_epsilon),
            "sweep_lhs": list(self.sweep_lhs),
        }


def verify_angle_bound(table, pot, n_sweep=3):
    """Check ``max|theta_eps| <= pi eps^a sup|r phi'| + C eps^(2a)``.

    ``C`` is fitted on the sweep ``eps / 2, eps / 4, ...`` (``n_sweep``
    halvings) as the smallest non-negative constant for which the bound
    holds there, then the bound is evaluated at the table's own ``eps``.
    The log-log slope of ``max|theta|`` against ``eps`` over the table and
    the sweep is reported as ``fitted_exponent`` (``nan`` when the maximum
    vanishes).
    """
    eps0, alpha = table.epsilon, table.alpha
    sup_term = pot.sup_r_dphi
    lhs0 = float(np.max(np.abs(table.angle)))

    eps_list = [eps0 * 0.5 ** k for k in range(1, n_sweep + 1)]
    lhs_list = []
    c_tilde = 0.0
    for e in eps_list:
        tab = build_table(pot, e, alpha, table.n_points)
        lhs = float(np.max(np.abs(tab.angle)))
        lhs_list.append(lhs)
        c = e ** alpha
        c_tilde = max(c_tilde, (lhs - math.pi * c * sup_term) / (c * c))

    c0 = eps0 ** alpha
    rhs = math.pi * c0 * sup_term + c_tilde * c0 * c0
    all_eps = np.array([eps0] + eps_list)
    all_lhs = np.array([lhs0] + lhs_list)
    if np.all(all_lhs > 0):
        slope = float(np.polyfit(np.log(all_eps), np.log(all_lhs), 1)[0])
    else:
        slope = float("nan")
    return AngleBoundReport(
        lhs_max=lhs0,
        rhs=rhs,
        c_tilde=c_tilde,
        margin=rhs - lhs0,
        passed=bool(lhs0 <= rhs * (1.0 + 1e-12) + 1e-15),
        fitted_exponent=slope,
        sweep_epsilon=tuple(eps_list),
        sweep_lhs=tuple(lhs_list),
    )
