"""Monte Carlo samplers for the linear Boltzmann and linear Landau descriptions.

Stationary values are estimated by following the velocity-reversed process
backward from ``(x, theta)`` until it leaves the slab and recording the
reservoir it leaves through.  A backward path is simulated as a forward path
started at ``theta + pi``; leaving through ``x1 = 0`` picks up ``rho1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kinetic_kernels as KK
from ._accel import set_workers
from .estimates import ExitRecord, MCEstimate, exit_record, summarize
from .params import KineticParams
from .scattering import ScatteringTable, landau_coefficient_B, landau_limit_B

__all__ = [
    "KineticState",
    "GeneratorSpec",
    "StepSizeError",
    "boltzmann_exit_sample",
    "landau_exit_sample",
    "stationary_estimate_kinetic",
    "survival_fraction",
    "max_landau_dt",
]

MAX_ANGLE_STEP = 0.1
MAX_RENEWALS = 10


class StepSizeError(ValueError):
    """Landau time step too large for the angular increment bound."""


@dataclass(frozen=True)
class KineticState:
    x: tuple
    theta: float
    t: float = 0.0

    @property
    def v(self):
        return (math.cos(self.theta), math.sin(self.theta))


@dataclass(frozen=True)
class GeneratorSpec:
    """Collision generator of a kinetic level.

    ``rate`` is the total jump rate (Boltzmann); ``diffusion`` the
    coefficient in front of the angular Laplacian (Landau).  Both already
    refer to the slow time; ``time_scale`` multiplies ``diffusion`` to give
    the angular diffusivity of the sampled process.
    """

    kind: str
    rate: float = 0.0
    diffusion: float = 0.0
    time_scale: float = 1.0
    source: str = ""

    def __post_init__(self):
        if self.kind not in ("boltzmann", "landau"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.kind == "boltzmann" and self.rate < 0:
            raise ValueError("rate must be >= 0")
        if self.kind == "landau" and self.diffusion < 0:
            raise ValueError("diffusion must be >= 0")

    @classmethod
    def boltzmann(cls, params: KineticParams):
        return cls("boltzmann", rate=params.jump_rate, time_scale=params.time_scale, source="rate")

    @classmethod
    def landau(cls, params: KineticParams, coefficient="table", table=None, pot=None):
        """Landau generator with coefficient ``table`` (B from the table),
        ``limit`` (B in the grazing limit), ``mu_half`` or an explicit number."""
        if isinstance(coefficient, (int, float)):
            coef, src = float(coefficient), "explicit"
        elif coefficient == "mu_half":
            coef, src = 0.5 * params.mu, "mu_half"
        elif coefficient == "table":
            if table is None:
                raise ValueError("coefficient 'table' needs a ScatteringTable")
            coef, src = landau_coefficient_B(table, params.mu), "table"
        elif coefficient == "limit":
            if pot is None:
                raise ValueError("coefficient 'limit' needs a potential")
            coef, src = landau_limit_B(pot, params.mu), "limit"
        else:
            raise ValueError(f"unknown coefficient source {coefficient!r}")
        return cls("landau", diffusion=coef, time_scale=params.time_scale, source=src)

    @property
    def kappa(self):
        """Angular diffusivity: variance of the angle grows as ``2 kappa t``."""
        return self.diffusion * self.time_scale


def max_landau_dt(gen: GeneratorSpec, max_step=MAX_ANGLE_STEP):
    if gen.kappa <= 0:
        return math.inf
    return max_step ** 2 / (2.0 * gen.kappa)


def _check_dt(gen, dt):
    if not dt > 0:
        raise StepSizeError("dt must be > 0")
    if dt > max_landau_dt(gen) * (1 + 1e-12):
        raise StepSizeError(
            f"dt={dt} gives angular step {math.sqrt(2 * gen.kappa * dt):.3g} rad > {MAX_ANGLE_STEP}"
        )


def default_dt(gen: GeneratorSpec, max_step=0.05):
    dt = max_landau_dt(gen, max_step)
    return 0.01 if math.isinf(dt) else dt


def _seed64(seed):
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


def _exit_from(status, t, x1, th_backward, params, t_cap):
    th = th_backward - math.pi
    return exit_record(int(status), t, params, t_cap, (float(x1),), (math.cos(th), math.sin(th)))


def boltzmann_exit_sample(x, theta, params: KineticParams, table: ScatteringTable, t_cap, rng=0,
                          renewals=MAX_RENEWALS) -> ExitRecord:
    """One backward path of the jump process; ``rng`` is an integer seed."""
    kind, bx, coef = table.kernel_arrays()
    r = KK.boltzmann_batch(float(x[0]), float(theta) + math.pi, 1, _seed64(rng), params.L,
                           params.jump_rate, kind, bx, coef, (renewals + 1) * t_cap, True)
    return _exit_from(r[0][0], r[1][0], r[2][0], r[3][0], params, t_cap)


def landau_exit_sample(x, theta, params: KineticParams, gen: GeneratorSpec, dt, t_cap, rng=0,
                       renewals=MAX_RENEWALS) -> ExitRecord:
    _check_dt(gen, dt)
    r = KK.landau_batch(float(x[0]), float(theta) + math.pi, 1, _seed64(rng), params.L,
                        gen.kappa, float(dt), (renewals + 1) * t_cap, True)
    return _exit_from(r[0][0], r[1][0], r[2][0], r[3][0], params, t_cap)


def default_t_cap(params: KineticParams):
    return 10.0 * params.time_scale * params.L


def stationary_estimate_kinetic(kind, x, theta, params: KineticParams, n_samples, t_cap=None,
                                seed=0, table=None, gen=None, dt=None, workers=None,
                                renewals=MAX_RENEWALS) -> MCEstimate:
    """Stationary value at ``(x, theta)`` from ``n_samples`` backward paths.

    ``kind`` is ``boltzmann`` (needs ``table``) or ``landau`` (needs ``gen``;
    ``dt`` defaults to an angular step of 0.05 rad).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    t_cap = default_t_cap(params) if t_cap is None else float(t_cap)
    set_workers(workers)
    x1 = float(x[0])
    th = float(theta) + math.pi
    horizon = (renewals + 1) * t_cap
    if kind == "boltzmann":
        if table is None:
            raise ValueError("boltzmann estimates need a scattering table")
        tk, bx, coef = table.kernel_arrays()
        status, times, *_ = KK.boltzmann_batch(x1, th, int(n_samples), _seed64(seed), params.L,
                                               params.jump_rate, tk, bx, coef, horizon, True)
    elif kind == "landau":
        if gen is None:
            raise ValueError("landau estimates need a GeneratorSpec")
        dt = default_dt(gen) if dt is None else float(dt)
        _check_dt(gen, dt)
        status, times, *_ = KK.landau_batch(x1, th, int(n_samples), _seed64(seed), params.L,
                                            gen.kappa, dt, horizon, True)
    else:
        raise ValueError(f"unknown kinetic level {kind!r}")
    v = (math.cos(theta), math.sin(theta))
    return summarize(kind, x, v, status, times, params, t_cap)


def survival_fraction(kind, params: KineticParams, t_horizon, n_samples, seed=0, table=None,
                      gen=None, dt=None, start=None, workers=None):
    """Fraction of backward paths still inside the slab at ``t_horizon``.

    Paths start at ``x1`` uniform on ``start = (x_lo, x_hi)`` (default the
    mid-slab point) with a uniform velocity angle.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    if t_horizon < 0:
        raise ValueError("t_horizon must be >= 0")
    if t_horizon == 0:
        return 1.0
    set_workers(workers)
    x_lo, x_hi = start if start is not None else (0.5 * params.L, 0.5 * params.L)
    tk, bx, coef = (table.kernel_arrays() if table is not None else (0, np.zeros(2), np.zeros((4, 1))))
    if kind == "boltzmann":
        if table is None:
            raise ValueError("boltzmann survival needs a scattering table")
        code, kappa, dt = 0, 0.0, 1.0
    elif kind == "landau":
        if gen is None:
            raise ValueError("landau survival needs a GeneratorSpec")
        code, kappa = 1, gen.kappa
        dt = default_dt(gen) if dt is None else float(dt)
        _check_dt(gen, dt)
    else:
        raise ValueError(f"unknown kinetic level {kind!r}")
    alive = KK.survival_batch(code, int(n_samples), _seed64(seed), float(x_lo), float(x_hi), params.L,
                              params.jump_rate, tk, bx, coef, kappa, dt, float(t_horizon))
    return float(alive.mean())
