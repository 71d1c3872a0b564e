"""Newtonian motion of the light particle through the scatterer field.

Free flight between supports is exact (straight lines, ray/circle entry
times).  Inside supports the flow is integrated with a sixth-order symmetric
composition of the position-Verlet step; the force is only C^1 across a
support rim, so steps containing a rim crossing are cut there by bisection.
Backward motion is forward motion with the velocity reversed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _micro_kernels as K
from ._accel import set_workers
from .estimates import ExitRecord, MCEstimate, exit_record, summarize
from .medium import ObstacleField
from .params import KineticParams
from .scattering import RadialPotential

__all__ = [
    "ParticleState",
    "FixedObstacles",
    "StepFailure",
    "ExitRecord",
    "integrate",
    "backward_exit",
    "stationary_estimate_micro",
    "scatter_single",
    "default_t_cap",
    "dump_trajectory",
]

DEFAULT_H = 0.01
DEFAULT_H_MIN = 1e-6
MAX_RENEWALS = 10


class StepFailure(RuntimeError):
    def __init__(self, message, position):
        super().__init__(f"{message} at x={tuple(position)}")
        self.position = tuple(position)


@dataclass(frozen=True)
class ParticleState:
    x: tuple
    v: tuple
    t: float = 0.0

    @classmethod
    def at(cls, x, v, t=0.0):
        return cls((float(x[0]), float(x[1])), (float(v[0]), float(v[1])), float(t))

    @property
    def speed(self):
        return float(np.hypot(*self.v))

    def as_array(self):
        return np.array([*self.x, *self.v])


class FixedObstacles:
    """An explicit, finite list of centres (isolated-scatterer experiments).

    Only meaningful with small lists: every force evaluation loops over all
    of them.  The slab boundary is not enforced on the centres.
    """

    def __init__(self, params: KineticParams, centers):
        self.params = params
        self.centers = np.ascontiguousarray(np.atleast_2d(np.asarray(centers, dtype=float)).reshape(-1, 2))
        self.cell_size = 4.0 * params.epsilon
        self.seed = 0


def _kernel_args(field, pot):
    p = field.params
    explicit = isinstance(field, FixedObstacles)
    centers = field.centers if explicit else np.empty((0, 2))
    exponent = int(pot.exponent) if pot.profile == "poly" else 0
    return (
        np.uint64(field.seed), explicit, centers, p.epsilon, p.coupling,
        p.mu_eps, p.L, field.cell_size, pot.code, float(pot.height), exponent,
    )


def _run(state, field, t_end, stop, pot, h, h_min, n_rec=0):
    seed, explicit, centers, eps, c, mu_eps, L, cs, prof, ph, pk = _kernel_args(field, pot)
    rec = np.empty((n_rec, 5))
    out = K.trajectory(
        state.x[0], state.x[1], state.v[0], state.v[1], float(t_end), stop, seed,
        explicit, centers, eps, c, mu_eps, L, cs, prof, ph, pk, h, h_min, rec,
    )
    status = int(out[0])
    if status == K.STATUS_FAIL:
        raise StepFailure("integration step failed", out[1:3])
    return out, rec[: int(out[8])]


def integrate(state: ParticleState, field, dt_max, direction="forward", pot=None,
              h=DEFAULT_H, h_min=DEFAULT_H_MIN):
    """Advance ``state`` by ``dt_max`` along the flow (or its time reversal)."""
    if not dt_max > 0:
        raise ValueError("dt_max must be > 0")
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    pot = pot or RadialPotential.quartic()
    sign = 1.0 if direction == "forward" else -1.0
    start = ParticleState(state.x, (sign * state.v[0], sign * state.v[1]), state.t)
    out, _ = _run(start, field, dt_max, False, pot, h, h_min)
    return ParticleState((out[1], out[2]), (sign * out[3], sign * out[4]), state.t + sign * out[5])


def integrate_diagnostics(state, field, dt_max, pot=None, h=DEFAULT_H, h_min=DEFAULT_H_MIN):
    """Forward run returning ``(final_state, n_support_entries, max_energy_drift)``."""
    pot = pot or RadialPotential.quartic()
    out, _ = _run(state, field, dt_max, False, pot, h, h_min)
    final = ParticleState((out[1], out[2]), (out[3], out[4]), state.t + out[5])
    return final, int(out[6]), float(out[7])


def default_t_cap(params: KineticParams):
    return 10.0 * params.time_scale * params.L


def backward_exit(x, v, field, t_cap, pot=None, renewals=MAX_RENEWALS,
                  h=DEFAULT_H, h_min=DEFAULT_H_MIN) -> ExitRecord:
    """Follow the backward flow from ``(x, v)`` to the slab boundary.

    A path still inside after ``t_cap`` is continued for up to ``renewals``
    further horizons; only then is it reported as censored.
    """
    p = field.params
    if not (0.0 <= x[0] <= p.L):
        raise ValueError("x must lie in the closed slab")
    if abs(np.hypot(*v) - 1.0) > 1e-9:
        raise ValueError("|v| must be 1")
    if not t_cap > 0:
        raise ValueError("t_cap must be > 0")
    pot = pot or RadialPotential.quartic()
    start = ParticleState.at(x, (-v[0], -v[1]))
    out, _ = _run(start, field, (renewals + 1) * t_cap, True, pot, h, h_min)
    return exit_record(int(out[0]), out[5], p, t_cap, (out[1], out[2]), (-out[3], -out[4]))


def stationary_estimate_micro(x, v, params: KineticParams, n_samples, t_cap=None, seed=0,
                              pot=None, workers=None, h=DEFAULT_H, h_min=DEFAULT_H_MIN,
                              renewals=MAX_RENEWALS) -> MCEstimate:
    """Average of the reservoir value seen by backward paths, one fresh field per path.

    Sample ``i`` uses the field keyed by ``(seed, i)``, so the result for a
    given ``(seed, n_samples)`` does not depend on the number of workers.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    pot = pot or RadialPotential.quartic()
    t_cap = default_t_cap(params) if t_cap is None else float(t_cap)
    set_workers(workers)
    vx, vy = float(v[0]), float(v[1])
    cell = 4.0 * params.epsilon
    exponent = int(pot.exponent) if pot.profile == "poly" else 0
    status, times, _ = K.exit_batch(
        float(x[0]), float(x[1]), vx, vy, int(n_samples), np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF),
        (renewals + 1) * t_cap, False, np.empty((0, 2)), params.epsilon, params.coupling,
        params.mu_eps, params.L, cell, pot.code, float(pot.height), exponent, h, h_min,
    )
    if np.any(status == K.STATUS_FAIL):
        raise StepFailure("integration step failed in a sample", x)
    return summarize("micro", x, v, status, times, params, t_cap)


def scatter_single(params: KineticParams, b, pot=None, h=DEFAULT_H, h_min=DEFAULT_H_MIN):
    """Outgoing angle of a unit-speed pass by one scatterer at the origin.

    The particle starts at ``(-2 eps, b eps)`` moving along ``+x1``; with the
    sign convention of :mod:`lorentz_fick.scattering` the result equals
    ``deflection_angle(pot, eps**alpha, b)``.
    """
    pot = pot or RadialPotential.quartic()
    eps = params.epsilon
    field = FixedObstacles(params, [[0.0, 0.0]])
    state = ParticleState.at((-2.0 * eps, b * eps), (1.0, 0.0))
    out, _ = _run(state, field, 4.0 * eps, False, pot, h, h_min)
    return float(np.arctan2(out[4], out[3]))


def dump_trajectory(path, state, field, duration, pot=None, max_records=100_000, h=DEFAULT_H):
    """Write the forward path as CSV ``t, x1, x2, v1, v2``; returns the row count."""
    pot = pot or RadialPotential.quartic()
    _, rec = _run(state, field, duration, False, pot, h, DEFAULT_H_MIN, n_rec=max_records)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x1", "x2", "v1", "v2"])
        for row in rec:
            w.writerow([repr(float(c)) for c in row])
    return len(rec)
