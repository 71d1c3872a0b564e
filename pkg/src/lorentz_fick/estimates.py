"""Monte Carlo estimate records shared by the microscopic and kinetic samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# per-sample outcome codes used by every exit kernel
EXIT_LEFT = 1
EXIT_RIGHT = 2
CENSORED = 0


@dataclass(frozen=True)
class ExitRecord:
    """Outcome of one backward path.

    ``kind`` is ``exited_left``, ``exited_right`` or ``censored``.
    ``hitting_time`` is the backward time to the exit (or the horizon for a
    censored path); ``renewals`` counts how many times the path was continued
    past ``t_cap`` before exiting.
    """

    kind: str
    hitting_time: float
    boundary_value: float | None = None
    exit_x: tuple | None = None
    exit_v: tuple | None = None
    renewals: int = 0

    @property
    def exited(self):
        return self.kind != "censored"


def exit_record(status, time, params, t_cap, exit_x=None, exit_v=None):
    if status == EXIT_LEFT:
        kind, value = "exited_left", params.rho1
    elif status == EXIT_RIGHT:
        kind, value = "exited_right", params.rho2
    else:
        return ExitRecord("censored", float(time), None, None, None, _renewals(time, t_cap))
    return ExitRecord(kind, float(time), value, exit_x, exit_v, _renewals(time, t_cap))


def _renewals(time, t_cap):
    if t_cap <= 0:
        return 0
    return max(0, int(math.ceil(time / t_cap)) - 1)


@dataclass
class MCEstimate:
    """Stationary value at one phase-space point with its sampling error.

    ``censored_fraction`` is the fraction of paths still inside after
    ``t_cap``; ``dropped`` counts paths still inside after all renewals,
    which are excluded from ``mean``.
    """

    kind: str
    x: tuple
    v: tuple
    mean: float
    stderr: float
    n: int
    censored_fraction: float
    dropped: int
    params: dict = field(default_factory=dict)

    def to_record(self):
        return {
            "kind": self.kind,
            "x": [float(c) for c in self.x],
            "v": [float(c) for c in self.v],
            "mean": float(self.mean),
            "stderr": float(self.stderr),
            "n": int(self.n),
            "censored_fraction": float(self.censored_fraction),
            "dropped": int(self.dropped),
            "params": dict(self.params),
        }


def summarize(kind, x, v, status, times, params, t_cap):
    """Reduce per-sample exit codes into an :class:`MCEstimate`.

    Each exited sample contributes ``rho1`` or ``rho2``; the reduction is a
    plain sum over a fixed-order array, so it does not depend on how the
    samples were scheduled.
    """
    status = np.asarray(status)
    times = np.asarray(times, dtype=float)
    n = status.size
    values = np.where(status == EXIT_LEFT, params.rho1, params.rho2).astype(float)
    ok = (status == EXIT_LEFT) | (status == EXIT_RIGHT)
    used = int(ok.sum())
    if used:
        vals = values[ok]
        mean = float(vals.mean())
        stderr = float(vals.std(ddof=1) / math.sqrt(used)) if used > 1 else 0.0
    else:
        mean, stderr = float("nan"), float("nan")
    late = (~ok) | (times > t_cap)
    return MCEstimate(
        kind=kind,
        x=tuple(float(c) for c in np.atleast_1d(x)),
        v=tuple(float(c) for c in np.atleast_1d(v)),
        mean=mean,
        stderr=stderr,
        n=used,
        censored_fraction=float(late.mean()) if n else 0.0,
        dropped=int(n - used),
        params=params.to_dict(),
    )
