"""Lazily generated Poisson field of scatterer centres in the strip (0, L) x R.

The plane is cut into square cells of side ``cell_size``.  The content of
cell ``(ix, iy)`` is a pure function of ``(seed, ix, iy)``: a Poisson count
with mean ``mu_eps * cell_size**2`` and uniform positions, of which only the
points with ``0 < x1 < L`` are kept.  Nothing is stored globally, so the
trajectory kernels regenerate cells on demand and the Python-level
:class:`ObstacleField` simply memoizes them.
"""

from __future__ import annotations

import csv
import math
import threading

import numpy as np

from . import _rng
from ._accel import njit
from .params import KineticParams

__all__ = ["KineticParams", "ObstacleField", "obstacles_near", "expected_count", "cell_obstacles"]

_POS_SALT = np.uint64(0x5851F42D4C957F2D)


@njit
def cell_obstacles(seed, ix, iy, cell_size, mu_eps, L, out):
    """Write the centres of cell ``(ix, iy)`` into ``out``; return their number.

    ``out`` must have room for the Poisson draw; the count is clipped to
    ``out.shape[0]`` (a capacity overflow is astronomically unlikely for the
    buffer sizes used by the kernels).
    """
    x_lo = ix * cell_size
    if x_lo >= L or x_lo + cell_size <= 0.0 or mu_eps <= 0.0:
        return 0
    key = _rng.derive_key(seed, ix, iy)
    n, _ = _rng.poisson(key, 0, mu_eps * cell_size * cell_size)
    pkey = _rng.mix64(key ^ _POS_SALT)
    y_lo = iy * cell_size
    cap = out.shape[0]
    m = 0
    for k in range(n):
        cx = x_lo + cell_size * _rng.uniform(pkey, 2 * k)
        cy = y_lo + cell_size * _rng.uniform(pkey, 2 * k + 1)
        if 0.0 < cx < L and m < cap:
            out[m, 0] = cx
            out[m, 1] = cy
            m += 1
    return m


@njit
def cell_counts(seed, ix0, ix1, iy0, iy1, cell_size, mu_eps, L):
    """Obstacle counts for the block of cells ``[ix0, ix1) x [iy0, iy1)``."""
    buf = np.empty((4096, 2))
    out = np.zeros((ix1 - ix0, iy1 - iy0), dtype=np.int64)
    for i in range(ix1 - ix0):
        for j in range(iy1 - iy0):
            out[i, j] = cell_obstacles(seed, ix0 + i, iy0 + j, cell_size, mu_eps, L, buf)
    return out


def expected_count(params, region_area):
    """Mean number of centres in a region of the strip: ``mu_eps * area``."""
    if region_area < 0:
        raise ValueError("area must be >= 0")
    return params.mu_eps * region_area


class ObstacleField:
    """One realisation of the scatterer configuration.

    Parameters
    ----------
    params : KineticParams
    seed : int
        64-bit seed; identical ``(seed, cell)`` always yields identical centres.
    cell_size : float, optional
        Defaults to ``4 * epsilon`` so any support meets at most a 3x3 block.
    max_radius : float, optional
        Largest radius accepted by :meth:`near` (default two cells).
    """

    def __init__(self, params: KineticParams, seed: int, cell_size=None, max_radius=None):
        self.params = params
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.cell_size = float(cell_size) if cell_size is not None else 4.0 * params.epsilon
        if self.cell_size < 2.0 * params.epsilon:
            raise ValueError("cell_size must be at least the support diameter 2*epsilon")
        self.max_radius = float(max_radius) if max_radius is not None else 2.0 * self.cell_size
        self._cells: dict[tuple[int, int], np.ndarray] = {}
        self._lock = threading.Lock()
        cap = int(params.mu_eps * self.cell_size ** 2 + 20.0 * math.sqrt(params.mu_eps * self.cell_size ** 2) + 64)
        self._capacity = cap

    @property
    def n_cached(self):
        return len(self._cells)

    def cell(self, ix, iy):
        key = (int(ix), int(iy))
        pts = self._cells.get(key)
        if pts is None:
            buf = np.empty((self._capacity, 2))
            n = cell_obstacles(
                np.uint64(self.seed), key[0], key[1], self.cell_size,
                self.params.mu_eps, self.params.L, buf,
            )
            pts = buf[:n].copy()
            pts.setflags(write=False)
            # idempotent: a concurrent duplicate generation produced the same data
            with self._lock:
                pts = self._cells.setdefault(key, pts)
        return pts

    def near(self, x, r):
        """All centres within distance ``r`` of ``x``, in cell order, no duplicates."""
        if r > self.max_radius:
            raise ValueError(f"query radius {r} exceeds the configured maximum {self.max_radius}")
        x1, x2 = float(x[0]), float(x[1])
        s = self.cell_size
        found = []
        for ix in range(math.floor((x1 - r) / s), math.floor((x1 + r) / s) + 1):
            for iy in range(math.floor((x2 - r) / s), math.floor((x2 + r) / s) + 1):
                pts = self.cell(ix, iy)
                if len(pts):
                    d2 = (pts[:, 0] - x1) ** 2 + (pts[:, 1] - x2) ** 2
                    found.append(pts[d2 <= r * r])
        if not found:
            return np.empty((0, 2))
        return np.concatenate(found)

    def window(self, x1_range, x2_range):
        """Centres inside the rectangle ``x1_range x x2_range``."""
        s = self.cell_size
        (a0, a1), (b0, b1) = x1_range, x2_range
        out = []
        for ix in range(math.floor(a0 / s), math.floor(a1 / s) + 1):
            for iy in range(math.floor(b0 / s), math.floor(b1 / s) + 1):
                pts = self.cell(ix, iy)
                if len(pts):
                    keep = (pts[:, 0] >= a0) & (pts[:, 0] < a1) & (pts[:, 1] >= b0) & (pts[:, 1] < b1)
                    out.append(pts[keep])
        return np.concatenate(out) if out else np.empty((0, 2))

    def snapshot_csv(self, path, x1_range, x2_range):
        pts = self.window(x1_range, x2_range)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cx", "cy"])
            for cx, cy in pts:
                writer.writerow([repr(float(cx)), repr(float(cy))])
        return len(pts)


def obstacles_near(field: ObstacleField, x, r):
    return field.near(x, r)
