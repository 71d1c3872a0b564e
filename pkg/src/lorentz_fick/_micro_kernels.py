"""Jitted kernels for the Newtonian motion through the scatterer field.

Units: time and length are physical; inside a support the step is
``h_nom * eps``.  Status codes returned by :func:`trajectory`:
``0`` horizon reached, ``1`` crossed ``x1 = 0``, ``2`` crossed ``x1 = L``,
``-1`` step failure.
"""

import math

import numpy as np

from . import _rng
from ._accel import njit, prange
from .medium import cell_obstacles

MAX_NEIGHBOURS = 1024
CELL_BUFFER = 512

# Yoshida's sixth-order composition ("solution A") of the symmetric Verlet step
_Y1 = -1.17767998417887
_Y2 = 0.235573213359357
_Y3 = 0.784513610477560
_Y0 = 1.0 - 2.0 * (_Y1 + _Y2 + _Y3)
YOSHIDA6 = np.array([_Y3, _Y2, _Y1, _Y0, _Y1, _Y2, _Y3])

STATUS_TIME = 0
STATUS_LEFT = 1
STATUS_RIGHT = 2
STATUS_FAIL = -1


@njit
def gather(icx, icy, seed, use_explicit, explicit, cell_size, mu_eps, L, nb, buf):
    """Centres in the 3x3 block of cells around ``(icx, icy)`` into ``nb``."""
    cap = nb.shape[0]
    if use_explicit:
        n = min(explicit.shape[0], cap)
        for k in range(n):
            nb[k, 0] = explicit[k, 0]
            nb[k, 1] = explicit[k, 1]
        return n
    n = 0
    for di in range(-1, 2):
        for dj in range(-1, 2):
            m = cell_obstacles(seed, icx + di, icy + dj, cell_size, mu_eps, L, buf)
            for k in range(m):
                if n < cap:
                    nb[n, 0] = buf[k, 0]
                    nb[n, 1] = buf[k, 1]
                    n += 1
    return n


@njit
def force(x, y, nb, n, eps, coupling, prof, ph, pk):
    """Acceleration ``-eps^(alpha - 1) sum grad phi(|x - c| / eps)``."""
    ax = 0.0
    ay = 0.0
    inv_e2 = 1.0 / (eps * eps)
    for i in range(n):
        dx = x - nb[i, 0]
        dy = y - nb[i, 1]
        r2 = (dx * dx + dy * dy) * inv_e2
        if r2 < 1.0:
            if prof == 0:
                f = 2.0 * pk * ph * coupling * inv_e2 * (1.0 - r2) ** (pk - 1)
            elif prof == 1:
                r = math.sqrt(r2)
                if r > 1e-12:
                    f = 0.5 * math.pi * ph * coupling * inv_e2 * math.sin(math.pi * r) / r
                else:
                    f = 0.5 * math.pi * math.pi * ph * coupling * inv_e2
            else:
                f = 0.0
            ax += f * dx
            ay += f * dy
    return ax, ay


@njit
def potential(x, y, nb, n, eps, coupling, prof, ph, pk):
    v = 0.0
    inv_e2 = 1.0 / (eps * eps)
    for i in range(n):
        dx = x - nb[i, 0]
        dy = y - nb[i, 1]
        r2 = (dx * dx + dy * dy) * inv_e2
        if r2 < 1.0:
            if prof == 0:
                v += coupling * ph * (1.0 - r2) ** pk
            elif prof == 1:
                c = math.cos(0.5 * math.pi * math.sqrt(r2))
                v += coupling * ph * c * c
    return v


@njit
def inside_any(x, y, nb, n, eps):
    e2 = eps * eps
    for i in range(n):
        dx = x - nb[i, 0]
        dy = y - nb[i, 1]
        if dx * dx + dy * dy < e2:
            return True
    return False


@njit
def membership_changed(x0, y0, x1, y1, nb, n, eps):
    e2 = eps * eps
    for i in range(n):
        a = (x0 - nb[i, 0]) ** 2 + (y0 - nb[i, 1]) ** 2 < e2
        b = (x1 - nb[i, 0]) ** 2 + (y1 - nb[i, 1]) ** 2 < e2
        if a != b:
            return True
    return False


@njit
def step(x, y, vx, vy, h, nb, n, eps, coupling, prof, ph, pk):
    """One sixth-order symmetric step (seven drift-kick-drift substeps)."""
    for s in range(7):
        w = YOSHIDA6[s] * h
        x += 0.5 * w * vx
        y += 0.5 * w * vy
        ax, ay = force(x, y, nb, n, eps, coupling, prof, ph, pk)
        vx += w * ax
        vy += w * ay
        x += 0.5 * w * vx
        y += 0.5 * w * vy
    return x, y, vx, vy


@njit
def _record(rec, nrec, t, x, y, vx, vy):
    if nrec < rec.shape[0]:
        rec[nrec, 0] = t
        rec[nrec, 1] = x
        rec[nrec, 2] = y
        rec[nrec, 3] = vx
        rec[nrec, 4] = vy
        return nrec + 1
    return nrec


@njit
def trajectory(x, y, vx, vy, t_end, stop_at_boundary, seed, use_explicit, explicit,
               eps, coupling, mu_eps, L, cell_size, prof, ph, pk, h_nom, h_min, rec):
    """Integrate forward in time until ``t_end`` or (optionally) a boundary crossing.

    Returns ``(status, x, y, vx, vy, t, n_crossings, max_energy_drift, n_records)``.
    Energy drift is measured each time the particle leaves all supports.
    """
    nb = np.empty((MAX_NEIGHBOURS, 2))
    buf = np.empty((CELL_BUFFER, 2))
    icx = math.floor(x / cell_size)
    icy = math.floor(y / cell_size)
    n = gather(icx, icy, seed, use_explicit, explicit, cell_size, mu_eps, L, nb, buf)
    e0 = 0.5 * (vx * vx + vy * vy) + potential(x, y, nb, n, eps, coupling, prof, ph, pk)
    t = 0.0
    n_cross = 0
    max_drift = 0.0
    nrec = _record(rec, 0, t, x, y, vx, vy)
    h_step = h_nom * eps
    h_small = h_min * eps
    inf = math.inf

    if stop_at_boundary and (x < 0.0 or x > L):
        return STATUS_FAIL, x, y, vx, vy, t, n_cross, max_drift, nrec

    while True:
        if not inside_any(x, y, nb, n, eps):
            # exact free flight to the next event
            speed = math.sqrt(vx * vx + vy * vy)
            if speed == 0.0:
                return STATUS_FAIL, x, y, vx, vy, t, n_cross, max_drift, nrec
            dt_seg = cell_size / speed
            t_rem = t_end - t
            t_bnd = inf
            if stop_at_boundary:
                if vx > 0.0:
                    t_bnd = (L - x) / vx
                elif vx < 0.0:
                    t_bnd = -x / vx
            tau = 0.0
            t_hit = inf
            while True:
                tm = tau + 0.5 * dt_seg
                icx = math.floor((x + vx * tm) / cell_size)
                icy = math.floor((y + vy * tm) / cell_size)
                n = gather(icx, icy, seed, use_explicit, explicit, cell_size, mu_eps, L, nb, buf)
                a = speed * speed
                for i in range(n):
                    dx = x - nb[i, 0]
                    dy = y - nb[i, 1]
                    bq = dx * vx + dy * vy
                    cq = dx * dx + dy * dy - eps * eps
                    if bq < 0.0 and cq > 0.0:
                        disc = bq * bq - a * cq
                        if disc > 0.0:
                            tin = (-bq - math.sqrt(disc)) / a
                            if tin < t_hit:
                                t_hit = tin
                seg_end = tau + dt_seg
                if t_hit <= seg_end or t_bnd <= seg_end or t_rem <= seg_end:
                    break
                tau = seg_end
            if t_rem <= t_hit and t_rem <= t_bnd:
                x += vx * t_rem
                y += vy * t_rem
                t = t_end
                nrec = _record(rec, nrec, t, x, y, vx, vy)
                return STATUS_TIME, x, y, vx, vy, t, n_cross, max_drift, nrec
            if t_bnd <= t_hit:
                y += vy * t_bnd
                t += t_bnd
                if vx < 0.0:
                    x = 0.0
                    status = STATUS_LEFT
                else:
                    x = L
                    status = STATUS_RIGHT
                nrec = _record(rec, nrec, t, x, y, vx, vy)
                return status, x, y, vx, vy, t, n_cross, max_drift, nrec
            # enter the support, nudged just past its rim
            tin = t_hit + 1e-12 * eps / speed
            x += vx * tin
            y += vy * tin
            t += tin
            n_cross += 1
            nrec = _record(rec, nrec, t, x, y, vx, vy)
            icx = math.floor(x / cell_size)
            icy = math.floor(y / cell_size)
            n = gather(icx, icy, seed, use_explicit, explicit, cell_size, mu_eps, L, nb, buf)
            if t >= t_end:
                return STATUS_TIME, x, y, vx, vy, t, n_cross, max_drift, nrec
            continue

        # inside at least one support: symmetric high-order stepping
        while True:
            jx = math.floor(x / cell_size)
            jy = math.floor(y / cell_size)
            if jx != icx or jy != icy:
                icx = jx
                icy = jy
                n = gather(icx, icy, seed, use_explicit, explicit, cell_size, mu_eps, L, nb, buf)
            hh = h_step
            final = False
            if t + hh >= t_end:
                hh = t_end - t
                final = True
            nx_, ny_, nvx, nvy = step(x, y, vx, vy, hh, nb, n, eps, coupling, prof, ph, pk)
            if not (math.isfinite(nx_) and math.isfinite(nvx)):
                return STATUS_FAIL, x, y, vx, vy, t, n_cross, max_drift, nrec
            if stop_at_boundary and (nx_ <= 0.0 or nx_ >= L):
                # locate the crossing of x1 in {0, L} by bisection on the step length
                lo = 0.0
                hi = hh
                for _ in range(200):
                    sp = math.sqrt(vx * vx + vy * vy) + 1e-300
                    if (hi - lo) * max(sp, 1.0) <= 1e-10:
                        break
                    mid = 0.5 * (lo + hi)
                    mx, my, mvx, mvy = step(x, y, vx, vy, mid, nb, n, eps, coupling, prof, ph, pk)
                    if mx <= 0.0 or mx >= L:
                        hi = mid
                    else:
                        lo = mid
                x, y, vx, vy = step(x, y, vx, vy, hi, nb, n, eps, coupling, prof, ph, pk)
                t += hi
                if x <= 0.0:
                    x = 0.0
                    status = STATUS_LEFT
                else:
                    x = L
                    status = STATUS_RIGHT
                nrec = _record(rec, nrec, t, x, y, vx, vy)
                return status, x, y, vx, vy, t, n_cross, max_drift, nrec
            if hh > h_small and membership_changed(x, y, nx_, ny_, nb, n, eps):
                # a rim (kink of the force) lies inside the step: isolate it
                lo = 0.0
                hi = hh
                while hi - lo > h_small:
                    mid = 0.5 * (lo + hi)
                    mx, my, mvx, mvy = step(x, y, vx, vy, mid, nb, n, eps, coupling, prof, ph, pk)
                    if membership_changed(x, y, mx, my, nb, n, eps):
                        hi = mid
                    else:
                        lo = mid
                if lo > 0.0:
                    x, y, vx, vy = step(x, y, vx, vy, lo, nb, n, eps, coupling, prof, ph, pk)
                    t += lo
                x, y, vx, vy = step(x, y, vx, vy, hi - lo, nb, n, eps, coupling, prof, ph, pk)
                t += hi - lo
                if final and hi == hh:
                    t = t_end
            else:
                x, y, vx, vy = nx_, ny_, nvx, nvy
                t = t_end if final else t + hh
            nrec = _record(rec, nrec, t, x, y, vx, vy)
            if t >= t_end:
                return STATUS_TIME, x, y, vx, vy, t, n_cross, max_drift, nrec
            if not inside_any(x, y, nb, n, eps):
                e = 0.5 * (vx * vx + vy * vy)
                drift = abs(e - e0)
                if drift > max_drift:
                    max_drift = drift
                break


@njit(parallel=True)
def exit_batch(x, y, vx, vy, n_samples, seed, t_total, use_explicit, explicit,
               eps, coupling, mu_eps, L, cell_size, prof, ph, pk, h_nom, h_min):
    """Backward exits of ``n_samples`` copies of ``(x, v)`` in independent fields.

    Sample ``i`` uses the field seeded by ``derive_key(seed, i, 0)``.  Returns
    per-sample ``status`` and ``exit_time`` arrays.
    """
    status = np.empty(n_samples, dtype=np.int64)
    times = np.empty(n_samples)
    drift = np.empty(n_samples)
    rec = np.empty((0, 5))
    for i in prange(n_samples):
        fseed = _rng.derive_key(seed, i, 0)
        res = trajectory(x, y, -vx, -vy, t_total, True, fseed, use_explicit, explicit,
                         eps, coupling, mu_eps, L, cell_size, prof, ph, pk, h_nom, h_min, rec)
        status[i] = res[0]
        times[i] = res[5]
        drift[i] = res[7]
    return status, times, drift
