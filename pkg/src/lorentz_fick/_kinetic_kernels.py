"""Jitted backward-path kernels for the Boltzmann and Landau processes.

Only ``x1`` and the velocity angle are tracked: the boundary data depend on
``x1`` alone, so ``x2`` never influences an exit.  Sample ``i`` of a batch
draws its randomness from ``derive_key(seed, i, stream)``.
"""

import math

import numpy as np

from . import _rng
from ._accel import njit, prange

STREAM_BOLTZMANN = 1
STREAM_LANDAU = 2
STREAM_START = 3

TABLE_PCHIP = 0
TABLE_HARD_DISK = 1


@njit
def table_eval(kind, bx, coef, rho):
    """Signed deflection for impact parameter ``rho`` in [-1, 1]."""
    a = abs(rho)
    if kind == TABLE_HARD_DISK:
        val = math.pi - 2.0 * math.asin(min(a, 1.0))
    else:
        m = bx.shape[0] - 1
        i = np.searchsorted(bx, a, side="right") - 1
        if i < 0:
            i = 0
        if i > m - 1:
            i = m - 1
        d = a - bx[i]
        val = ((coef[0, i] * d + coef[1, i]) * d + coef[2, i]) * d + coef[3, i]
    return val if rho >= 0.0 else -val


@njit
def boltzmann_path(x1, theta, L, rate, kind, bx, coef, t_end, stop, key):
    """One path of the jump process started at ``(x1, theta)`` (forward time).

    Returns ``(status, t, x1, theta, n_jumps)``; status 1/2 for exits through
    ``x1 = 0`` / ``x1 = L`` and 0 when ``t_end`` is reached first.
    """
    t = 0.0
    cnt = 0
    n_jumps = 0
    while True:
        if rate > 0.0:
            w = _rng.exponential(key, cnt) / rate
        else:
            w = math.inf
        cnt += 1
        c = math.cos(theta)
        tb = math.inf
        if stop:
            if c > 0.0:
                tb = (L - x1) / c
            elif c < 0.0:
                tb = -x1 / c
        if stop and tb <= w and t + tb <= t_end:
            t += tb
            if c > 0.0:
                return 2, t, L, theta, n_jumps
            return 1, t, 0.0, theta, n_jumps
        if t + w > t_end:
            x1 += c * (t_end - t)
            return 0, t_end, x1, theta, n_jumps
        x1 += c * w
        t += w
        rho = 2.0 * _rng.uniform(key, cnt) - 1.0
        cnt += 1
        theta += table_eval(kind, bx, coef, rho)
        n_jumps += 1


@njit
def landau_path(x1, theta, L, kappa, dt, t_end, stop, key):
    """Strang-split Euler-Maruyama path of the angular diffusion.

    ``kappa`` is the angular diffusivity (variance ``2 kappa t``).  Exits are
    located by linear interpolation inside the half-drift that crosses.
    Returns ``(status, t, x1, theta, n_steps)``.
    """
    t = 0.0
    sig = math.sqrt(2.0 * kappa * dt)
    half = 0.5 * dt
    n = 0
    while True:
        h = half
        last = False
        if t + dt >= t_end:
            h = 0.5 * (t_end - t)
            last = True
        for part in range(2):
            c = math.cos(theta)
            xn = x1 + c * h
            if stop and (xn <= 0.0 or xn >= L):
                if xn <= 0.0:
                    f = x1 / (x1 - xn) if x1 > xn else 0.0
                    return 1, t + f * h, 0.0, theta, n
                f = (L - x1) / (xn - x1) if xn > x1 else 0.0
                return 2, t + f * h, L, theta, n
            x1 = xn
            t += h
            if part == 0:
                theta += math.sqrt(2.0 * kappa * 2.0 * h) * _rng.normal(key, n) if last else sig * _rng.normal(key, n)
        n += 1
        if last:
            return 0, t_end, x1, theta, n


@njit(parallel=True)
def boltzmann_batch(x1, theta, n_samples, seed, L, rate, kind, bx, coef, t_end, stop):
    status = np.empty(n_samples, dtype=np.int64)
    times = np.empty(n_samples)
    xs = np.empty(n_samples)
    ths = np.empty(n_samples)
    jumps = np.empty(n_samples, dtype=np.int64)
    for i in prange(n_samples):
        key = _rng.derive_key(seed, i, STREAM_BOLTZMANN)
        r = boltzmann_path(x1, theta, L, rate, kind, bx, coef, t_end, stop, key)
        status[i] = r[0]
        times[i] = r[1]
        xs[i] = r[2]
        ths[i] = r[3]
        jumps[i] = r[4]
    return status, times, xs, ths, jumps


@njit(parallel=True)
def landau_batch(x1, theta, n_samples, seed, L, kappa, dt, t_end, stop):
    status = np.empty(n_samples, dtype=np.int64)
    times = np.empty(n_samples)
    xs = np.empty(n_samples)
    ths = np.empty(n_samples)
    for i in prange(n_samples):
        key = _rng.derive_key(seed, i, STREAM_LANDAU)
        r = landau_path(x1, theta, L, kappa, dt, t_end, stop, key)
        status[i] = r[0]
        times[i] = r[1]
        xs[i] = r[2]
        ths[i] = r[3]
    return status, times, xs, ths


@njit(parallel=True)
def survival_batch(kind_code, n_samples, seed, x_lo, x_hi, L, rate, tkind, bx, coef,
                   kappa, dt, t_end):
    """Exit flags of paths started at uniform ``x1 in [x_lo, x_hi]`` and uniform angle."""
    alive = np.empty(n_samples, dtype=np.int64)
    for i in prange(n_samples):
        skey = _rng.derive_key(seed, i, STREAM_START)
        x1 = x_lo + (x_hi - x_lo) * _rng.uniform(skey, 0)
        th = 2.0 * math.pi * _rng.uniform(skey, 1)
        if kind_code == 0:
            key = _rng.derive_key(seed, i, STREAM_BOLTZMANN)
            r = boltzmann_path(x1, th, L, rate, tkind, bx, coef, t_end, True, key)
            st = r[0]
        else:
            key = _rng.derive_key(seed, i, STREAM_LANDAU)
            r = landau_path(x1, th, L, kappa, dt, t_end, True, key)
            st = r[0]
        alive[i] = 1 if st == 0 else 0
    return alive
