"""Counter-based random numbers (splitmix64) usable inside jitted kernels.

Every random quantity in the package is a pure function of a 64-bit key and
a counter, so results never depend on evaluation order or thread count.
All arithmetic stays in ``np.uint64`` to keep numba from promoting to float.
"""

import math

import numpy as np

from ._accel import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit
def mix64(z):
    z = z + GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit
def zigzag(i):
    """Map a signed integer to a non-negative one, bijectively."""
    if i >= 0:
        return np.uint64(2 * i)
    return np.uint64(-2 * i - 1)


@njit
def derive_key(seed, a, b):
    """Key for the pair of signed indices (a, b) under ``seed``."""
    k = mix64(np.uint64(seed))
    k = mix64(k ^ zigzag(a))
    return mix64(k ^ zigzag(b))


@njit
def uniform(key, counter):
    """Uniform double in [0, 1) for the given key and counter."""
    z = mix64(key ^ mix64(np.uint64(counter)))
    return np.float64(z >> _S11) * _INV53


@njit
def uniform_open(key, counter):
    """Uniform double in (0, 1], safe for logarithms."""
    return 1.0 - uniform(key, counter)


@njit
def exponential(key, counter):
    return -math.log(uniform_open(key, counter))


@njit
def normal(key, counter):
    """Standard normal via Box-Muller; consumes counters ``2c`` and ``2c+1``."""
    u1 = uniform_open(key, 2 * counter)
    u2 = uniform(key, 2 * counter + 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@njit
def poisson(key, counter, mean):
    """Poisson variate by Knuth's product method on chunks of mean <= 8.

    Returns ``(n, next_counter)``.  Additivity of the Poisson law keeps the
    chunked sum exact for any mean.
    """
    n = 0
    remaining = mean
    c = counter
    while remaining > 0.0:
        m = remaining if remaining < 8.0 else 8.0
        remaining -= m
        limit = math.exp(-m)
        p = uniform_open(key, c)
        c += 1
        while p > limit:
            n += 1
            p *= uniform_open(key, c)
            c += 1
    return n, c
