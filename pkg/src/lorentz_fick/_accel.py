"""JIT switch for the numeric kernels.

Kernels are written once in the numba-compatible subset of Python.  With
numba available they are compiled with ``@njit``; setting the environment
variable ``LORENTZ_FICK_DISABLE_JIT=1`` (or running without numba) leaves
them as plain Python over numpy scalars, which gives identical results and
is only useful for debugging and for the parity benchmark.
"""

import os
import warnings

try:
    import numba

    # the TBB layer may be too old on some systems; avoid the noisy probe
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAVE_NUMBA = False

JIT_DISABLED = os.environ.get("LORENTZ_FICK_DISABLE_JIT", "0").lower() in ("1", "true", "yes")
USE_JIT = HAVE_NUMBA and not JIT_DISABLED

if not USE_JIT:
    # uint64 hashing relies on wrap-around, which numpy scalars report as overflow
    warnings.filterwarnings("ignore", message="overflow encountered", category=RuntimeWarning)


def njit(*args, **kwargs):
    """``numba.njit`` when jitting is enabled, identity decorator otherwise."""
    if args and callable(args[0]) and len(args) == 1 and not kwargs:
        return njit()(args[0])

    def decorator(func):
        if USE_JIT:
            kwargs.setdefault("cache", True)
            return numba.njit(*args, **kwargs)(func)
        return func

    return decorator


if USE_JIT:
    prange = numba.prange
else:
    prange = range


def set_workers(n):
    """Set the kernel thread count; a no-op in the pure-Python path."""
    if n is None:
        return
    if USE_JIT:
        n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
        numba.set_num_threads(n)


def backend_name():
    return "numba" if USE_JIT else "python"
