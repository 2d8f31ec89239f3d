"""Numba-or-numpy kernel selection.

Hot kernels are written twice: a loop form compiled with numba and a plain
numpy form.  The numba path is used when numba imports and the environment
variable ``WHITEPET_DISABLE_NUMBA`` is unset or ``0``.  The flag is read on
every dispatch, so tests can flip it at runtime.
"""

import os

DISABLE_ENV = "WHITEPET_DISABLE_NUMBA"

try:
    import numba

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the default probe order tries TBB first and warns on old versions
        numba.config.THREADING_LAYER = "omp"
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def use_numba():
    """Return True when the compiled kernels should be used."""
    if not HAVE_NUMBA:
        return False
    return os.environ.get(DISABLE_ENV, "0").strip().lower() in ("", "0", "false", "no")


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or a no-op decorator without numba."""
    kwargs.setdefault("cache", True)
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)

    def deco(fn):
        return fn

    if args and callable(args[0]):
        return args[0]
    return deco


if HAVE_NUMBA:
    prange = numba.prange
else:  # pragma: no cover
    prange = range


def set_threads(n):
    """Cap the number of numba worker threads (results do not depend on it)."""
    if n is None or not HAVE_NUMBA:
        return
    n = int(n)
    if n < 1:
        raise ValueError("thread count must be >= 1")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
