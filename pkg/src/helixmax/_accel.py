"""Numba switch for the hot kernels.

Set ``HELIXMAX_DISABLE_NUMBA=1`` before import to force the pure-numpy
implementations.  When numba is missing the numpy path is used silently.
"""

import os

_DISABLED = os.environ.get("HELIXMAX_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and not _DISABLED


def njit(fn):
    """Compile ``fn`` in nopython mode, or return it untouched without numba.

    ``fastmath`` stays off: the tail kernels must reproduce the numpy path
    bit for bit, which rules out FMA contraction and reassociation.
    """
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True, fastmath=False)(fn)


def select(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
