"""Acceleration switch for the hot solver loop.

The ADMM inner loop exists twice: a pure-numpy path built from the public
operator functions (always available, used as the reference), and a numba
``@njit`` kernel in ``_kernels``.  The kernel is used by default when numba
imports; set the environment variable ``SMARTDOA_NUMBA=0`` to force the numpy
path (or ``=1`` to insist on the kernel and fail loudly if numba is missing).
"""

import os

try:
    import numba  # noqa: F401
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

_FALSE = ("0", "false", "off", "no")
_TRUE = ("1", "true", "on", "yes")


def numba_enabled():
    """Resolve the SMARTDOA_NUMBA env flag against numba availability."""
    flag = os.environ.get("SMARTDOA_NUMBA", "").strip().lower()
    if flag in _FALSE:
        return False
    if flag in _TRUE:
        if not HAS_NUMBA:
            raise RuntimeError("SMARTDOA_NUMBA=1 but numba is not importable")
        return True
    return HAS_NUMBA
