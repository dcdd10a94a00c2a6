"""Numba switch.

Set ``RCM_NUMBA=0`` (or ``false``/``no``/``off``) before import to run every
kernel on the pure Python/NumPy path.
"""

import os

_flag = os.environ.get("RCM_NUMBA", "1").strip().lower()

USE_NUMBA = _flag not in ("0", "false", "no", "off")

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

if USE_NUMBA:
    def jit(func):
        return numba.njit(cache=True, nogil=True)(func)
else:
    def jit(func):
        return func

BACKEND = "numba" if USE_NUMBA else "numpy"
