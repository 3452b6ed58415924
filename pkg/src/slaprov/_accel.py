"""Backend selection for the numeric kernels.

``SLAPROV_BACKEND=numpy`` forces the pure numpy/scipy code paths even when
numba is installed; the default is ``numba`` whenever it can be imported.
"""

from __future__ import annotations

import os

BACKEND_ENV = "SLAPROV_BACKEND"

_requested = os.environ.get(BACKEND_ENV, "numba").strip().lower()

try:
    if _requested == "numpy":
        raise ImportError("numba disabled by " + BACKEND_ENV)
    from numba import njit  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        """Identity stand-in for ``numba.njit``."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap


USE_NUMBA = HAVE_NUMBA


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
