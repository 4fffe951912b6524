"""Backend selection for the hot kernels.

Set ``GTSAGA_DISABLE_NUMBA=1`` to force the pure-numpy path.  When numba is
not importable the numpy path is used and a warning is emitted once.
"""

from __future__ import annotations

import os
import warnings

_FALSY = {"", "0", "false", "no", "off"}

DISABLE_NUMBA = os.environ.get("GTSAGA_DISABLE_NUMBA", "").strip().lower() not in _FALSY

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False


class PerformanceWarning(UserWarning):
    pass


def njit(func=None, **kwargs):
    """``numba.njit`` with project defaults; identity when numba is missing."""
    opts = {"cache": True, "nogil": True}
    opts.update(kwargs)

    def wrap(f):
        if not HAS_NUMBA:
            return f
        return numba.njit(**opts)(f)

    return wrap if func is None else wrap(func)


def default_backend() -> str:
    if DISABLE_NUMBA:
        return "numpy"
    if not HAS_NUMBA:
        warnings.warn("numba is not available; using the numpy backend", PerformanceWarning, stacklevel=2)
        return "numpy"
    return "numba"
