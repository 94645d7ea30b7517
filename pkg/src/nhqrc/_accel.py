"""Backend switch for the compiled kernels.

Set ``NHQRC_DISABLE_NUMBA=1`` before import to force the pure-numpy path.
"""

from __future__ import annotations

import os

_DISABLE = os.environ.get("NHQRC_DISABLE_NUMBA", "0").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLE:
        raise ImportError
    import numba as _numba
except ImportError:
    _numba = None

HAS_NUMBA = _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return _numba.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if HAS_NUMBA else "numpy"
