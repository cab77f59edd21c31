"""Backend selection for the hot kernels.

The compiled Cython extension is preferred when importable; the NumPy
fallback has identical semantics. Set DYNBORROW_FORCE_FALLBACK=1 to skip
the compiled backend (used by the parity tests and the benchmark).
"""

import os

import numpy as np

from . import _fallback

if os.environ.get("DYNBORROW_FORCE_FALLBACK", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "fallback"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "fallback"


def weighted_mean_var(y, w):
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return _impl.weighted_mean_var(y, w)


def binom_grid_best_a0(grid, y1, n1, y0, n0):
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    y1 = np.ascontiguousarray(np.atleast_1d(y1), dtype=np.float64)
    y0 = np.ascontiguousarray(np.atleast_1d(y0), dtype=np.float64)
    return _impl.binom_grid_best_a0(grid, y1, float(n1), y0, float(n0))


weighted_mean_var.__doc__ = _fallback.weighted_mean_var.__doc__
binom_grid_best_a0.__doc__ = _fallback.binom_grid_best_a0.__doc__
