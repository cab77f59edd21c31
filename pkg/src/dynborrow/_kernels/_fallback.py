"""Pure Python/NumPy implementations of the hot kernels.

Semantics match the compiled backend in _core.pyx. The weighted-summary
kernel agrees with it to roundoff (summation order differs); the grid
kernel is bit-identical because both backends call the platform C lgamma
with the same expression order. That shared primitive matters: the
marginal-likelihood profile is analytically flat for some count
configurations (for example n0 = 1 with y1 = n1/2), where the argmax is
decided by last-ulp noise, and two different log-gamma implementations
would then select different grid points. The elementwise calls make this
backend's grid scan slow; that is the price of exact tie agreement without
a compiler.
"""

import ctypes
import ctypes.util
import math

import numpy as np


def _load_lgamma():
    name = ctypes.util.find_library("m")
    for cand in ([name] if name else []) + ["libm.so.6", "libm.so", "libm.dylib"]:
        try:
            fn = ctypes.CDLL(cand).lgamma
        except (OSError, AttributeError):
            continue
        fn.restype = ctypes.c_double
        fn.argtypes = (ctypes.c_double,)
        return fn
    # no loadable libm (static CRT); tie resolution on analytically flat
    # profiles may then differ from the compiled backend in the last ulp
    return math.lgamma


_lgamma = np.frompyfunc(_load_lgamma(), 1, 1)


def _lbeta(a, b):
    la = _lgamma(a).astype(np.float64)
    lb = _lgamma(b).astype(np.float64)
    lab = _lgamma(a + b).astype(np.float64)
    return la + lb - lab


def weighted_mean_var(y, w):
    """Row-wise weighted mean and variance of the mean.

    y has length n; w is (B, n) with every row summing to n. Returns arrays
    (mean, var_of_mean) of length B with
    mean_b = sum_i w[b,i] y_i / n and
    var_b  = [sum_i w[b,i] (y_i - mean_b)^2 / (n - 1)] / n.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.ndim != 2 or y.ndim != 1 or w.shape[1] != y.shape[0]:
        raise ValueError("w must be (B, n) and y length n")
    n = y.shape[0]
    if n < 2:
        raise ValueError("need at least two observations")
    # einsum, not w @ y: BLAS may accumulate differently depending on B or
    # threading, and per-row results must not depend on the batch size
    mean = np.einsum("bi,i->b", w, y) / n
    dev = y[None, :] - mean[:, None]
    var = np.einsum("bi,bi->b", w, dev * dev) / (n - 1) / n
    return mean, var


def binom_grid_best_a0(grid, y1, n1, y0, n0):
    """Per-row grid argmax of the discount-parameter marginal log-likelihood.

    ll(a0) = lbeta(a0*y1 + y0 + 1, a0*(n1 - y1) + n0 - y0 + 1)
           - lbeta(a0*y1 + 1,      a0*(n1 - y1) + 1)
    evaluated for each (y1[b], y0[b]) pair over an ascending grid; ties take
    the largest grid value. y1/y0 may be non-integer (weighted counts).
    """
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    y1 = np.ascontiguousarray(y1, dtype=np.float64)
    y0 = np.ascontiguousarray(y0, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty vector")
    if y1.shape != y0.shape or y1.ndim != 1:
        raise ValueError("y1 and y0 must be equal-length vectors")
    s1 = y1[:, None]
    f1 = (n1 - y1)[:, None]
    s0 = y0[:, None]
    f0 = (n0 - y0)[:, None]
    g = grid[None, :]
    ll = (_lbeta(g * s1 + s0 + 1.0, g * f1 + f0 + 1.0)
          - _lbeta(g * s1 + 1.0, g * f1 + 1.0))
    # argmax favoring the last (largest) grid index on exact ties
    idx = (grid.size - 1) - np.argmax(ll[:, ::-1], axis=1)
    return grid[idx]
