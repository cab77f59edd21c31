# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: row-wise weighted summaries and the binomial grid scan.

See _fallback.py for the contracts. The weighted summaries agree with the
fallback to roundoff (summation order differs); the grid scan is
bit-identical to it: both call the platform C lgamma with the same
expression order, and the build disables FP contraction so the compiler
cannot fuse the mul/add sequences into FMAs.
"""

import numpy as np

from libc.math cimport lgamma, INFINITY


cdef inline double lbeta(double a, double b) nogil:
    return lgamma(a) + lgamma(b) - lgamma(a + b)


def weighted_mean_var(const double[::1] y, const double[:, ::1] w):
    """Row-wise weighted mean and variance of the mean (see _fallback)."""
    cdef Py_ssize_t B = w.shape[0]
    cdef Py_ssize_t n = w.shape[1]
    if y.shape[0] != n:
        raise ValueError("w must be (B, n) and y length n")
    if n < 2:
        raise ValueError("need at least two observations")
    mean_arr = np.empty(B, dtype=np.float64)
    var_arr = np.empty(B, dtype=np.float64)
    cdef double[::1] mean = mean_arr
    cdef double[::1] var = var_arr
    cdef Py_ssize_t b, i
    cdef double s, m, d, q
    with nogil:
        for b in range(B):
            s = 0.0
            for i in range(n):
                s += w[b, i] * y[i]
            m = s / n
            q = 0.0
            for i in range(n):
                d = y[i] - m
                q += w[b, i] * d * d
            mean[b] = m
            var[b] = q / (n - 1) / n
    return mean_arr, var_arr


def binom_grid_best_a0(const double[::1] grid, const double[::1] y1, double n1,
                       const double[::1] y0, double n0):
    """Per-row grid argmax of the marginal log-likelihood (see _fallback)."""
    cdef Py_ssize_t G = grid.shape[0]
    cdef Py_ssize_t B = y1.shape[0]
    if G == 0:
        raise ValueError("grid must be a nonempty vector")
    if y0.shape[0] != B:
        raise ValueError("y1 and y0 must be equal-length vectors")
    out_arr = np.empty(B, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t b, g
    cdef double best, ll, a0, s1, f1, s0, f0
    with nogil:
        for b in range(B):
            s1 = y1[b]
            f1 = n1 - y1[b]
            s0 = y0[b]
            f0 = n0 - y0[b]
            best = -INFINITY
            a0 = grid[0]
            for g in range(G):
                ll = (lbeta(grid[g] * s1 + s0 + 1.0, grid[g] * f1 + f0 + 1.0)
                      - lbeta(grid[g] * s1 + 1.0, grid[g] * f1 + 1.0))
                if ll >= best:  # >= keeps the last (largest) grid value on ties
                    best = ll
                    a0 = grid[g]
            out[b] = a0
    return out_arr
