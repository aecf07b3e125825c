# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled log-sum-exp sweep for the log-domain Sinkhorn iteration.

Same contract as :func:`ldpjko._kernels_py.lse_rows`.
"""
from libc.math cimport exp, log, INFINITY

import numpy as np


cdef double _UNDERFLOW = -745.0


def lse_rows(const double[:, ::1] logk, const double[::1] pot, double[::1] out=None):
    cdef Py_ssize_t n = logk.shape[0], m = logk.shape[1]
    cdef Py_ssize_t i, j
    cdef double v, vmax, acc
    if pot.shape[0] != m:
        raise ValueError("pot length does not match kernel columns")
    if out is None:
        out = np.empty(n, dtype=np.float64)
    elif out.shape[0] != n:
        raise ValueError("out length does not match kernel rows")
    with nogil:
        for i in range(n):
            vmax = -INFINITY
            for j in range(m):
                v = logk[i, j] + pot[j]
                if v > vmax:
                    vmax = v
            if vmax == -INFINITY:
                out[i] = -INFINITY
                continue
            acc = 0.0
            for j in range(m):
                v = logk[i, j] + pot[j] - vmax
                # exp underflows to 0 below this; skipping saves the call
                if v > _UNDERFLOW:
                    acc += exp(v)
            out[i] = vmax + log(acc)
    return np.asarray(out)
