# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Must stay interchangeable with ``_kernels_py``."""
import numpy as np

from libc.math cimport sqrt


def fold(const double[:, ::1] values, const double[::1] weights, const long long[::1] offsets):
    cdef Py_ssize_t n_out = offsets.shape[0] - 1
    cdef Py_ssize_t p = values.shape[1]
    out = np.zeros((n_out, p))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t j, i, c
    cdef double w
    for j in range(n_out):
        for i in range(offsets[j], offsets[j + 1]):
            w = weights[i]
            for c in range(p):
                o[j, c] = o[j, c] + w * values[i, c]
    return out


def chol_solve(const double[:, :, ::1] mats, const double[:, ::1] rhs):
    cdef Py_ssize_t k = mats.shape[0]
    cdef Py_ssize_t d = mats.shape[1]
    out = np.empty((k, d))
    ok = np.ones(k, dtype=np.bool_)
    cdef double[:, ::1] x = out
    cdef unsigned char[::1] good = ok.view(np.uint8)
    cdef double[:, ::1] low = np.zeros((d, d))
    cdef Py_ssize_t m, i, j, t
    cdef double s
    for m in range(k):
        for j in range(d):
            s = mats[m, j, j]
            for t in range(j):
                s = s - low[j, t] * low[j, t]
            if s <= 0.0:
                good[m] = 0
                break
            low[j, j] = sqrt(s)
            for i in range(j + 1, d):
                s = mats[m, i, j]
                for t in range(j):
                    s = s - low[i, t] * low[j, t]
                low[i, j] = s / low[j, j]
        if not good[m]:
            for i in range(d):
                x[m, i] = np.nan
            continue
        for i in range(d):
            s = rhs[m, i]
            for t in range(i):
                s = s - low[i, t] * x[m, t]
            x[m, i] = s / low[i, i]
        for i in range(d - 1, -1, -1):
            s = x[m, i]
            for t in range(i + 1, d):
                s = s - low[t, i] * x[m, t]
            x[m, i] = s / low[i, i]
    return out, ok
