# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Fused resolvent application through the Schur form.

Computes out = Q (z - T)^{-1} Q^H X column by column, with the triangular
back substitution and both small matrix products done in one C pass per
frequency point.  Dimensions are tiny (n = 15) while the number of
frequency points is large, so the win over BLAS-backed NumPy comes from
skipping temporaries and per-row dispatch overhead.
"""

import numpy as np

cimport cython


def resolvent_apply_vec(const double complex[:, ::1] Q, const double complex[:, ::1] Qh,
                        const double complex[:, ::1] T, const double complex[::1] z,
                        const double complex[::1] xin):
    """Same as resolvent_apply with one input vector shared by all z."""
    cdef Py_ssize_t n = T.shape[0]
    cdef Py_ssize_t m = z.shape[0]
    out_arr = np.empty((n, m), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex[64] y
    cdef double complex[64] x
    cdef double complex acc, zz
    cdef Py_ssize_t i, j, k
    if n > 64:
        raise ValueError("kernel compiled for n <= 64")
    for i in range(n):
        acc = 0
        for k in range(n):
            acc = acc + Qh[i, k] * xin[k]
        y[i] = acc
    for j in range(m):
        zz = z[j]
        for i in range(n - 1, -1, -1):
            acc = y[i]
            for k in range(i + 1, n):
                acc = acc + T[i, k] * x[k]
            x[i] = acc / (zz - T[i, i])
        for i in range(n):
            acc = 0
            for k in range(n):
                acc = acc + Q[i, k] * x[k]
            out[i, j] = acc
    return out_arr


def resolvent_apply(const double complex[:, ::1] Q, const double complex[:, ::1] Qh,
                    const double complex[:, ::1] T, const double complex[::1] z,
                    const double complex[:, ::1] X):
    cdef Py_ssize_t n = T.shape[0]
    cdef Py_ssize_t m = z.shape[0]
    out_arr = np.empty((n, m), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex[64] y
    cdef double complex[64] x
    cdef double complex acc, zz
    cdef Py_ssize_t i, j, k
    if n > 64:
        raise ValueError("kernel compiled for n <= 64")
    for j in range(m):
        zz = z[j]
        for i in range(n):
            acc = 0
            for k in range(n):
                acc = acc + Qh[i, k] * X[k, j]
            y[i] = acc
        for i in range(n - 1, -1, -1):
            acc = y[i]
            for k in range(i + 1, n):
                acc = acc + T[i, k] * x[k]
            x[i] = acc / (zz - T[i, i])
        for i in range(n):
            acc = 0
            for k in range(n):
                acc = acc + Q[i, k] * x[k]
            out[i, j] = acc
    return out_arr
