# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. See ``_kernels_py`` for the reference semantics."""
import numpy as np

from libc.math cimport fabs
from libc.stdint cimport int64_t

NAME = "cython"


def apply_stencil(y, const int64_t[:, ::1] idx, const double[:, ::1] w):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = idx.shape[0], s = idx.shape[1], i, j
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double g, yi
    with nogil:
        for i in range(n):
            g = 0.0
            yi = yv[i]
            for j in range(s):
                g = g + w[i, j] * (yv[idx[i, j]] - yi)
            o[i] = g
    return out


def perm_mean_abs_gradient(y, perms, const int64_t[:, ::1] idx, const double[:, ::1] w):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const int64_t[:, ::1] pv = np.ascontiguousarray(perms, dtype=np.int64)
    cdef Py_ssize_t K = pv.shape[0], n = pv.shape[1], s = idx.shape[1]
    cdef Py_ssize_t k, i, j
    out = np.empty(K, dtype=np.float64)
    cdef double[::1] o = out
    cdef double g, acc, yi
    with nogil:
        for k in range(K):
            acc = 0.0
            for i in range(n):
                g = 0.0
                yi = yv[pv[k, i]]
                for j in range(s):
                    g = g + w[i, j] * (yv[pv[k, idx[i, j]]] - yi)
                acc = acc + fabs(g)
            o[k] = acc / n
    return out
