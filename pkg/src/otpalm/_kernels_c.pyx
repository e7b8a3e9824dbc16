# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled grouped prox and rank-one Jacobian kernels."""
from libc.math cimport fmax, sqrt

import numpy as np
cimport numpy as cnp

ctypedef cnp.int64_t idx_t


def group_prox(const double[::1] x, const idx_t[::1] index, const idx_t[::1] ptr,
               double inv_scale, const double[::1] zeta, double[::1] out, double[::1] wnorm):
    """Shrink each group of max(x, 0) * inv_scale towards zero by zeta[g].

    Writes the result into ``out`` (natural order) and ||max(x_G, 0)|| * inv_scale into ``wnorm``.
    """
    cdef Py_ssize_t g, k, ng = ptr.shape[0] - 1
    cdef idx_t i
    cdef double s, t, f
    with nogil:
        for g in range(ng):
            s = 0.0
            for k in range(ptr[g], ptr[g + 1]):
                t = fmax(x[index[k]], 0.0)
                s = s + t * t
            s = sqrt(s) * inv_scale
            wnorm[g] = s
            if s > zeta[g]:
                f = (1.0 - zeta[g] / s) * inv_scale
            else:
                f = 0.0
            for k in range(ptr[g], ptr[g + 1]):
                i = index[k]
                out[i] = fmax(x[i], 0.0) * f


def group_rank1_apply(const double[::1] y, const idx_t[::1] index, const idx_t[::1] ptr,
                      const double[::1] what, const double[::1] coef, double[::1] out):
    """out += coef[g] * what_G * <what_G, y_G> for every group with nonzero coef."""
    cdef Py_ssize_t g, k, ng = ptr.shape[0] - 1
    cdef idx_t i
    cdef double s
    with nogil:
        for g in range(ng):
            if coef[g] == 0.0:
                continue
            s = 0.0
            for k in range(ptr[g], ptr[g + 1]):
                i = index[k]
                s = s + what[i] * y[i]
            s = s * coef[g]
            for k in range(ptr[g], ptr[g + 1]):
                i = index[k]
                out[i] = out[i] + s * what[i]


def group_sq_norms(const double[::1] x, const idx_t[::1] index, const idx_t[::1] ptr, double[::1] out):
    cdef Py_ssize_t g, k, ng = ptr.shape[0] - 1
    cdef double s, t
    with nogil:
        for g in range(ng):
            s = 0.0
            for k in range(ptr[g], ptr[g + 1]):
                t = x[index[k]]
                s = s + t * t
            out[g] = s
