# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled face-sweep kernels.

Loop-for-loop twin of ``mhdflow._kernels_py``; produces bit-identical
arrays in the same entry order. See that module for the layout contracts.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

IMPL = "cython"


def transport_matrix_coo(double[::1] diag0,
                         long[::1] if_p, long[::1] if_n,
                         double[::1] adv, double[::1] dif,
                         long[::1] out_cell, double[::1] out_coef):
    cdef Py_ssize_t n = diag0.shape[0]
    cdef Py_ssize_t nf = if_p.shape[0]
    cdef Py_ssize_t nout = out_cell.shape[0]
    rows_arr = np.empty(n + 4 * nf + nout, dtype=np.int64)
    cols_arr = np.empty(n + 4 * nf + nout, dtype=np.int64)
    vals_arr = np.empty(n + 4 * nf + nout, dtype=np.float64)
    cdef long[::1] rows = rows_arr
    cdef long[::1] cols = cols_arr
    cdef double[::1] vals = vals_arr
    cdef Py_ssize_t i, k, base
    cdef double a, aplus, aminus, d

    for i in range(n):
        rows[i] = i
        cols[i] = i
        vals[i] = diag0[i]
    for k in range(nf):
        a = adv[k]
        aplus = a if a > 0.0 else 0.0
        aminus = -a if a < 0.0 else 0.0
        d = dif[k]
        base = n + 4 * k
        rows[base] = if_p[k];     cols[base] = if_p[k];     vals[base] = aplus + d
        rows[base + 1] = if_p[k]; cols[base + 1] = if_n[k]; vals[base + 1] = -(aminus + d)
        rows[base + 2] = if_n[k]; cols[base + 2] = if_n[k]; vals[base + 2] = aminus + d
        rows[base + 3] = if_n[k]; cols[base + 3] = if_p[k]; vals[base + 3] = -(aplus + d)
    base = n + 4 * nf
    for k in range(nout):
        rows[base + k] = out_cell[k]
        cols[base + k] = out_cell[k]
        vals[base + k] = out_coef[k]
    return rows_arr, cols_arr, vals_arr


def mass_fluxes(double[::1] c_new,
                long[::1] if_p, long[::1] if_n,
                double[::1] adv, double[::1] dif):
    cdef Py_ssize_t nf = if_p.shape[0]
    out_arr = np.empty(nf, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k
    cdef double a, cp, cn

    for k in range(nf):
        a = adv[k]
        cp = c_new[if_p[k]]
        cn = c_new[if_n[k]]
        out[k] = (a if a > 0.0 else 0.0) * cp \
            - (-a if a < 0.0 else 0.0) * cn + dif[k] * (cp - cn)
    return out_arr


def convection_matrix_coo(double[::1] F,
                          long[::1] if_p, long[::1] if_n,
                          long[::1] out_cell, double[::1] out_flux):
    cdef Py_ssize_t nf = if_p.shape[0]
    cdef Py_ssize_t nout = out_cell.shape[0]
    rows_arr = np.empty(2 * nf + nout, dtype=np.int64)
    cols_arr = np.empty(2 * nf + nout, dtype=np.int64)
    vals_arr = np.empty(2 * nf + nout, dtype=np.float64)
    cdef long[::1] rows = rows_arr
    cdef long[::1] cols = cols_arr
    cdef double[::1] vals = vals_arr
    cdef Py_ssize_t k, base
    cdef long up
    cdef double f

    for k in range(nf):
        f = F[k]
        up = if_p[k] if f >= 0.0 else if_n[k]
        base = 2 * k
        rows[base] = if_p[k];     cols[base] = up;     vals[base] = f
        rows[base + 1] = if_n[k]; cols[base + 1] = up; vals[base + 1] = -f
    base = 2 * nf
    for k in range(nout):
        rows[base + k] = out_cell[k]
        cols[base + k] = out_cell[k]
        vals[base + k] = out_flux[k]
    return rows_arr, cols_arr, vals_arr


def pair_matrix_coo(double[::1] q, long[::1] if_p, long[::1] if_n):
    cdef Py_ssize_t nf = if_p.shape[0]
    rows_arr = np.empty(4 * nf, dtype=np.int64)
    cols_arr = np.empty(4 * nf, dtype=np.int64)
    vals_arr = np.empty(4 * nf, dtype=np.float64)
    cdef long[::1] rows = rows_arr
    cdef long[::1] cols = cols_arr
    cdef double[::1] vals = vals_arr
    cdef Py_ssize_t k, base
    cdef double half

    for k in range(nf):
        half = 0.5 * q[k]
        base = 4 * k
        rows[base] = if_p[k];     cols[base] = if_p[k];     vals[base] = -half
        rows[base + 1] = if_p[k]; cols[base + 1] = if_n[k]; vals[base + 1] = half
        rows[base + 2] = if_n[k]; cols[base + 2] = if_n[k]; vals[base + 2] = half
        rows[base + 3] = if_n[k]; cols[base + 3] = if_p[k]; vals[base + 3] = -half
    return rows_arr, cols_arr, vals_arr
