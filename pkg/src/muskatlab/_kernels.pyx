# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled O(N^2) alpha-sums over on-grid offsets.

Every routine returns, for each target node ``i``, the sum over all other
nodes ``n`` of a pair term depending on ``alpha = (i - n) h``. Terms are
written into a per-thread row buffer and reduced by a fixed blocked pairwise
tree, so the result does not depend on the thread count.
"""
import numpy as np

from cython.parallel cimport parallel, prange
from libc.math cimport atan, log1p
from libc.stdlib cimport free, malloc

DEF BLOCK = 64


cdef inline double _pairwise(double *terms, double *blocks, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t nb = (n + BLOCK - 1) // BLOCK
    cdef Py_ssize_t k, j, lo, hi, m
    cdef double s
    for k in range(nb):
        lo = k * BLOCK
        hi = lo + BLOCK
        if hi > n:
            hi = n
        s = 0.0
        for j in range(lo, hi):
            s = s + terms[j]
        blocks[k] = s
    m = nb
    while m > 1:
        for k in range(m // 2):
            blocks[k] = blocks[2 * k] + blocks[2 * k + 1]
        if m % 2:
            blocks[m // 2] = blocks[m - 1]
        m = (m + 1) // 2
    return blocks[0]


def velocity_sum(const double[::1] f, const double[::1] df, double h, double beta,
                 const double[::1] pw, int nthreads=1):
    """Sum of ``(df_i - df_n) w/alpha / (1 + ((f_i - f_n) w/alpha + beta)^2)``.

    ``pw[d]`` is the regularizing weight ``|d h|^eps`` (all ones for eps = 0).
    """
    cdef Py_ssize_t N = f.shape[0]
    cdef Py_ssize_t nb = (N + BLOCK - 1) // BLOCK
    out_arr = np.empty(N, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, n, d
    cdef double *terms
    cdef double *blocks
    cdef double inv, D, fi, dfi
    with nogil, parallel(num_threads=nthreads):
        terms = <double *> malloc(N * sizeof(double))
        blocks = <double *> malloc(nb * sizeof(double))
        for i in prange(N, schedule='static'):
            fi = f[i]
            dfi = df[i]
            for n in range(N):
                d = i - n
                if d == 0:
                    terms[n] = 0.0
                else:
                    if d > 0:
                        inv = pw[d] / (d * h)
                    else:
                        inv = -pw[-d] / (-d * h)
                    D = (fi - f[n]) * inv + beta
                    terms[n] = (dfi - df[n]) * inv / (1.0 + D * D)
            out[i] = _pairwise(terms, blocks, N)
        free(terms)
        free(blocks)
    return out_arr


def flux_sum(const double[::1] f, double h, int nthreads=1):
    """Sum of ``arctan((f_i - f_n) / alpha)``."""
    cdef Py_ssize_t N = f.shape[0]
    cdef Py_ssize_t nb = (N + BLOCK - 1) // BLOCK
    out_arr = np.empty(N, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, n, d
    cdef double *terms
    cdef double *blocks
    cdef double fi
    with nogil, parallel(num_threads=nthreads):
        terms = <double *> malloc(N * sizeof(double))
        blocks = <double *> malloc(nb * sizeof(double))
        for i in prange(N, schedule='static'):
            fi = f[i]
            for n in range(N):
                d = i - n
                if d == 0:
                    terms[n] = 0.0
                else:
                    terms[n] = atan((fi - f[n]) / (d * h))
            out[i] = _pairwise(terms, blocks, N)
        free(terms)
        free(blocks)
    return out_arr


def lambda_sum(const double[::1] f, const double[::1] q, int nthreads=1):
    """Sum of ``(f_i - f_n) q[|i - n|]`` with ``q[d] = |d h|^-(1+s)``."""
    cdef Py_ssize_t N = f.shape[0]
    cdef Py_ssize_t nb = (N + BLOCK - 1) // BLOCK
    out_arr = np.empty(N, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, n, d
    cdef double *terms
    cdef double *blocks
    cdef double fi
    with nogil, parallel(num_threads=nthreads):
        terms = <double *> malloc(N * sizeof(double))
        blocks = <double *> malloc(nb * sizeof(double))
        for i in prange(N, schedule='static'):
            fi = f[i]
            for n in range(N):
                d = i - n
                if d < 0:
                    d = -d
                terms[n] = (fi - f[n]) * q[d]
            out[i] = _pairwise(terms, blocks, N)
        free(terms)
        free(blocks)
    return out_arr


def energy_sum(const double[::1] f, double h, int nthreads=1):
    """Sum of ``log(1 + ((f_i - f_n) / alpha)^2)``."""
    cdef Py_ssize_t N = f.shape[0]
    cdef Py_ssize_t nb = (N + BLOCK - 1) // BLOCK
    out_arr = np.empty(N, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, n, d
    cdef double *terms
    cdef double *blocks
    cdef double fi, q
    with nogil, parallel(num_threads=nthreads):
        terms = <double *> malloc(N * sizeof(double))
        blocks = <double *> malloc(nb * sizeof(double))
        for i in prange(N, schedule='static'):
            fi = f[i]
            for n in range(N):
                d = i - n
                if d == 0:
                    terms[n] = 0.0
                else:
                    q = (fi - f[n]) / (d * h)
                    terms[n] = log1p(q * q)
            out[i] = _pairwise(terms, blocks, N)
        free(terms)
        free(blocks)
    return out_arr
