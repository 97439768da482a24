# Compiled twins of the kernels in _fallback.py. Same signatures, same
# row-major CSR summation order.

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t idx_t


cdef class CSROperator:
    cdef public Py_ssize_t n
    cdef public object indptr
    cdef public object indices
    cdef public object data

    def __init__(self, Py_ssize_t n, indptr, indices, data):
        self.n = n
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.float64)


def make_operator(n, indptr, indices, data):
    return CSROperator(n, indptr, indices, data)


cdef void _spmm(const idx_t[::1] indptr, const idx_t[::1] indices,
                const double[::1] data, const double[:, ::1] X,
                double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = out.shape[0], c = out.shape[1]
    cdef Py_ssize_t i, jj, j, col
    cdef double w
    for i in range(n):
        for col in range(c):
            out[i, col] = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            w = data[jj]
            for col in range(c):
                out[i, col] += w * X[j, col]


cdef void _cheb_step(const idx_t[::1] indptr, const idx_t[::1] indices,
                     const double[::1] data, const double[:, ::1] cur,
                     const double[:, ::1] prev, double[:, ::1] out,
                     double[::1] acc) noexcept nogil:
    # out = 2 * (A @ cur) - prev
    cdef Py_ssize_t n = out.shape[0], c = out.shape[1]
    cdef Py_ssize_t i, jj, j, col
    cdef double w
    for i in range(n):
        for col in range(c):
            acc[col] = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            w = data[jj]
            for col in range(c):
                acc[col] += w * cur[j, col]
        for col in range(c):
            out[i, col] = 2.0 * acc[col] - prev[i, col]


def matmat(CSROperator op, X):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    out = np.empty((op.n, Xv.shape[1]))
    cdef double[:, ::1] ov = out
    cdef const idx_t[::1] ip = op.indptr
    cdef const idx_t[::1] ix = op.indices
    cdef const double[::1] dv = op.data
    with nogil:
        _spmm(ip, ix, dv, Xv, ov)
    return out


def cheb_stack(CSROperator op, R, int K):
    R = np.ascontiguousarray(R, dtype=np.float64)
    cdef Py_ssize_t n = R.shape[0], c = R.shape[1]
    T = np.empty((K + 1, n, c))
    cdef double[:, :, ::1] Tv = T
    cdef const idx_t[::1] ip = op.indptr
    cdef const idx_t[::1] ix = op.indices
    cdef const double[::1] dv = op.data
    cdef double[::1] acc = np.empty(c)
    cdef int k
    T[0] = R
    if K >= 1:
        with nogil:
            _spmm(ip, ix, dv, Tv[0], Tv[1])
    for k in range(2, K + 1):
        with nogil:
            _cheb_step(ip, ix, dv, Tv[k - 1], Tv[k - 2], Tv[k], acc)
    return T


def cheb_apply(CSROperator op, R, coef):
    R = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[:, ::1] cf = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t n = R.shape[0], c = R.shape[1]
    cdef int K = cf.shape[0] - 1
    cdef const idx_t[::1] ip = op.indptr
    cdef const idx_t[::1] ix = op.indices
    cdef const double[::1] dv = op.data
    cdef const double[:, ::1] Rv = R
    out = np.empty((n, c))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, col
    cdef int k
    for i in range(n):
        for col in range(c):
            ov[i, col] = cf[0, col] * Rv[i, col]
    if K == 0:
        return out
    bufs = np.empty((3, n, c))
    cdef double[:, :, ::1] b = bufs
    cdef double[::1] acc = np.empty(c)
    cdef int p0 = 0, p1 = 1, p2 = 2, tmp
    b[0, :, :] = Rv
    with nogil:
        _spmm(ip, ix, dv, b[0], b[1])
        for i in range(n):
            for col in range(c):
                ov[i, col] += cf[1, col] * b[1, i, col]
        for k in range(2, K + 1):
            _cheb_step(ip, ix, dv, b[p1], b[p0], b[p2], acc)
            for i in range(n):
                for col in range(c):
                    ov[i, col] += cf[k, col] * b[p2, i, col]
            tmp = p0
            p0 = p1
            p1 = p2
            p2 = tmp
    return out


def segment_max(X, offsets):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const idx_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t B = off.shape[0] - 1, c = Xv.shape[1]
    vals = np.empty((B, c))
    arg = np.empty((B, c), dtype=np.int64)
    cdef double[:, ::1] vv = vals
    cdef idx_t[:, ::1] av = arg
    cdef Py_ssize_t g, i, col
    cdef double x
    with nogil:
        for g in range(B):
            for col in range(c):
                vv[g, col] = Xv[off[g], col]
                av[g, col] = off[g]
            for i in range(off[g] + 1, off[g + 1]):
                for col in range(c):
                    x = Xv[i, col]
                    if x > vv[g, col]:
                        vv[g, col] = x
                        av[g, col] = i
    return vals, arg
