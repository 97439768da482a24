"""Reference kernels on numpy/scipy, used when the compiled core is absent.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and the same floating-point summation order (row-major CSR traversal).
"""

import numpy as np
import scipy.sparse as sp


def make_operator(n, indptr, indices, data):
    return sp.csr_matrix((data, indices, indptr), shape=(n, n))


def matmat(op, X):
    return np.ascontiguousarray(op @ X)


def cheb_stack(op, R, K):
    """Return ``T[k] = T_k(op) @ R`` for k = 0..K as a (K+1, n, c) array."""
    T = np.empty((K + 1,) + R.shape)
    T[0] = R
    if K >= 1:
        T[1] = op @ R
    for k in range(2, K + 1):
        T[k] = 2.0 * (op @ T[k - 1]) - T[k - 2]
    return T


def cheb_apply(op, R, coef):
    """Sum_k coef[k] * (T_k(op) @ R) with per-column coefficients, coef (K+1, c)."""
    K = coef.shape[0] - 1
    out = coef[0] * R
    if K == 0:
        return out
    prev = R
    cur = op @ R
    out += coef[1] * cur
    for k in range(2, K + 1):
        nxt = 2.0 * (op @ cur) - prev
        out += coef[k] * nxt
        prev, cur = cur, nxt
    return out


def segment_max(X, offsets):
    """Column-wise max per node segment and the first row attaining it."""
    starts = offsets[:-1]
    vals = np.maximum.reduceat(X, starts, axis=0)
    counts = np.diff(offsets)
    owner = np.repeat(np.arange(len(counts)), counts)
    rows = np.arange(X.shape[0])[:, None]
    hit = np.where(X == vals[owner], rows, X.shape[0])
    arg = np.minimum.reduceat(hit, starts, axis=0)
    return vals, arg
