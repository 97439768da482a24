"""The filter-bank convolution layer and its diversity regularizer.

A layer projects node features into ``s`` equal-width subspaces, filters
each subspace with its own Chebyshev polynomial of ``L - I`` plus an
identity shortcut, concatenates, applies ReLU and l2-normalizes each row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bankgcn import kernels
from bankgcn.errors import DimensionError
from bankgcn.graph import as_graph
from bankgcn.spectral import FilterCoeffs

NORM_EPS = 1e-12

PER_SUBSPACE = "per-subspace"
PAPER_TABLE = "paper-table"
CONVENTIONS = (PER_SUBSPACE, PAPER_TABLE)


@dataclass(eq=False)
class BankLayerParams:
    """Trainable tensors of one layer.

    ``W`` (d_in x d_out) holds the projections side by side: columns
    ``p*m:(p+1)*m`` with ``m = d_out // s`` are ``W_[p]``. Likewise ``b``.
    ``alpha`` is (s, K+1), row ``p`` being the coefficients of filter ``p``.
    """

    W: np.ndarray
    b: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.W = np.ascontiguousarray(self.W, dtype=np.float64)
        self.b = np.ascontiguousarray(self.b, dtype=np.float64).ravel()
        self.alpha = np.ascontiguousarray(np.atleast_2d(self.alpha), dtype=np.float64)
        if self.W.ndim != 2:
            raise DimensionError("W must be a matrix")
        s = self.alpha.shape[0]
        if s < 1:
            raise DimensionError("need at least one subspace")
        if self.d_out % s:
            raise DimensionError(f"d_out={self.d_out} is not divisible by s={s}")
        if self.b.shape != (self.d_out,):
            raise DimensionError(f"bias length {self.b.shape[0]} != d_out {self.d_out}")
        for name in ("W", "b", "alpha"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DimensionError(f"{name} has non-finite entries")

    @property
    def d_in(self):
        return self.W.shape[0]

    @property
    def d_out(self):
        return self.W.shape[1]

    @property
    def s(self):
        return self.alpha.shape[0]

    @property
    def K(self):
        return self.alpha.shape[1] - 1

    @property
    def width(self):
        """Per-subspace dimension ``d_out // s``."""
        return self.d_out // self.s

    @property
    def proj_W(self):
        m = self.width
        return [self.W[:, p * m : (p + 1) * m] for p in range(self.s)]

    @property
    def proj_b(self):
        m = self.width
        return [self.b[p * m : (p + 1) * m] for p in range(self.s)]

    @property
    def filters(self):
        return [FilterCoeffs(a) for a in self.alpha]

    def column_coefficients(self):
        """(K+1, d_out) array giving every output column its subspace's alpha."""
        return np.repeat(self.alpha.T, self.width, axis=1)

    def copy(self):
        return BankLayerParams(self.W.copy(), self.b.copy(), self.alpha.copy())


def init_bank_layer(d_in, d_out, s, K, rng):
    """Random layer: uniform Glorot-style projections, zero bias, small alpha.

    With a single input channel every output channel gets its own subspace.
    """
    if d_in == 1:
        s = d_out
    if s < 1 or d_out % s:
        raise DimensionError(f"d_out={d_out} is not divisible by s={s}")
    m = d_out // s
    bound = np.sqrt(6.0 / (d_in + m))
    W = rng.uniform(-bound, bound, size=(d_in, d_out))
    b = np.zeros(d_out)
    alpha = rng.uniform(-1.0, 1.0, size=(s, K + 1)) / np.sqrt(K + 1)
    return BankLayerParams(W, b, alpha)


def _check_input(params, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.d_in:
        raise DimensionError(f"input has {X.shape[-1]} columns, layer expects d_in={params.d_in}")
    return np.ascontiguousarray(X)


def subspace_project(params, X):
    """``R_[p] = X W_[p] + b_[p]`` for every subspace."""
    X = _check_input(params, X)
    R = X @ params.W + params.b
    m = params.width
    return [R[:, p * m : (p + 1) * m] for p in range(params.s)]


def l2_normalize_rows(Z):
    norms = np.sqrt(np.einsum("ij,ij->i", Z, Z))
    safe = norms > 0
    out = np.zeros_like(Z)
    out[safe] = Z[safe] / norms[safe, None]
    return out, norms


@dataclass
class LayerCache:
    X: np.ndarray
    T: np.ndarray
    H: np.ndarray
    Y: np.ndarray
    norms: np.ndarray
    coef: np.ndarray
    op: object


def bank_forward_cached(params, g, X):
    """Forward pass keeping the intermediates needed by ``bank_backward``."""
    g = as_graph(g)
    X = _check_input(params, X)
    if X.shape[0] != g.n:
        raise DimensionError(f"input has {X.shape[0]} rows, graph has {g.n} nodes")
    R = X @ params.W + params.b
    op = g.operator()
    T = kernels.cheb_stack(op, R, params.K)
    coef = params.column_coefficients()
    H = np.einsum("knc,kc->nc", T, coef) + R
    Z = np.maximum(H, 0.0)
    Y, norms = l2_normalize_rows(Z)
    return Y, LayerCache(X, T, H, Y, norms, coef, op)


def bank_forward(params, g, X):
    """Node features after one filter-bank convolution, rows of norm 0 or 1."""
    return bank_forward_cached(params, g, X)[0]


def bank_backward(params, cache, dY):
    """Reverse pass: returns ``dX`` and ``{"W", "b", "alpha"}`` gradients."""
    Y, norms = cache.Y, cache.norms
    safe = norms > 0
    proj = np.einsum("ij,ij->i", Y, dY)
    dZ = np.zeros_like(dY)
    dZ[safe] = (dY[safe] - Y[safe] * proj[safe, None]) / norms[safe, None]
    dH = dZ * (cache.H > 0)

    K, s, m = params.K, params.s, params.width
    dcoef = np.einsum("knc,nc->kc", cache.T, dH)
    dalpha = dcoef.reshape(K + 1, s, m).sum(axis=2).T
    # L - I is symmetric, so the adjoint of the filter is the filter itself
    dR = dH + kernels.cheb_apply(cache.op, dH, cache.coef)
    grads = {"W": cache.X.T @ dR, "b": dR.sum(axis=0), "alpha": dalpha}
    return dR @ params.W.T, grads


def _alpha_matrix(filters):
    if isinstance(filters, np.ndarray):
        return np.atleast_2d(np.asarray(filters, dtype=np.float64))
    rows = [f.alpha if isinstance(f, FilterCoeffs) else np.asarray(f, dtype=np.float64) for f in filters]
    if not rows:
        return np.zeros((0, 1))
    return np.vstack(rows)


def _cosine_table(A):
    raw_norms = np.sqrt(np.einsum("ij,ij->i", A, A))
    norms = raw_norms + NORM_EPS
    dots = A @ A.T
    return dots, raw_norms, norms, np.abs(dots) / np.outer(norms, norms)


def diversity_penalty(filters):
    """Largest absolute cosine similarity between any two filters' coefficients.

    Accepts a list of ``FilterCoeffs`` (or vectors) or an (s, K+1) array.
    A single filter has no pairs and scores 0.
    """
    return diversity_penalty_and_grad(filters)[0]


def diversity_penalty_and_grad(filters):
    """Return ``(omega, d omega / d alpha, (p, q))``.

    The gradient flows only through the maximizing pair; ties go to the
    lexicographically smallest ``(p, q)``. ``(p, q)`` is None when s < 2.
    """
    A = _alpha_matrix(filters)
    s = A.shape[0]
    grad = np.zeros_like(A)
    if s < 2:
        return 0.0, grad, None
    dots, raw_norms, norms, cos = _cosine_table(A)
    iu, ju = np.triu_indices(s, k=1)
    k = int(np.argmax(cos[iu, ju]))
    p, q = int(iu[k]), int(ju[k])
    omega = float(min(cos[p, q], 1.0))

    sign = np.sign(dots[p, q])
    den = norms[p] * norms[q]
    grad[p] = sign * A[q] / den
    grad[q] = sign * A[p] / den
    if raw_norms[p] > 0:
        grad[p] -= omega / norms[p] * A[p] / raw_norms[p]
    if raw_norms[q] > 0:
        grad[q] -= omega / norms[q] * A[q] / raw_norms[q]
    return omega, grad, (p, q)


def diversity_tie_gap(filters):
    """Gap between the largest and second-largest pairwise |cos| (inf if s < 3)."""
    A = _alpha_matrix(filters)
    s = A.shape[0]
    if s < 3:
        return np.inf
    cos = _cosine_table(A)[3]
    vals = np.sort(cos[np.triu_indices(s, k=1)])
    return float(vals[-1] - vals[-2])


def bank_layer_param_count(params, convention=PER_SUBSPACE, frozen_filters=False):
    """Trainable parameters in one layer.

    ``per-subspace`` counts every filter's K+1 coefficients; ``paper-table``
    counts K+1 coefficients per layer, the accounting behind the published
    per-layer totals (4160 + K + 1 for a 64 -> 64 layer).
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; choose from {CONVENTIONS}")
    base = params.d_in * params.d_out + params.d_out
    if frozen_filters:
        return base
    if convention == PER_SUBSPACE:
        return base + params.s * (params.K + 1)
    return base + params.K + 1
