"""Graph Fourier transform, Chebyshev filters and a dense spectral oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bankgcn import kernels
from bankgcn.errors import DimensionError, DomainError, OracleSizeError
from bankgcn.graph import _check_rows, as_graph, dense_laplacian

ORACLE_LIMIT = 512
_CLAMP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Eigenpairs of the normalized Laplacian, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self):
        return len(self.eigenvalues)


@dataclass(frozen=True, eq=False)
class FilterCoeffs:
    """Chebyshev coefficients ``alpha[0..K]`` of one filter."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.array(self.alpha, dtype=np.float64).ravel()
        if a.size == 0:
            raise DomainError("a filter needs at least one coefficient")
        if not np.all(np.isfinite(a)):
            raise DomainError("filter coefficients must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def K(self):
        return len(self.alpha) - 1


def _coeffs(c):
    return c if isinstance(c, FilterCoeffs) else FilterCoeffs(c)


def eig_laplacian(g, limit=ORACLE_LIMIT):
    """Dense eigendecomposition ``L = U diag(lam) U^T`` (diagnostic path)."""
    g = as_graph(g)
    if g.n > limit:
        raise OracleSizeError(f"graph has {g.n} nodes, oracle limit is {limit}")
    L = dense_laplacian(g)
    lam, U = np.linalg.eigh(L)
    lam = np.where(np.abs(lam) <= _CLAMP_TOL, 0.0, lam)
    lam = np.where(np.abs(lam - 2.0) <= _CLAMP_TOL, 2.0, lam)
    return SpectralBasis(lam, U)


def _check_basis(basis, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != basis.n:
        raise DimensionError(f"signal length {x.shape[0]} does not match basis size {basis.n}")
    return x


def gft(basis, x):
    """Spectrum ``xhat_k = sum_m x(v_m) u_k(v_m)``; works column-wise on matrices."""
    x = _check_basis(basis, x)
    return basis.eigenvectors.T @ x


def igft(basis, xhat):
    """Inverse transform ``x(v_m) = sum_k xhat_k u_k(v_m)``."""
    xhat = _check_basis(basis, xhat)
    return basis.eigenvectors @ xhat


def cheb_eval(coeffs, lam):
    """Vectorized frequency response ``sum_k alpha_k T_k(lam - 1)``."""
    alpha = _coeffs(coeffs).alpha
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam < 0.0) or np.any(lam > 2.0) or np.any(np.isnan(lam)):
        raise DomainError("frequency must lie in [0, 2]")
    mu = lam - 1.0
    t_prev = np.ones_like(mu)
    out = alpha[0] * t_prev
    if len(alpha) == 1:
        return out
    t_cur = mu
    out = out + alpha[1] * t_cur
    for k in range(2, len(alpha)):
        t_prev, t_cur = t_cur, 2.0 * mu * t_cur - t_prev
        out = out + alpha[k] * t_cur
    return out


def cheb_eval_scalar(coeffs, lam):
    """Frequency response of a Chebyshev filter at one eigenvalue in [0, 2]."""
    return float(cheb_eval(coeffs, float(lam)))


def cheb_filter_apply(g, coeffs, R):
    """Filter every column of ``R`` by ``sum_k alpha_k T_k(L - I)``.

    Uses K sparse products via the three-term recurrence.
    """
    g = as_graph(g)
    alpha = _coeffs(coeffs).alpha
    R, squeeze = _check_rows(g, R)
    coef = np.repeat(alpha[:, None], R.shape[1], axis=1)
    out = kernels.cheb_apply(g.operator(), R, coef)
    return out[:, 0] if squeeze else out


def spectral_filter_oracle(basis, coeffs, R):
    """Exact ``U g(Lambda) U^T R`` from the dense eigendecomposition."""
    R = _check_basis(basis, R)
    response = cheb_eval(coeffs, basis.eigenvalues)
    U = basis.eigenvectors
    if R.ndim == 1:
        return U @ (response * (U.T @ R))
    return U @ (response[:, None] * (U.T @ R))


def frequency_response_grid(coeffs, num_points):
    """Uniform samples ``(lam, g(lam))`` over [0, 2], endpoints included."""
    if num_points < 2:
        raise DomainError("num_points must be at least 2")
    lam = np.linspace(0.0, 2.0, int(num_points))
    resp = cheb_eval(coeffs, lam)
    return [(float(a), float(b)) for a, b in zip(lam, resp)]
