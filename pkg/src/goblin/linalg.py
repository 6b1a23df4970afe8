"""Dense symmetric linear algebra used by the bandit engines.

Everything here works on plain ``numpy.ndarray`` objects.  Symmetric
matrices are returned exactly symmetric (``m[i, j] == m[j, i]`` bitwise).
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import blas
from scipy.sparse.linalg import LinearOperator, svds

log = logging.getLogger(__name__)

ASYMMETRY_RTOL = 1e-9
PD_FLOOR = 1e-12


class NotPositiveDefiniteError(ValueError):
    pass


def _check_symmetric(m):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(np.abs(m).max(initial=0.0), 1.0)
    if np.abs(m - m.T).max(initial=0.0) > ASYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric")
    return m


def symmetrize(m):
    """Return ``(m + m.T) / 2``, which is bitwise symmetric."""
    return 0.5 * (m + m.T)


def eigh(m):
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    m : array_like, shape (n, n)
        Symmetric matrix.  Asymmetry above ``1e-9`` (relative to the largest
        entry) is rejected.

    Returns
    -------
    eigenvalues : ndarray, shape (n,)
        In ascending order.
    eigenvectors : ndarray, shape (n, n)
        Orthonormal columns, ``m == V @ diag(eigenvalues) @ V.T``.
    """
    m = _check_symmetric(m)
    return np.linalg.eigh(symmetrize(m))


def inv_sqrt(m):
    """Inverse square root of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefiniteError
        If any eigenvalue is at or below ``1e-12``.
    """
    lam, vecs = eigh(m)
    if lam[0] <= PD_FLOOR:
        raise NotPositiveDefiniteError(
            f"not positive definite (smallest eigenvalue {lam[0]:.3g})")
    return symmetrize((vecs / np.sqrt(lam)) @ vecs.T)


def sqrtm_psd(m):
    """Square root of a symmetric positive semidefinite matrix."""
    lam, vecs = eigh(m)
    lam = np.clip(lam, 0.0, None)
    return symmetrize((vecs * np.sqrt(lam)) @ vecs.T)


class IncrementalInverse:
    """Running inverse of ``M = I + sum_t v_t v_t^T`` and of ``ln det M``.

    Each :meth:`rank_one_update` costs O(dim**2) time and no extra memory:
    the stored inverse is updated in place with a BLAS rank-one kernel.
    """

    resymmetrize_every = 512

    def __init__(self, dim):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = int(dim)
        self.inv = np.eye(self.dim)
        self.logdet = 0.0
        self.updates = 0

    def rank_one_update(self, v, inv_v=None):
        """Replace ``M`` by ``M + v v^T``.

        ``inv_v`` may carry a precomputed ``M^{-1} v`` (callers that already
        scored ``v`` have it).  Returns the log-determinant increment.
        """
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"vector of length {self.dim} expected, got {v.shape}")
        if not v.any():
            return 0.0
        u = self.inv @ v if inv_v is None else np.asarray(inv_v, dtype=float)
        q = float(v @ u)
        # inv is C-contiguous and symmetric, so its transpose is a Fortran view
        # that dger can overwrite in place.
        out = blas.dger(-1.0 / (1.0 + q), u, u, a=self.inv.T, overwrite_a=True)
        if not np.shares_memory(out, self.inv):
            self.inv = np.ascontiguousarray(out.T)
        inc = float(np.log1p(q))
        self.logdet += inc
        self.updates += 1
        if self.updates % self.resymmetrize_every == 0:
            self.inv = symmetrize(self.inv)
        return inc

    def matrix(self):
        """Dense ``M`` recovered by inverting the stored inverse (testing aid)."""
        return symmetrize(np.linalg.inv(self.inv))

    def copy(self):
        other = IncrementalInverse.__new__(IncrementalInverse)
        other.dim = self.dim
        other.inv = self.inv.copy()
        other.logdet = self.logdet
        other.updates = self.updates
        return other


@dataclass
class PCAResult:
    """Fitted principal subspace.

    ``basis`` has orthonormal columns (original_dim, k); ``projected`` holds
    the centered rows expressed in that basis (rows, k).
    """
    basis: np.ndarray
    projected: np.ndarray
    mean: np.ndarray
    singular_values: np.ndarray
    k: int
    requested_k: int

    @property
    def reduced(self):
        return self.k < self.requested_k


def _fix_signs(basis):
    # Deterministic orientation: largest-magnitude coordinate of each column positive.
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def pca_fit_project(rows, k, rank_rtol=1e-10):
    """Project mean-centered rows onto their top-``k`` principal directions.

    ``rows`` may be dense or a ``scipy.sparse`` matrix; the sparse path never
    densifies the data and centers implicitly.  If fewer than ``k``
    directions carry variance, ``k`` is reduced to the numerical rank and a
    warning is logged (``PCAResult.reduced`` is then true).
    """
    n_rows, dim = rows.shape
    if n_rows < 2:
        raise ValueError("PCA needs at least two rows")
    if k < 1:
        raise ValueError("k must be positive")
    requested = int(k)
    k = min(requested, n_rows, dim)

    if sp.issparse(rows):
        rows = sp.csr_matrix(rows, dtype=float)
        mean = np.asarray(rows.mean(axis=0)).ravel()
        max_rank = min(n_rows, dim)
        if k >= max_rank - 1 or max_rank <= 64:
            return pca_fit_project(rows.toarray(), requested, rank_rtol)
        ones = np.ones(n_rows)
        # outer products keep the shapes right for both (k,) and (k, 1) inputs
        centered = LinearOperator(
            (n_rows, dim), dtype=float,
            matvec=lambda x: rows @ x - np.multiply.outer(ones, mean @ x),
            rmatvec=lambda y: rows.T @ y - np.multiply.outer(mean, y.sum(axis=0)),
        )
        v0 = np.full(min(n_rows, dim), 1.0 / np.sqrt(min(n_rows, dim)))
        _, s, vt = svds(centered, k=k, v0=v0, solver="arpack")
        order = np.argsort(s)[::-1]
        s, vt = s[order], vt[order]
        basis = vt.T
        scale = s[0] if s.size else 0.0
        rank = int(np.sum(s > rank_rtol * max(scale, 1e-300)))
        basis = _fix_signs(basis[:, :rank])
        projected = np.asarray(rows @ basis) - mean @ basis
    else:
        rows = np.asarray(rows, dtype=float)
        mean = rows.mean(axis=0)
        centered = rows - mean
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        scale = s[0] if s.size else 0.0
        rank = int(np.sum(s > rank_rtol * max(scale, 1e-300)))
        basis = _fix_signs(vt[:min(k, rank)].T)
        projected = centered @ basis

    k_used = basis.shape[1]
    if k_used < requested:
        log.warning("PCA: requested %d components, data supports %d", requested, k_used)
    return PCAResult(basis=basis, projected=projected, mean=mean,
                     singular_values=s[:k_used], k=k_used, requested_k=requested)
