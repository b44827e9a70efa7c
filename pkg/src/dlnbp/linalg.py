"""Small dense linear algebra: singular values, thin QR, nullspace bases."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInputError


def as_matrix(A):
    """Return ``A`` as a finite 2-D float array, raising on bad input."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[np.newaxis, :]
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInputError(f"expected a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    return A


def default_tol(A, sigma_max=None):
    if sigma_max is None:
        sigma_max = np.linalg.norm(A, 2) if A.size else 0.0
    return max(A.shape) * sigma_max * 1e-12


@dataclass(frozen=True)
class SvdSummary:
    singular_values: np.ndarray
    rank: int

    @property
    def sigma_max(self):
        return float(self.singular_values[0])

    @property
    def sigma_min(self):
        """Smallest of the first min(m, N) singular values."""
        return float(self.singular_values[-1])

    @property
    def sigma_min_nonzero(self):
        """Smallest singular value that counts toward the rank."""
        if self.rank == 0:
            return 0.0
        return float(self.singular_values[self.rank - 1])


def svd_summary(A, tol=None):
    """Singular values (non-increasing) and numerical rank of ``A``.

    The rank counts singular values strictly above ``tol``; the default
    tolerance is ``max(m, N) * sigma_1 * 1e-12``.
    """
    A = as_matrix(A)
    s = np.linalg.svd(A, compute_uv=False)
    if tol is None:
        tol = default_tol(A, s[0])
    return SvdSummary(singular_values=s, rank=int(np.sum(s > tol)))


def thin_qr(A, tol=None):
    """Thin QR factorization restricted to the numerical column space.

    Returns ``Q`` (m x r) with orthonormal columns spanning range(A) and
    ``R = Q.T @ A`` (r x N), where r is the numerical rank.  Column pivoting
    is used to detect the rank; signs are fixed so the pivoted diagonal of
    ``R`` is positive.
    """
    A = as_matrix(A)
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if tol is None:
        tol = default_tol(A, d[0] if d.size else 0.0)
    r = int(np.sum(d > tol))
    if r == 0:
        raise InvalidInputError("zero matrix has no column space")
    signs = np.sign(np.diag(R)[:r])
    signs[signs == 0] = 1.0
    Q = Q[:, :r] * signs
    # One reorthogonalization pass keeps Q.T Q = I to working precision.
    Q, R2 = np.linalg.qr(Q)
    Q = Q * np.sign(np.diag(R2))
    return Q, Q.T @ A


def nullspace_basis(A, tol=None):
    """Orthonormal basis of Null(A) as the columns of an N x (N - rank) array."""
    A = as_matrix(A)
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    if tol is None:
        tol = default_tol(A, s[0])
    r = int(np.sum(s > tol))
    return Vt[r:].T.copy()


def null_projector(A, tol=None):
    """Orthogonal projector onto Null(A)."""
    B = nullspace_basis(A, tol)
    return B @ B.T
