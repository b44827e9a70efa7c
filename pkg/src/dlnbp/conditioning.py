"""Condition measures of the nullspace: chi, script_K and C_A.

For B (k x N) of full row rank, chi_B is the supremum over positive diagonal
D of ||(B D B^T)^{-1} B D||.  The matrix (B D B^T)^{-1} B D is a convex
combination, with weights proportional to det(B_J)^2 prod_{j in J} d_j, of
the matrices that place B_J^{-T} in the columns J, over nonsingular k-column
submatrices B_J.  Since ||B_J^{-T}|| = ||B_J^{-1}||,

    chi_B = max_J ||B_J^{-1}||,

attained in the limit where D concentrates on one basis J.  ``chi_sample``
evaluates the defining expression at random D as an independent check.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ProblemSizeError, RankDeficientError
from .linalg import as_matrix, null_projector, nullspace_basis, svd_summary

MAX_SIGN_N = 20


def _bases(B, tol=1e-12):
    k, N = B.shape
    for J in itertools.combinations(range(N), k):
        BJ = B[:, J]
        s = np.linalg.svd(BJ, compute_uv=False)
        if s[-1] > tol * max(1.0, s[0]):
            yield J, BJ


def _full_row_rank(B):
    B = as_matrix(B)
    if svd_summary(B).rank < B.shape[0]:
        raise RankDeficientError("chi is defined for matrices of full row rank")
    return B


def chi_certificate(B):
    """List of (column subset J, ||B_J^{-1}||) over all nonsingular bases."""
    B = _full_row_rank(B)
    return [(J, float(np.linalg.norm(np.linalg.inv(BJ), 2))) for J, BJ in _bases(B)]


def chi_constant(B):
    """chi_B = sup_D ||(B D B^T)^{-1} B D||, computed as max_J ||B_J^{-1}||."""
    return max(v for _, v in chi_certificate(B))


def chi_bar(B):
    """sup_D ||B^T (B D B^T)^{-1} B D|| = max_J ||B_J^{-1} B||.

    Unlike chi_B this variant depends only on the row space of B, so it is
    invariant under B -> Q B for any nonsingular Q.
    """
    B = _full_row_rank(B)
    return max(float(np.linalg.norm(np.linalg.solve(BJ, B), 2)) for _, BJ in _bases(B))


def weighted_operator(B, d):
    """(B D B^T)^{-1} B D for the positive diagonal D = diag(d)."""
    B = as_matrix(B)
    BD = B * np.asarray(d, dtype=float)
    return np.linalg.solve(BD @ B.T, BD)


def chi_sample(B, n_samples=100_000, seed=0, log10_range=8.0, batch=2000):
    """Largest ||(B D B^T)^{-1} B D|| over random D, log-uniform in 10^[-r, r]."""
    B = _full_row_rank(B)
    k, N = B.shape
    rng = np.random.default_rng(seed)
    best = 0.0
    done = 0
    while done < n_samples:
        n = min(batch, n_samples - done)
        d = 10.0 ** rng.uniform(-log10_range, log10_range, size=(n, N))
        # Scale each D so its largest entry is 1; the operator is scale-free.
        d /= d.max(axis=1, keepdims=True)
        BD = B[None, :, :] * d[:, None, :]
        G = BD @ B.T
        ops = np.linalg.solve(G, BD)
        norms = np.linalg.norm(ops, ord=2, axis=(1, 2))
        best = max(best, float(np.max(norms)))
        done += n
    return best


def script_K(A, basis=None):
    """1 if Null(A) is trivial, otherwise chi of (orthonormal nullspace basis)^T plus 1."""
    A = as_matrix(A)
    B = nullspace_basis(A) if basis is None else np.asarray(basis, dtype=float)
    if B.shape[1] == 0:
        return 1.0
    return chi_constant(B.T) + 1.0


def _sign_vectors(N):
    """All s in {-1, 1}^N with s_1 = +1 (s and -s give the same terms)."""
    for rest in itertools.product((1.0, -1.0), repeat=N - 1):
        yield np.array((1.0,) + rest)


def c_A(A, return_argmax=False):
    """max over sign vectors s with P s != 0 of script_K([A; s^T]) / ||P s||, P = P_Null(A).

    Zero when Null(A) is trivial.  Exhaustive over 2^(N-1) sign vectors.
    """
    A = as_matrix(A)
    N = A.shape[1]
    if N > MAX_SIGN_N:
        raise ProblemSizeError(f"sign enumeration limited to N <= {MAX_SIGN_N}")
    P = null_projector(A)
    if not np.any(np.abs(P) > 1e-12):
        return (0.0, None) if return_argmax else 0.0
    best, arg = 0.0, None
    for s in _sign_vectors(N):
        ps = float(np.linalg.norm(P @ s))
        if ps <= 1e-12 * math.sqrt(N):
            continue
        val = script_K(np.vstack([A, s])) / ps
        if val > best:
            best, arg = val, s
    return (best, arg) if return_argmax else best


def max_script_K_augmented(A):
    """max over all s in {-1, 1}^N of script_K([A; s^T])."""
    A = as_matrix(A)
    N = A.shape[1]
    if N > MAX_SIGN_N:
        raise ProblemSizeError(f"sign enumeration limited to N <= {MAX_SIGN_N}")
    return max(script_K(np.vstack([A, s])) for s in _sign_vectors(N))


def gm_constant(A):
    """sqrt(N) (max_s script_K([A; s^T]) + 1): bound on ||m* - g*|| / alpha^p."""
    A = as_matrix(A)
    return math.sqrt(A.shape[1]) * (max_script_K_augmented(A) + 1.0)


def qm_bound(A, y, p, alpha, cA=None):
    """Upper bound on ||q* - m*||.

    For p > 2 this is (C_A N p)^(p/(p-2)) alpha^p.  For p = 2 it is
    N M (2 e alpha^2 / M)^(1 / (C_A sqrt N)) with M = 2 e sqrt(N) |y| / sigma_min.
    """
    A = as_matrix(A)
    N = A.shape[1]
    cA = c_A(A) if cA is None else cA
    if cA == 0:
        return 0.0
    if p > 2:
        return (cA * N * p) ** (p / (p - 2.0)) * alpha ** p
    M = 2.0 * math.e * math.sqrt(N) * float(np.linalg.norm(y)) / svd_summary(A).sigma_min
    return N * M * (2.0 * math.e * alpha ** 2 / M) ** (1.0 / (cA * math.sqrt(N)))


def lipschitz_constant(A, a, b, p, alpha):
    """Lipschitz constant of z -> V_p(A, z) on the segment between a and b.

    1/(2 sigma_min) (sqrt(N) max(|a|, |b|) / (alpha^p sigma_min) + 2)^((2p-2)/p).
    """
    A = as_matrix(A)
    N = A.shape[1]
    smin = svd_summary(A).sigma_min
    r = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)))
    return (math.sqrt(N) * r / (alpha ** p * smin) + 2.0) ** ((2 * p - 2) / p) / (2.0 * smin)


def k_lemma_triple(A, u, d, w=None):
    """Build v with P D (u + P v) = 0 from (u, D) and the nullspace basis B.

    The condition fixes B^T v = -(B^T D B)^{-1} B^T D u; ``w`` adds an arbitrary
    component of v orthogonal to the nullspace.  Returns (v, u + P v).
    """
    A = as_matrix(A)
    B = nullspace_basis(A)
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    if B.shape[1] == 0:
        return np.zeros_like(u) if w is None else np.asarray(w, dtype=float), u.copy()
    c = -np.linalg.solve((B.T * d) @ B, B.T @ (d * u))
    v = B @ c
    if w is not None:
        w = np.asarray(w, dtype=float)
        v = v + (w - B @ (B.T @ w))
    return v, u + B @ (B.T @ v)


@dataclass
class ConditionReport:
    chi: float
    script_K: float
    c_A: float
    certificate: list = field(default_factory=list)

    def to_dict(self):
        return {"chi": self.chi, "script_K": self.script_K, "c_A": self.c_A,
                "certificate": [{"columns": list(J), "value": v} for J, v in self.certificate]}


def condition_report(A, with_c_A=True):
    """chi of the nullspace basis, script_K(A) and C_A with the attaining bases."""
    A = as_matrix(A)
    B = nullspace_basis(A)
    if B.shape[1] == 0:
        chi, cert = 0.0, []
        K = 1.0
    else:
        cert = chi_certificate(B.T)
        chi = max(v for _, v in cert)
        K = chi + 1.0
    cA = c_A(A) if with_c_A else float("nan")
    return ConditionReport(chi=chi, script_K=K, c_A=cA, certificate=cert)
