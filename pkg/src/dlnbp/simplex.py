"""Two-phase tableau simplex method with Bland's anti-cycling rule.

Solves ``min c^T x  s.t.  A x = b, x >= 0`` for small dense problems.  Bland's
rule makes the pivot sequence, and hence the returned vertex, deterministic.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidInputError


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    basis: list
    iterations: int


class InfeasibleError(ValueError):
    """The equality system has no non-negative solution."""


class UnboundedError(ValueError):
    """The objective is unbounded below on the feasible set."""


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _run(T, basis, ncols, tol, max_iter, it):
    """Iterate on tableau ``T`` (last row: reduced costs, last column: rhs)."""
    m = T.shape[0] - 1
    while True:
        if it >= max_iter:
            raise ConvergenceError("simplex iteration limit reached")
        cost = T[-1, :ncols]
        entering = next((j for j in range(ncols) if cost[j] < -tol), None)
        if entering is None:
            return it
        col = T[:m, entering]
        rows = [i for i in range(m) if col[i] > tol]
        if not rows:
            raise UnboundedError("linear program is unbounded")
        ratios = [T[i, -1] / col[i] for i in rows]
        best = min(ratios)
        ties = [i for i, r in zip(rows, ratios) if r <= best + tol * max(1.0, abs(best))]
        leave = min(ties, key=lambda i: basis[i])
        _pivot(T, leave, entering)
        basis[leave] = entering
        it += 1


def simplex(c, A_eq, b_eq, tol=1e-11, max_iter=10_000):
    """Minimize ``c @ x`` subject to ``A_eq @ x == b_eq`` and ``x >= 0``.

    Returns
    -------
    LPResult
        ``x`` is a basic optimal solution; basic values are recomputed by a
        direct solve with the final basis matrix for accuracy.

    Raises
    ------
    InfeasibleError, UnboundedError
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A_eq, dtype=float)).copy()
    b = np.atleast_1d(np.asarray(b_eq, dtype=float)).copy()
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise InvalidInputError("inconsistent LP dimensions")
    scale = max(1.0, np.max(np.abs(A)), np.max(np.abs(b)))
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # Phase 1: artificial variables n..n+m-1 form the starting basis.
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    it = _run(T, basis, n + m, tol, max_iter, 0)
    if -T[-1, -1] > tol * scale * max(1, m):
        raise InfeasibleError("equality system has no non-negative solution")

    # Drive remaining artificials out of the basis; drop redundant rows.
    keep = []
    for i in range(m):
        if basis[i] >= n:
            cand = [j for j in range(n) if abs(T[i, j]) > tol * scale]
            if cand:
                _pivot(T, i, cand[0])
                basis[i] = cand[0]
                keep.append(i)
        else:
            keep.append(i)
    T = np.vstack([T[keep], T[-1:]])
    basis = [basis[i] for i in keep]
    T = np.delete(T, np.s_[n:n + m], axis=1)

    # Phase 2 with the true costs.
    T[-1, :] = 0.0
    T[-1, :n] = c
    for i, j in enumerate(basis):
        T[-1] -= c[j] * T[i]
    it = _run(T, basis, n, tol, max_iter, it)

    x = np.zeros(n)
    rows = np.array(keep, dtype=int)
    Ab = np.asarray(A_eq, dtype=float).reshape(m, n)[rows][:, basis]
    try:
        xb = np.linalg.solve(Ab, np.asarray(b_eq, dtype=float).reshape(m)[rows])
    except np.linalg.LinAlgError:
        xb = T[:-1, -1]
    x[basis] = np.maximum(xb, 0.0)
    return LPResult(x=x, value=float(c @ x), basis=list(basis), iterations=it)
