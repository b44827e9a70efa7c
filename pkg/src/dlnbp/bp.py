"""Basis pursuit and the regularized points around its solution face.

For an instance (A, y) with A of full row rank:

* ``solve_bp`` returns an l1-minimal solution of A z = y and the value R;
* ``optimal_face`` describes the set U of all l1 minimizers (a face of the
  scaled l1 ball, contained in one signed orthant);
* ``wp_select`` returns the point of U selected in the small-alpha limit
  (maximum entropy for p = 2, maximum sum |z_i|^(2/p) for p > 2);
* ``solve_qstar``, ``solve_mstar``, ``solve_gstar`` minimize Q_p over the
  affine solution set, Q_p over U and G_p over U respectively.
"""

import itertools
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.optimize import lsq_linear

from .errors import ConvergenceError, InvalidInputError, ProblemSizeError, RankDeficientError
from .instances import RegressionInstance
from .linalg import nullspace_basis, svd_summary, thin_qr
from .potentials import G_p, Hyperparams, Q_p, grad_Q_p, hess_Q_p_diag, h_p_inv
from .simplex import simplex

MAX_ENUM_N = 12
# Projected-gradient level accepted when Newton stalls at working precision.
STALL_TOL = 1e-8


def _hp(hp):
    return hp if isinstance(hp, Hyperparams) else Hyperparams(*hp)


def solve_bp(inst):
    """l1-minimal solution of A z = y by simplex on the split z = z+ - z-.

    When the minimizer is not unique the returned vertex is the deterministic
    output of Bland's rule; any element of the face is equally optimal.

    Returns
    -------
    x : ndarray
    R : float
        The minimum l1 norm.
    """
    A, y, N = inst.A, inst.y, inst.N
    res = simplex(np.ones(2 * N), np.hstack([A, -A]), y)
    x = res.x[:N] - res.x[N:]
    return x, float(np.sum(np.abs(x)))


def basic_solutions(A, y, tol=1e-10):
    """All basic solutions of A z = y: z_S = A_S^{-1} y on m-column subsets S."""
    A = np.asarray(A, dtype=float)
    m, N = A.shape
    out = []
    for S in itertools.combinations(range(N), m):
        AS = A[:, S]
        if svd_summary(AS).rank < m:
            continue
        z = np.zeros(N)
        z[list(S)] = np.linalg.solve(AS, y)
        if not any(np.allclose(z, v, atol=tol, rtol=0) for v in out):
            out.append(z)
    return out


@dataclass
class SolutionFace:
    """The set U of l1 minimizers of A z = y.

    ``sign`` is +1 on coordinates that vanish on all of U.  ``vertices`` is
    filled by enumeration (N <= 12); ``points`` always holds face points whose
    average lies in the relative interior of U.
    """

    sign: np.ndarray
    R: float
    A: np.ndarray
    y: np.ndarray
    forced_zeros: tuple
    vertices: list = field(default_factory=list)
    points: list = field(default_factory=list)

    @property
    def augmented_matrix(self):
        return np.vstack([self.A, self.sign])

    @property
    def augmented_rhs(self):
        return np.append(self.y, self.R)

    @property
    def free(self):
        return np.array([i for i in range(len(self.sign)) if i not in set(self.forced_zeros)], dtype=int)

    def interior_point(self):
        return np.mean(self.points, axis=0)

    def contains(self, z, tol=1e-9):
        z = np.asarray(z, dtype=float)
        scale = max(1.0, self.R)
        return bool(
            np.linalg.norm(self.A @ z - self.y) <= tol * scale
            and abs(np.sum(np.abs(z)) - self.R) <= tol * scale
            and np.all(self.sign * z >= -tol * scale)
        )

    def to_dict(self):
        return {
            "sign": self.sign.tolist(),
            "R": self.R,
            "forced_zeros": list(self.forced_zeros),
            "vertices": [v.tolist() for v in self.vertices],
        }


def optimal_face(inst, enumerate_vertices=None, tol=1e-9):
    """Characterize the l1 solution face of (A, y).

    With ``enumerate_vertices`` (default: N <= 12) the face vertices are found
    among the basic solutions.  Otherwise 2N linear programs maximize each
    z_i^+ and z_i^- over the face, which yields the sign vector and the forced
    zeros without listing vertices.
    """
    A, y, N = inst.A, inst.y, inst.N
    _, R = solve_bp(inst)
    scale = max(1.0, R)
    if enumerate_vertices is None:
        enumerate_vertices = N <= MAX_ENUM_N
    if enumerate_vertices:
        if N > MAX_ENUM_N:
            raise ProblemSizeError(f"vertex enumeration limited to N <= {MAX_ENUM_N}")
        verts = [z for z in basic_solutions(A, y) if np.sum(np.abs(z)) <= R + tol * scale]
        if not verts:
            raise ConvergenceError("no basic solution attains the l1 minimum")
        V = np.array(verts)
        pos = np.any(V > tol * scale, axis=0)
        neg = np.any(V < -tol * scale, axis=0)
        points = verts
    else:
        E = np.vstack([np.hstack([A, -A]), np.ones(2 * N)])
        b = np.append(y, R)
        points, pos, neg = [], np.zeros(N, bool), np.zeros(N, bool)
        for j in range(2 * N):
            c = np.zeros(2 * N)
            c[j] = -1.0
            w = simplex(c, E, b).x
            z = w[:N] - w[N:]
            points.append(z)
            pos |= z > tol * scale
            neg |= z < -tol * scale
        verts = []
    if np.any(pos & neg):
        raise ConvergenceError("face points disagree in sign; tolerance too loose")
    sign = np.where(neg, -1.0, 1.0)
    forced = tuple(int(i) for i in np.flatnonzero(~(pos | neg)))
    return SolutionFace(sign, R, A.copy(), y.copy(), forced, verts, points)


# ---------------------------------------------------------------------------
# Smooth convex minimization over the face in w = s * z >= 0 coordinates.


def _face_system(face):
    """Equality system E w = b on the free coordinates of the face."""
    F = face.free
    E = np.vstack([face.A[:, F] * face.sign[F], np.ones(len(F))])
    b = np.append(face.y, face.R)
    return F, E, b


def _lift(face, F, w):
    z = np.zeros(len(face.sign))
    z[F] = face.sign[F] * w
    return z


def _newton_interior(f, w0, B, tol=1e-30, max_iter=200):
    """Damped Newton for ``f`` restricted to w0 + range(B), staying in w > 0.

    ``f(w)`` returns (value, gradient, hessian diagonal).  Once the squared
    Newton decrement is small relative to ``|f|`` full steps are taken without
    a line search (objective differences are no longer resolvable there) until
    the step stalls at working precision.  Returns the final iterate and the
    last squared decrement.
    """
    eps = np.finfo(float).eps
    w = w0.copy()
    lam2 = np.inf
    polish = 0
    for _ in range(max_iter):
        val, g, hd = f(w)
        gc = B.T @ g
        H = (B.T * hd) @ B
        try:
            dc = -np.linalg.solve(H, gc)
        except np.linalg.LinAlgError:
            dc = -np.linalg.lstsq(H, gc, rcond=None)[0]
        dw = B @ dc
        lam2 = float(-gc @ dc)
        if lam2 <= tol:
            return w, lam2
        if lam2 <= 1e-10 * max(1.0, abs(val)) and np.all(w + dw > 0):
            w = w + dw
            polish += 1
            if np.linalg.norm(dw) <= 4 * eps * np.linalg.norm(w) or polish >= 8:
                return w, lam2
            continue
        neg = dw < 0
        step = 1.0
        if np.any(neg):
            step = min(1.0, 0.99 * float(np.min(-w[neg] / dw[neg])))
        while step > 1e-16:
            w_new = w + step * dw
            if np.all(w_new > 0):
                v_new = f(w_new)[0]
                if v_new <= val - 0.25 * step * lam2:
                    break
            step *= 0.5
        else:
            return w, lam2
        w = w_new
    raise ConvergenceError("Newton iteration did not converge", iterate=w)


def _entropy_like(p):
    if p == 2:
        def f(w):
            lw = np.log(w)
            return float(np.sum(w * lw)), lw + 1.0, 1.0 / w
    else:
        a = 2.0 / p

        def f(w):
            wa = w ** a
            return float(-np.sum(wa)), -a * wa / w, a * (1.0 - a) * wa / (w * w)
    return f


def wp_select(inst, p, face=None):
    """The selected l1 minimizer: the unique maximizer over the face of the
    entropy -sum |z| ln |z| (p = 2) or of sum |z_i|^(2/p) (p > 2).

    Coordinates vanishing on the whole face are eliminated first; the
    objective has infinite slope at w_i = 0, so the maximizer lies in the
    relative interior and a feasible damped Newton method finds it.
    """
    p = float(p)
    if p < 2:
        raise InvalidInputError("p must be >= 2")
    if face is None:
        face = optimal_face(inst)
    F, E, b = _face_system(face)
    if len(F) == 0:
        return np.zeros(inst.N)
    w0 = np.abs(face.interior_point()[F])
    B = nullspace_basis(E)
    if B.shape[1] == 0:
        return _lift(face, F, w0)
    w, _ = _newton_interior(_entropy_like(p), w0, B)
    return _lift(face, F, w)


def _barrier_minimize(fobj, face, t0=1.0, factor=10.0, gap_tol=1e-10, inner_tol=1e-20):
    """Log-barrier path following for min fobj(w) over the face with w >= 0.

    Minimizes t f(w) - sum ln w_i for t = t0, 10 t0, ... until the duality
    gap bound n / t falls below ``gap_tol * max(1, |f|)``.
    """
    F, E, b = _face_system(face)
    if len(F) == 0:
        return F, np.zeros(0)
    w = np.abs(face.interior_point()[F])
    B = nullspace_basis(E)
    if B.shape[1] == 0:
        return F, w
    n = len(w)
    t = t0
    for _ in range(100):
        def phi(v, t=t):
            val, g, hd = fobj(v)
            return t * val - np.sum(np.log(v)), t * g - 1.0 / v, t * hd + 1.0 / (v * v)

        w, _ = _newton_interior(phi, w, B, tol=inner_tol)
        if n / t <= gap_tol * max(1.0, abs(fobj(w)[0])):
            return F, w
        t *= factor
    raise ConvergenceError("barrier method did not reach the gap tolerance", iterate=w)


def solve_mstar(inst, hp, face=None, gap_tol=1e-12):
    """m* = argmin Q_p(z) over the l1 solution face (log-barrier interior point)."""
    hp = _hp(hp)
    if face is None:
        face = optimal_face(inst)
    s = hp.scale

    def f(w):
        return Q_p(w, hp) / s, grad_Q_p(w, hp) / s, hess_Q_p_diag(w, hp) / s

    F, w = _barrier_minimize(f, face, gap_tol=gap_tol)
    return _lift(face, F, w)


def solve_gstar(inst, hp, face=None, gap_tol=1e-12):
    """g* = argmin G_p(z) over the l1 solution face (log-barrier interior point).

    Forced-zero coordinates are removed first; on the rest G_p is smooth in
    the interior and the barrier keeps iterates there.
    """
    hp = _hp(hp)
    if face is None:
        face = optimal_face(inst)
    p, s = hp.p, hp.scale

    if p == 2:
        def f(w):
            u = w / s
            return float(np.sum(u * (np.log(u) - 1.0))), np.log(u) / s, 1.0 / (w * s)
    else:
        a = 2.0 / p

        def f(w):
            u = w / s
            ua = u ** a
            return (float(np.sum(u - 0.5 * p * ua)), (1.0 - ua / u) / s,
                    (1.0 - a) * ua / (u * u) / (s * s))

    F, w = _barrier_minimize(f, face, gap_tol=gap_tol)
    return _lift(face, F, w)


# ---------------------------------------------------------------------------
# q*: minimize Q_p over the affine set A z = y.


def solve_qstar(inst, hp, tol=1e-13, max_iter=500, dps=None):
    """q* = argmin Q_p(z) subject to A z = y.

    Damped Newton in nullspace coordinates z = z0 + B c.  With ``dps`` set,
    the result is refined by Newton's method on the dual problem in
    ``dps``-digit arithmetic, which resolves q* when alpha^p is far below
    double precision relative to ||z||.

    Raises
    ------
    ConvergenceError
        With the last iterate attached, if Newton stalls.
    """
    hp = _hp(hp)
    A, y = inst.A, inst.y
    z = np.linalg.lstsq(A, y, rcond=None)[0]
    B = nullspace_basis(A)
    if B.shape[1] == 0:
        return z
    # Continuation in alpha: each solve warm-starts the next, smaller one.
    path = []
    a = hp.alpha
    while a < 0.3:
        path.append(a)
        a *= 10 ** 0.25
    for a in [a] + path[::-1]:
        z = _qstar_newton(z, B, Hyperparams(hp.p, a), tol, max_iter)
    if dps is not None:
        z = qstar_dual_refine(inst, hp, z, dps)
    return z


def _qstar_newton(z, B, hp, tol, max_iter):
    history = []
    for _ in range(max_iter):
        g = grad_Q_p(z, hp)
        gc = B.T @ g
        history.append(float(np.linalg.norm(gc)))
        if history[-1] <= tol:
            return z
        if len(history) > 5 and history[-1] >= history[-6] and history[-1] <= STALL_TOL:
            return z
        hd = np.maximum(hess_Q_p_diag(z, hp), np.finfo(float).tiny)
        # Symmetric diagonal scaling keeps the reduced system solvable when
        # the curvature varies over many orders of magnitude.
        H = (B.T * hd) @ B
        d = np.sqrt(np.diag(H))
        Hs = H / np.outer(d, d)
        try:
            dc = -np.linalg.solve(Hs, gc / d) / d
        except np.linalg.LinAlgError:
            dc = -np.linalg.lstsq(Hs, gc / d, rcond=None)[0] / d
        dz = B @ dc
        val = Q_p(z, hp)
        lam2 = float(-gc @ dc)
        step = 1.0
        while step > 1e-12:
            z_new = z + step * dz
            if Q_p(z_new, hp) <= val - 0.25 * step * lam2:
                break
            if np.linalg.norm(B.T @ grad_Q_p(z_new, hp)) < (1 - 0.25 * step) * history[-1]:
                break
            step *= 0.5
        else:
            # No further progress is resolvable in double precision.
            if history[-1] <= STALL_TOL:
                return z
            raise ConvergenceError("q* Newton line search failed", iterate=z, history=history)
        z = z_new
    raise ConvergenceError("q* Newton did not converge", iterate=z, history=history)


def _mp_h(t, p, k):
    if p == 2:
        return 2 * mpmath.sinh(t)
    return (1 - t) ** (-k) - (1 + t) ** (-k)


def _mp_hprime(t, p, k):
    if p == 2:
        return 2 * mpmath.cosh(t)
    return k * ((1 - t) ** (-k - 1) + (1 + t) ** (-k - 1))


def _mp_H(t, p, k):
    if p == 2:
        return 2 * mpmath.cosh(t) - 2
    c = 2 / (p - 2)
    return (p - 2) / 2 * ((1 - t) ** (-c) + (1 + t) ** (-c)) - (p - 2)


def qstar_dual_refine(inst, hp, z0, dps=40, max_iter=200):
    """Refine q* by Newton on the concave dual in extended precision.

    Optimality of q* means h^{-1}(q*/alpha^p) = A^T lam for some lam, so
    q* = alpha^p h(A^T lam) where lam maximizes
    D(lam) = lam . y - alpha^p sum_i H(a_i . lam) with H' = h.
    """
    hp = _hp(hp)
    with mpmath.workdps(dps):
        p = mpmath.mpf(hp.p)
        k = p / (p - 2) if hp.p != 2 else None
        scale = mpmath.mpf(hp.alpha) ** p
        A = mpmath.matrix(inst.A.tolist())
        y = mpmath.matrix(inst.y.tolist())
        m, N = inst.m, inst.N
        At = A.T

        def inside(t):
            return hp.p == 2 or all(abs(ti) < 1 for ti in t)

        def dual(lam):
            t = At * lam
            if not inside(t):
                return None, t
            val = (lam.T * y)[0] - scale * mpmath.fsum(_mp_H(ti, p, k) for ti in t)
            return val, t

        t0 = h_p_inv(np.asarray(z0) / hp.scale, hp.p)
        lam = mpmath.lu_solve(A * At, A * mpmath.matrix(np.asarray(t0).tolist()))
        val, t = dual(lam)
        while val is None:
            lam = lam / 2
            val, t = dual(lam)
        target = mpmath.mpf(10) ** (-(dps - 12)) * max(1, mpmath.norm(y))
        for _ in range(max_iter):
            z = mpmath.matrix([scale * _mp_h(ti, p, k) for ti in t])
            grad = y - A * z
            if mpmath.norm(grad) <= target:
                break
            hd = [scale * _mp_hprime(ti, p, k) for ti in t]
            H = mpmath.matrix(m, m)
            for a in range(m):
                for b in range(m):
                    H[a, b] = mpmath.fsum(A[a, i] * hd[i] * A[b, i] for i in range(N))
            d = mpmath.lu_solve(H, grad)
            dec = (grad.T * d)[0]
            step = mpmath.mpf(1)
            if mpmath.norm(grad) <= 1e-8 * max(1, mpmath.norm(y)):
                # Quadratic regime: dual values no longer resolve the decrease.
                new_val, new_t = dual(lam + d)
                if new_val is not None:
                    lam, val, t = lam + d, new_val, new_t
                    continue
            while True:
                new_val, new_t = dual(lam + step * d)
                if new_val is not None and new_val >= val + step * dec / 4:
                    break
                step /= 2
                if step < mpmath.mpf(10) ** (-30):
                    raise ConvergenceError("dual refinement line search failed", iterate=z0)
            lam, val, t = lam + step * d, new_val, new_t
        else:
            raise ConvergenceError("dual refinement did not converge", iterate=z0)
        return np.array([float(scale * _mp_h(ti, p, k)) for ti in t])


# ---------------------------------------------------------------------------
# KKT certificates and rank reduction.


@dataclass
class KktCertificate:
    lam: np.ndarray
    mu: np.ndarray
    stationarity_residual: float
    complementarity_residual: float
    feasibility_residual: float = 0.0

    def ok(self, tol=1e-8):
        return max(self.stationarity_residual, self.complementarity_residual,
                   self.feasibility_residual) <= tol


def verify_kkt(x, grad, A_eq=None, b_eq=None, B_ineq=None, z_ineq=None, active_tol=1e-9):
    """Fit KKT multipliers for min f(x) s.t. A_eq x = b_eq, B_ineq x >= z_ineq.

    Solves ``grad = A_eq^T lam + B_ineq^T mu`` in the least-squares sense with
    mu >= 0 supported on the active inequalities, and reports the residuals.
    """
    x = np.asarray(x, dtype=float)
    grad = np.asarray(grad, dtype=float)
    n = x.shape[0]
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, dtype=float))
    B_ineq = np.zeros((0, n)) if B_ineq is None else np.atleast_2d(np.asarray(B_ineq, dtype=float))
    z_ineq = np.zeros(0) if z_ineq is None else np.atleast_1d(np.asarray(z_ineq, dtype=float))
    slack = B_ineq @ x - z_ineq
    active = np.abs(slack) <= active_tol * max(1.0, np.max(np.abs(x), initial=0.0))
    feas = float(np.linalg.norm(A_eq @ x - b_eq)) if A_eq.shape[0] else 0.0
    feas = max(feas, float(np.max(-slack, initial=0.0)))
    me, ka = A_eq.shape[0], int(active.sum())
    lam = np.zeros(me)
    mu = np.zeros(B_ineq.shape[0])
    if me + ka == 0:
        return KktCertificate(lam, mu, float(np.linalg.norm(grad)), 0.0, feas)
    M = np.hstack([A_eq.T, B_ineq[active].T])
    lb = np.concatenate([np.full(me, -np.inf), np.zeros(ka)])
    sol = lsq_linear(M, grad, bounds=(lb, np.inf), method="bvls", tol=1e-15)
    lam = sol.x[:me]
    mu[active] = sol.x[me:]
    stat = float(np.linalg.norm(M @ sol.x - grad))
    comp = float(np.max(np.abs(mu * slack), initial=0.0))
    return KktCertificate(lam, mu, stat, comp, feas)


def qstar_kkt(inst, hp, q):
    """KKT certificate of q as the minimizer of Q_p over A z = y."""
    return verify_kkt(q, grad_Q_p(q, hp), inst.A, inst.y)


def face_kkt(face, point, grad):
    """KKT certificate for minimizing over the face {A z = y, s.z = R, s_i z_i >= 0}."""
    N = len(face.sign)
    Aeq = face.augmented_matrix
    beq = face.augmented_rhs
    if face.forced_zeros:
        Aeq = np.vstack([Aeq, np.eye(N)[list(face.forced_zeros)]])
        beq = np.concatenate([beq, np.zeros(len(face.forced_zeros))])
    return verify_kkt(point, grad, Aeq, beq, np.diag(face.sign), np.zeros(N))


def reduce_rank_deficient(A, y):
    """Replace (A, y) by (Q^T A, Q^T y) with A = Q R a thin QR of rank m'.

    The loss differs only by a constant, so both gradient flows coincide.
    A full-row-rank A is returned unchanged.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if not np.any(A):
        raise InvalidInputError("A = 0 gives trivial dynamics")
    if svd_summary(A).rank == A.shape[0]:
        return A.copy(), y.copy()
    Q, R = thin_qr(A)
    return R, Q.T @ y


def reduced_instance(A, y, name=""):
    At, yt = reduce_rank_deficient(A, y)
    if not np.any(yt):
        raise RankDeficientError("projected target vanishes")
    return RegressionInstance(At, yt, name)


@dataclass
class MinimizerSet:
    q_star: np.ndarray
    m_star: np.ndarray
    g_star: np.ndarray
    w_p: np.ndarray

    @property
    def distances(self):
        return (float(np.linalg.norm(self.q_star - self.m_star)),
                float(np.linalg.norm(self.m_star - self.g_star)),
                float(np.linalg.norm(self.q_star - self.g_star)))

    def to_dict(self):
        d = dict(zip(("q_minus_m", "m_minus_g", "q_minus_g"), self.distances))
        return {"q_star": self.q_star.tolist(), "m_star": self.m_star.tolist(),
                "g_star": self.g_star.tolist(), "w_p": self.w_p.tolist(), "distances": d}


def minimizer_set(inst, hp, dps=None):
    """Compute q*, m*, g* and W_p for one instance."""
    hp = _hp(hp)
    face = optimal_face(inst)
    return MinimizerSet(
        q_star=solve_qstar(inst, hp, dps=dps),
        m_star=solve_mstar(inst, hp, face),
        g_star=solve_gstar(inst, hp, face),
        w_p=wp_select(inst, hp.p, face),
    )
