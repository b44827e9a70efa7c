"""Diagonal linear network loss, gradient descent and gradient flow.

The network predicts ``psi = |theta_+|^p - |theta_-|^p`` and is trained on
``L(theta) = 0.5 * ||A psi - y||^2`` from the tied start ``theta = alpha * 1``.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError, InvalidInputError
from .potentials import Hyperparams

DIVERGENCE_THRESHOLD = 1e12


@dataclass(frozen=True)
class DlnParams:
    theta_plus: np.ndarray
    theta_minus: np.ndarray

    def __post_init__(self):
        tp = np.atleast_1d(np.asarray(self.theta_plus, dtype=float))
        tm = np.atleast_1d(np.asarray(self.theta_minus, dtype=float))
        if tp.shape != tm.shape or tp.ndim != 1:
            raise InvalidInputError("theta_plus and theta_minus must be 1-D of equal length")
        if not (np.all(np.isfinite(tp)) and np.all(np.isfinite(tm))):
            raise InvalidInputError("parameters must be finite")
        object.__setattr__(self, "theta_plus", tp)
        object.__setattr__(self, "theta_minus", tm)

    @classmethod
    def initial(cls, N, alpha):
        return cls(np.full(N, float(alpha)), np.full(N, float(alpha)))

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        n = v.shape[0] // 2
        return cls(v[:n], v[n:])

    def as_vector(self):
        return np.concatenate([self.theta_plus, self.theta_minus])

    def psi(self, p):
        return predictor(self.theta_plus, self.theta_minus, p)


def predictor(theta_plus, theta_minus, p):
    """psi = |theta_+|^p - |theta_-|^p (works along a leading sample axis too)."""
    return np.abs(theta_plus) ** p - np.abs(theta_minus) ** p


def _unpack(theta):
    if isinstance(theta, DlnParams):
        return theta.theta_plus, theta.theta_minus
    tp, tm = theta
    return np.asarray(tp, dtype=float), np.asarray(tm, dtype=float)


def loss(theta, inst, p):
    """0.5 * ||A(|theta_+|^p - |theta_-|^p) - y||^2."""
    tp, tm = _unpack(theta)
    res = inst.A @ predictor(tp, tm, p) - inst.y
    return 0.5 * float(res @ res)


def grad_loss(theta, inst, p):
    """Gradient of :func:`loss`, returned as a ``DlnParams``-shaped pair."""
    tp, tm = _unpack(theta)
    r = inst.A.T @ (inst.A @ predictor(tp, tm, p) - inst.y)
    gp = p * np.sign(tp) * np.abs(tp) ** (p - 1) * r
    gm = -p * np.sign(tm) * np.abs(tm) ** (p - 1) * r
    return DlnParams(gp, gm)


def _grad_vec(v, A, y, p, N):
    tp, tm = v[:N], v[N:]
    r = A.T @ (A @ (np.abs(tp) ** p - np.abs(tm) ** p) - y)
    return np.concatenate([p * np.sign(tp) * np.abs(tp) ** (p - 1) * r,
                           -p * np.sign(tm) * np.abs(tm) ** (p - 1) * r])


def hess_loss(theta, inst, p):
    """Hessian of :func:`loss` with respect to the stacked vector (theta_+, theta_-)."""
    tp, tm = _unpack(theta)
    A, y = inst.A, inst.y
    G = A.T @ A
    r = A.T @ (A @ predictor(tp, tm, p) - y)
    dp = p * np.sign(tp) * np.abs(tp) ** (p - 1)
    dm = p * np.sign(tm) * np.abs(tm) ** (p - 1)
    cp = p * (p - 1) * np.abs(tp) ** (p - 2)
    cm = p * (p - 1) * np.abs(tm) ** (p - 2)
    top = np.hstack([np.diag(cp * r) + dp[:, None] * G * dp, -dp[:, None] * G * dm])
    bot = np.hstack([-dm[:, None] * G * dp, np.diag(-cm * r) + dm[:, None] * G * dm])
    return np.vstack([top, bot])


@dataclass
class FlowTrace:
    """Time-stamped samples of one gradient flow or gradient descent run.

    Arrays have one row per sample.  ``status`` is ``"ok"``, ``"diverged"`` or
    ``"failed"``; ``info`` carries run metadata (solver stats, step size, ...).
    """

    times: np.ndarray
    theta_plus: np.ndarray
    theta_minus: np.ndarray
    psi: np.ndarray
    residual: np.ndarray
    p: float
    alpha: float
    status: str = "ok"
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @classmethod
    def from_states(cls, times, thetas, inst, hp, status="ok", info=None):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        N = inst.N
        tp, tm = thetas[:, :N], thetas[:, N:]
        psi = predictor(tp, tm, hp.p)
        resid = np.linalg.norm(psi @ inst.A.T - inst.y, axis=1)
        return cls(np.asarray(times, dtype=float), tp, tm, psi, resid, hp.p, hp.alpha,
                   status, dict(info or {}))

    @property
    def final_psi(self):
        return self.psi[-1]

    @property
    def final_theta(self):
        return DlnParams(self.theta_plus[-1], self.theta_minus[-1])

    def residual_consistency(self, inst):
        """Max deviation between stored residuals and ones recomputed from psi."""
        recomputed = np.linalg.norm(self.psi @ inst.A.T - inst.y, axis=1)
        return float(np.max(np.abs(recomputed - self.residual))) if len(self) else 0.0

    def to_csv(self):
        """CSV text with columns t, residual, psi_1..psi_N."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        N = self.psi.shape[1]
        w.writerow(["t", "residual"] + [f"psi_{i + 1}" for i in range(N)])
        for k in range(len(self)):
            w.writerow([_fmt(self.times[k]), _fmt(self.residual[k])] + [_fmt(v) for v in self.psi[k]])
        return buf.getvalue()

    def to_dict(self):
        return {
            "p": self.p,
            "alpha": self.alpha,
            "status": self.status,
            "info": self.info,
            "samples": [
                {
                    "t": float(self.times[k]),
                    "residual": float(self.residual[k]),
                    "theta_plus": self.theta_plus[k].tolist(),
                    "theta_minus": self.theta_minus[k].tolist(),
                    "psi": self.psi[k].tolist(),
                }
                for k in range(len(self))
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, default=_json_default)


def _fmt(x):
    return format(float(x), ".17g")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def geometric_times(t_end, n=50, t_first=None):
    """0, then ``n`` geometrically spaced times ending exactly at ``t_end``."""
    t_end = float(t_end)
    if t_end <= 0:
        return np.array([0.0])
    if t_first is None:
        t_first = t_end * 1e-4
    ts = np.geomspace(min(t_first, t_end), t_end, n)
    ts[-1] = t_end
    return np.concatenate([[0.0], np.unique(ts)])


def gd_run(inst, hp, eta, J, record=None, max_abs=DIVERGENCE_THRESHOLD):
    """Run exactly ``J`` gradient descent steps from theta = alpha * 1.

    Parameters
    ----------
    inst : RegressionInstance
    hp : Hyperparams
    eta : float
        Step length.
    J : int
        Number of steps.
    record : int or sequence of int, optional
        Step indices to store.  An integer ``n`` stores about ``n`` geometrically
        spaced steps; the default stores 50.  Steps 0 and J are always stored.
    max_abs : float
        Divergence threshold on |theta|.

    Returns
    -------
    FlowTrace
        Sample times are ``k * eta``.  A run whose iterates exceed ``max_abs``
        or overflow ends early with ``status == "diverged"``.
    """
    if not isinstance(hp, Hyperparams):
        hp = Hyperparams(*hp)
    eta = float(eta)
    J = int(J)
    if not (np.isfinite(eta) and eta > 0):
        raise InvalidInputError("eta must be a positive finite real")
    if J < 0:
        raise InvalidInputError("J must be non-negative")
    if record is None:
        record = 50
    if np.ndim(record) == 0:
        n = max(int(record), 2)
        idx = np.unique(np.round(np.geomspace(1, max(J, 1), n)).astype(int)) if J > 0 else []
        keep = set(int(k) for k in idx)
    else:
        keep = set(int(k) for k in record)
    keep.update({0, J})

    A, y, p, N = inst.A, inst.y, hp.p, inst.N
    v = np.full(2 * N, hp.alpha)
    steps, states = [], []
    status = "ok"
    with np.errstate(over="raise", invalid="raise"):
        for k in range(J + 1):
            if k in keep:
                steps.append(k)
                states.append(v.copy())
            if k == J:
                break
            try:
                v = v - eta * _grad_vec(v, A, y, p, N)
            except FloatingPointError:
                status = "diverged"
                break
            if not np.all(np.abs(v) < max_abs):
                status = "diverged"
                if np.all(np.isfinite(v)):
                    steps.append(k + 1)
                    states.append(v.copy())
                break
    times = np.asarray(steps, dtype=float) * eta
    return FlowTrace.from_states(times, states, inst, hp, status,
                                 {"eta": eta, "J": J, "steps_taken": steps[-1]})


def flow_run(inst, hp, t_end, rtol=1e-10, atol=None, times=None, n_samples=50,
             max_abs=DIVERGENCE_THRESHOLD, method="Radau"):
    """Integrate the gradient flow theta' = -grad L(theta) from theta = alpha * 1.

    The stiff system is solved with the implicit Radau IIA method using the
    analytic Jacobian.  Integration is restarted at every sample time so each
    stored state is a genuine step endpoint rather than an interpolant.

    Parameters
    ----------
    t_end : float
        Final time (>= 0).
    rtol, atol : float
        Solver tolerances.  ``atol`` defaults to ``rtol * alpha * 1e-6`` so that
        components shrinking far below alpha keep relative accuracy.
    times : array_like, optional
        Sample times; defaults to :func:`geometric_times`.

    Raises
    ------
    IntegrationError
        If the solver fails; ``exc.trace`` holds the samples computed so far.
    """
    if not isinstance(hp, Hyperparams):
        hp = Hyperparams(*hp)
    t_end = float(t_end)
    if not (np.isfinite(t_end) and t_end >= 0):
        raise InvalidInputError("t_end must be a non-negative finite real")
    if times is None:
        times = geometric_times(t_end, n_samples)
    else:
        times = np.unique(np.concatenate([[0.0], np.asarray(times, dtype=float)]))
        if times[0] < 0 or times[-1] > t_end * (1 + 1e-15):
            raise InvalidInputError("sample times must lie in [0, t_end]")
    if atol is None:
        atol = rtol * hp.alpha * 1e-6

    A, y, p, N = inst.A, inst.y, hp.p, inst.N

    def rhs(_t, v):
        return -_grad_vec(v, A, y, p, N)

    def jac(_t, v):
        return -hess_loss((v[:N], v[N:]), inst, p)

    def blowup(_t, v):
        return max_abs - np.max(np.abs(v))

    blowup.terminal = True

    v = np.full(2 * N, hp.alpha)
    states, stamps = [v.copy()], [0.0]
    nfev = njev = nsteps = 0
    status = "ok"
    for t0, t1 in zip(times[:-1], times[1:]):
        sol = solve_ivp(rhs, (t0, t1), v, method=method, jac=jac, rtol=rtol, atol=atol,
                        events=blowup)
        nfev += sol.nfev
        njev += sol.njev
        nsteps += len(sol.t) - 1
        if sol.status == -1:
            trace = FlowTrace.from_states(stamps, states, inst, hp, "failed",
                                          {"message": sol.message})
            raise IntegrationError(f"flow integration failed at t={sol.t[-1]:.6g}: {sol.message}",
                                   trace)
        v = sol.y[:, -1]
        stamps.append(float(sol.t[-1]))
        states.append(v.copy())
        if sol.status == 1:
            status = "diverged"
            break
    info = {"rtol": rtol, "atol": atol, "method": method, "nfev": nfev, "njev": njev,
            "steps": nsteps}
    return FlowTrace.from_states(stamps, states, inst, hp, status, info)


def exact_flow_state(integral_r, hp):
    """Closed-form flow state in terms of the accumulated correlation.

    Under the flow, theta depends on time only through
    ``c = int_0^t A^T(A psi - y) ds`` coordinatewise; given ``c`` this returns
    (theta_+, theta_-).
    """
    c = np.asarray(integral_r, dtype=float)
    p, alpha = hp.p, hp.alpha
    if p == 2:
        return alpha * np.exp(-2.0 * c), alpha * np.exp(2.0 * c)
    base = alpha ** (2.0 - p)
    e = -1.0 / (p - 2.0)
    return (base + p * (p - 2.0) * c) ** e, (base - p * (p - 2.0) * c) ** e


def flow_invariant_defect(trace, hp=None):
    """Per-sample relative defect of the conserved quantity of the flow.

    For p = 2 the product theta_+ * theta_- stays at alpha^2; for p > 2 the sum
    theta_+^(2-p) + theta_-^(2-p) stays at 2 alpha^(2-p).  Returns the max
    over coordinates of |invariant - target| / target for each sample.
    """
    p = trace.p if hp is None else hp.p
    alpha = trace.alpha if hp is None else hp.alpha
    tp, tm = trace.theta_plus, trace.theta_minus
    if p == 2:
        target = alpha ** 2
        inv = tp * tm
    else:
        target = 2.0 * alpha ** (2.0 - p)
        with np.errstate(divide="ignore"):
            inv = np.abs(tp) ** (2.0 - p) + np.abs(tm) ** (2.0 - p)
    return np.max(np.abs(inv - target), axis=1) / target


def theta_bound_slack(trace):
    """Per-sample value of (||psi||_inf + alpha^p) - ||theta||_inf^p (non-negative on the flow)."""
    p, alpha = trace.p, trace.alpha
    th = np.maximum(np.max(np.abs(trace.theta_plus), axis=1), np.max(np.abs(trace.theta_minus), axis=1))
    return np.max(np.abs(trace.psi), axis=1) + alpha ** p - th ** p


def euler_integrate(f, y0, T, eta):
    """Forward Euler with fixed step ``eta`` for floor(T / eta) steps.

    Returns the final state; for scalar ``y0`` a float is returned.
    """
    eta = float(eta)
    if not (eta > 0 and np.isfinite(eta)):
        raise InvalidInputError("eta must be a positive finite real")
    steps = int(np.floor(float(T) / eta))
    y = np.array(y0, dtype=float)
    t = 0.0
    for _ in range(steps):
        y = y + eta * np.asarray(f(t, y), dtype=float)
        t += eta
    return float(y) if y.ndim == 0 else y


@dataclass
class GdFlowReport:
    t: float
    eps: float
    eta: float
    J: int
    gap: float
    passed: bool
    psi_gd: np.ndarray
    psi_flow: np.ndarray
    gd_status: str

    def to_dict(self):
        return {"t": self.t, "eps": self.eps, "eta": self.eta, "J": self.J, "gap": self.gap,
                "passed": self.passed, "psi_gd": self.psi_gd.tolist(),
                "psi_flow": self.psi_flow.tolist(), "gd_status": self.gd_status}


def gd_matches_flow(inst, hp, t, eps=1e-3, max_steps=2_000_000, rtol=1e-11):
    """Compare gradient descent at the guaranteed step size with the flow at time ``t``.

    The step length and step count come from :func:`dlnbp.bounds.gd_step_bound`;
    the flow reference is :func:`flow_run` at tight tolerance.  The report's
    ``passed`` flag states whether the measured gap is at most ``eps``.

    Raises
    ------
    InvalidInputError
        If the guaranteed step count exceeds ``max_steps``.
    """
    from .bounds import gd_step_bound

    if not isinstance(hp, Hyperparams):
        hp = Hyperparams(*hp)
    eta, J = gd_step_bound(inst, hp, t, eps)
    if J > max_steps:
        raise InvalidInputError(
            f"guaranteed step count {J} exceeds max_steps={max_steps}; use a smaller t"
        )
    gd = gd_run(inst, hp, eta, J, record=2)
    flow = flow_run(inst, hp, t, rtol=rtol, times=[t])
    gap = float(np.linalg.norm(gd.final_psi - flow.final_psi))
    return GdFlowReport(float(t), float(eps), eta, J, gap, gap <= eps, gd.final_psi,
                        flow.final_psi, gd.status)
