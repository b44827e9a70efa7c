"""Explicit constants for flow convergence and for the gradient descent step size.

Every quantity is a literal evaluation of a closed-form bound; nothing here is
fitted.  Inputs are a :class:`RegressionInstance`, :class:`Hyperparams`, a
time horizon ``t`` and an accuracy ``eps``.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError, RankDeficientError
from .linalg import svd_summary
from .potentials import Hyperparams


@dataclass(frozen=True)
class BoundBundle:
    """All explicit constants for one (instance, p, alpha, t, eps)."""

    K1: float
    K2: float
    M: float
    C1_grad: float
    C2_hess: float
    eta_max: float
    U_alpha: float
    L_t: float
    U_eta: float
    K_cap: float
    eps_hat: float

    def to_dict(self):
        return asdict(self)


FORMULAS = {
    "K1": "alpha^p (2 sqrt(N) |y| / (sigma_min alpha^p) + 2)^((3p-2)/p)",
    "K2": "2 p^2 sigma_min^2 alpha^(2p-2)",
    "M": "2 sqrt(N) |y| / sigma_min + alpha^p",
    "C1_grad": "40 p sqrt(N) |A|^2 M^((2p-1)/p)",
    "C2_hess": "50 p^2 sqrt(N) |A|^2 M^((2p-2)/p)",
    "eta_max": "min(eps, alpha/p) / C1_grad * exp(-C2_hess t)",
    "U_alpha": "(eps / (3 C1 |y|))^(1/(p C2)) |y|^(1/p)",
    "L_t": "max((ln(24 K^(3p-2)) - ln(eps alpha^(2p-2))) / (2 p^2 sigma_min^2 alpha^(2p-2)), 1)",
    "U_eta": "min(min(K, eps / (3 2^p p N K^(p-1))), alpha/p) / (40 p sqrt(N) |A|^2 K^(2p-1)) * exp(-50 p^2 sqrt(N) |A|^2 K^(2p-2) t)",
    "K_cap": "(2 sqrt(N) |y| / sigma_min + alpha^p)^(1/p)",
    "eps_hat": "min(K, eps / (2^p p N K^(p-1)))",
}


def _data(inst, hp):
    if not isinstance(hp, Hyperparams):
        hp = Hyperparams(*hp)
    sv = svd_summary(inst.A)
    if sv.rank < inst.m:
        raise RankDeficientError("A is rank deficient; apply reduce_rank_deficient first")
    return hp, inst.N, sv.sigma_min, sv.sigma_max, inst.y_norm


def _positive(x, name):
    x = float(x)
    if not (np.isfinite(x) and x > 0):
        raise InvalidInputError(f"{name} must be a positive finite real")
    return x


def flow_rate(inst, hp):
    """(K1, K2): ||psi(t) - psi(inf)|| <= K1 exp(-K2 t) and residual decays like exp(-K2 t)."""
    hp, N, smin, _, ynorm = _data(inst, hp)
    p, ap = hp.p, hp.scale
    K2 = 2.0 * p * p * smin ** 2 * hp.alpha ** (2 * p - 2)
    K1 = ap * (2.0 * math.sqrt(N) * ynorm / (smin * ap) + 2.0) ** ((3 * p - 2) / p)
    return K1, K2


def derivative_bounds(inst, hp):
    """(M, C1, C2): bounds on |grad L| and |hess L| along the discretized path."""
    hp, N, smin, smax, ynorm = _data(inst, hp)
    p = hp.p
    M = 2.0 * math.sqrt(N) * ynorm / smin + hp.scale
    C1 = 40.0 * p * math.sqrt(N) * smax ** 2 * M ** ((2 * p - 1) / p)
    C2 = 50.0 * p * p * math.sqrt(N) * smax ** 2 * M ** ((2 * p - 2) / p)
    return M, C1, C2


def eta_max(inst, hp, t, eps):
    """Largest step for which gradient descent tracks the flow on [0, t] to within eps in theta."""
    hp = hp if isinstance(hp, Hyperparams) else Hyperparams(*hp)
    eps = _positive(eps, "eps")
    _, C1, C2 = derivative_bounds(inst, hp)
    return min(eps, hp.alpha / hp.p) / C1 * math.exp(-C2 * float(t))


def cap_constant(inst, hp):
    """K = (2 sqrt(N) |y| / sigma_min + alpha^p)^(1/p)."""
    hp, N, smin, _, ynorm = _data(inst, hp)
    return (2.0 * math.sqrt(N) * ynorm / smin + hp.scale) ** (1.0 / hp.p)


def psi_eps_hat(inst, hp, eps, split=1.0):
    """min(K, eps / (split 2^p p N K^(p-1))): theta accuracy that buys psi accuracy eps."""
    hp = hp if isinstance(hp, Hyperparams) else Hyperparams(*hp)
    eps = _positive(eps, "eps")
    K = cap_constant(inst, hp)
    p, N = hp.p, inst.N
    return min(K, eps / (split * 2.0 ** p * p * N * K ** (p - 1)))


def _psi_step_parts(inst, hp, eps, split=1.0):
    hp, N, _, smax, _ = _data(inst, hp)
    p = hp.p
    K = cap_constant(inst, hp)
    e_hat = psi_eps_hat(inst, hp, eps, split)
    c1 = 40.0 * p * math.sqrt(N) * smax ** 2 * K ** (2 * p - 1)
    c2 = 50.0 * p * p * math.sqrt(N) * smax ** 2 * K ** (2 * p - 2)
    return min(e_hat, hp.alpha / p) / c1, c2


def psi_step_bound(inst, hp, t, eps, split=1.0):
    """Step length under which |psi_hat - psi(t)| <= eps after floor(t / eta) steps."""
    eta0, c2 = _psi_step_parts(inst, hp, eps, split)
    return eta0 * math.exp(-c2 * float(t))


def gd_step_bound(inst, hp, t, eps):
    """(eta, J) with eta from the psi-accuracy step bound and J = floor(t / eta)."""
    eta = psi_step_bound(inst, hp, t, eps)
    if eta <= 0:
        raise InvalidInputError("step bound underflows to zero; the horizon t is too long")
    return eta, int(math.floor(float(t) / eta))


def max_horizon(inst, hp, eps, max_steps):
    """Largest t whose guaranteed step count floor(t / eta(t)) stays within ``max_steps``."""
    from scipy.optimize import brentq

    eta0, c2 = _psi_step_parts(inst, hp, eps)
    target = math.log(max_steps * eta0)

    # t / eta(t) = t exp(c2 t) / eta0 is increasing; solve in log form to avoid underflow.
    def excess(t):
        return math.log(t) + c2 * t - target

    hi = 1.0
    while excess(hi) < 0:
        hi *= 2.0
    return brentq(excess, 1e-300, hi, xtol=1e-15, rtol=1e-13)


def log_step_bounds(inst, hp, t, eps):
    """Natural logarithms of (eta_max, U_eta).

    Both bounds carry a factor exp(-C t) with C in the thousands or more, so
    they underflow to 0.0 in floating point already for moderate t.
    """
    hp = hp if isinstance(hp, Hyperparams) else Hyperparams(*hp)
    eps = _positive(eps, "eps")
    t = float(t)
    _, C1, C2 = derivative_bounds(inst, hp)
    log_eta = math.log(min(eps, hp.alpha / hp.p) / C1) - C2 * t
    eta0, c2 = _psi_step_parts(inst, hp, eps, split=3.0)
    return log_eta, math.log(eta0) - c2 * t


def algorithm_constants(inst, hp, t, eps, C1=1.0, C2=1.0):
    """(U_alpha, L_t, U_eta, K, eps_hat) for the alpha / time / step recipe.

    ``C1`` and ``C2`` are the assumed constants of the rate
    |W_p - psi_alpha(inf)| <= C1 alpha^(p C2) and must be supplied by the caller.
    The accuracy ``eps`` is split in three equal parts between the three
    error sources, hence the factors 3 below.
    """
    hp, N, smin, _, ynorm = _data(inst, hp)
    eps = _positive(eps, "eps")
    p, alpha = hp.p, hp.alpha
    U_alpha = (eps / (3.0 * C1 * ynorm)) ** (1.0 / (p * C2)) * ynorm ** (1.0 / p)
    K = cap_constant(inst, hp)
    rate = 2.0 * p * p * smin ** 2 * alpha ** (2 * p - 2)
    L_t = max((math.log(24.0 * K ** (3 * p - 2)) - math.log(eps * alpha ** (2 * p - 2))) / rate, 1.0)
    eps_hat = psi_eps_hat(inst, hp, eps, split=3.0)
    U_eta = psi_step_bound(inst, hp, t, eps, split=3.0)
    return U_alpha, L_t, U_eta, K, eps_hat


def bounds(inst, hp, t, eps, C1=1.0, C2=1.0):
    """Evaluate every constant into a :class:`BoundBundle`.

    ``eps_hat`` is the unsplit value used by the step bound for psi accuracy
    eps; ``U_eta`` uses the three-way split of the full recipe.
    """
    hp = hp if isinstance(hp, Hyperparams) else Hyperparams(*hp)
    t = float(t)
    if not (np.isfinite(t) and t >= 0):
        raise InvalidInputError("t must be a non-negative finite real")
    K1, K2 = flow_rate(inst, hp)
    M, c1, c2 = derivative_bounds(inst, hp)
    U_alpha, L_t, U_eta, K, _ = algorithm_constants(inst, hp, t, eps, C1, C2)
    return BoundBundle(
        K1=K1, K2=K2, M=M, C1_grad=c1, C2_hess=c2,
        eta_max=eta_max(inst, hp, t, eps),
        U_alpha=U_alpha, L_t=L_t, U_eta=U_eta, K_cap=K,
        eps_hat=psi_eps_hat(inst, hp, eps),
    )
