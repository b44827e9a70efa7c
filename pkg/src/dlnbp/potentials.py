"""Mirror-potential scalar functions h_p, q_p, g_p and their vectorized sums.

For p = 2 the link function is ``h(t) = 2 sinh(t)`` on the whole line; for
p > 2 it is ``h(t) = (1 - t)^(-k) - (1 + t)^(-k)`` on (-1, 1) with
``k = p / (p - 2)``.  ``q_p`` is the antiderivative of ``h^{-1}`` vanishing at
zero and ``g_p`` is its large-argument surrogate.

All scalar functions accept numpy arrays and broadcast elementwise.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError

_NEWTON_MAXITER = 200


@dataclass(frozen=True)
class Hyperparams:
    """Depth ``p >= 2`` and initialization scale ``alpha > 0``."""

    p: float
    alpha: float

    def __post_init__(self):
        p, alpha = float(self.p), float(self.alpha)
        if not (np.isfinite(p) and p >= 2):
            raise InvalidInputError(f"p must be a finite real >= 2, got {self.p!r}")
        if not (np.isfinite(alpha) and alpha > 0):
            raise InvalidInputError(f"alpha must be a finite positive real, got {self.alpha!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "alpha", alpha)

    @property
    def scale(self):
        """alpha ** p, the natural scale of the predictor at initialization."""
        return self.alpha ** self.p


def _check_p(p):
    p = float(p)
    if not (np.isfinite(p) and p >= 2):
        raise InvalidInputError(f"p must be a finite real >= 2, got {p!r}")
    return p


def _exponent(p):
    return p / (p - 2.0)


def _finite(x, name="argument"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return x


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def h_p(t, p):
    """Link function h_p, odd and strictly increasing."""
    p = _check_p(p)
    t = _finite(t, "t")
    if p == 2:
        return _scalar_or_array(2.0 * np.sinh(t))
    if np.any(np.abs(t) >= 1):
        raise DomainError("h_p with p > 2 is defined only on (-1, 1)")
    k = _exponent(p)
    # (1-t)^-k - (1+t)^-k written without cancellation near t = 0.
    out = 2.0 * np.exp(-0.5 * k * np.log1p(-t * t)) * np.sinh(k * np.arctanh(t))
    return _scalar_or_array(out)


def h_p_prime(t, p):
    """Derivative of h_p (strictly positive)."""
    p = _check_p(p)
    t = _finite(t, "t")
    if p == 2:
        return _scalar_or_array(2.0 * np.cosh(t))
    if np.any(np.abs(t) >= 1):
        raise DomainError("h_p with p > 2 is defined only on (-1, 1)")
    k = _exponent(p)
    out = k * ((1.0 - t) ** (-k - 1.0) + (1.0 + t) ** (-k - 1.0))
    return _scalar_or_array(out)


def h_p_inv(u, p):
    """Inverse of h_p, defined on the whole real line.

    For p > 2 the root is found in the variable ``d = 1 - |t|`` where
    ``d^(-k) - (2 - d)^(-k) = |u|`` is decreasing and convex on (0, 1]; Newton
    started from ``d0 = (1 + |u|)^(-1/k)`` (which lies left of the root)
    increases monotonically to it.  A final Newton polish in ``t`` restores
    relative accuracy for small ``|u|``.
    """
    p = _check_p(p)
    u = _finite(u, "u")
    if p == 2:
        return _scalar_or_array(np.arcsinh(0.5 * u))
    k = _exponent(p)
    a = np.abs(u)
    d = (1.0 + a) ** (-1.0 / k)
    for _ in range(_NEWTON_MAXITER):
        f = d ** (-k) - (2.0 - d) ** (-k) - a
        fp = -k * (d ** (-k - 1.0) + (2.0 - d) ** (-k - 1.0))
        step = -f / fp
        d_new = np.minimum(d + np.maximum(step, 0.0), 1.0)
        if np.all(np.abs(d_new - d) <= 4 * np.finfo(float).eps * d):
            d = d_new
            break
        d = d_new
    t = np.sign(u) * (1.0 - d)
    for _ in range(2):
        res = h_p(t, p) - u
        t_new = t - res / h_p_prime(t, p)
        t_new = np.clip(t_new, -np.nextafter(1.0, 0.0), np.nextafter(1.0, 0.0))
        better = np.abs(h_p(t_new, p) - u) < np.abs(res)
        t = np.where(better, t_new, t)
    return _scalar_or_array(t)


def h_p_antiderivative(t, p):
    """H(t) = integral of h_p from 0 to t (even, non-negative)."""
    p = _check_p(p)
    t = _finite(t, "t")
    if p == 2:
        return _scalar_or_array(4.0 * np.sinh(0.5 * t) ** 2)
    if np.any(np.abs(t) >= 1):
        raise DomainError("h_p with p > 2 is defined only on (-1, 1)")
    c = 2.0 / (p - 2.0)
    x = c * np.arctanh(t)
    a = -0.5 * c * np.log1p(-t * t)
    # (p-2)/2 * [(1-t)^-c + (1+t)^-c - 2] = (p-2) * [e^a cosh(x) - 1]
    out = (p - 2.0) * (np.expm1(a) * np.cosh(x) + 2.0 * np.sinh(0.5 * x) ** 2)
    return _scalar_or_array(out)


def q_p(u, p):
    """q_p(u) = integral of h_p^{-1} from 0 to u.

    Evaluated through integration by parts,
    ``q_p(u) = u h^{-1}(u) - H(h^{-1}(u))`` with H the antiderivative of h.
    """
    p = _check_p(p)
    u = _finite(u, "u")
    t = np.asarray(h_p_inv(u, p))
    return _scalar_or_array(u * t - np.asarray(h_p_antiderivative(t, p)))


def q_p_prime(u, p):
    return h_p_inv(u, p)


def q_p_second(u, p):
    """Second derivative of q_p, i.e. 1 / h_p'(h_p^{-1}(u))."""
    return _scalar_or_array(1.0 / np.asarray(h_p_prime(h_p_inv(u, p), p)))


def g_p(u, p):
    """Surrogate potential: |u| ln(|u|/e) for p = 2, |u| - (p/2)|u|^(2/p) for p > 2."""
    p = _check_p(p)
    a = np.abs(_finite(u, "u"))
    if p == 2:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(a > 0, a * (np.log(np.where(a > 0, a, 1.0)) - 1.0), 0.0)
    else:
        out = a - 0.5 * p * a ** (2.0 / p)
    return _scalar_or_array(out)


def g_p_prime(u, p):
    """Derivative of g_p for u != 0."""
    p = _check_p(p)
    u = _finite(u, "u")
    if np.any(u == 0):
        raise DomainError("g_p' is unbounded at u = 0")
    a = np.abs(u)
    if p == 2:
        out = np.sign(u) * np.log(a)
    else:
        out = np.sign(u) * (1.0 - a ** (2.0 / p - 1.0))
    return _scalar_or_array(out)


def _split(hp):
    if not isinstance(hp, Hyperparams):
        hp = Hyperparams(*hp)
    return hp.p, hp.scale


def Q_p(z, hp):
    """Q_p(z) = alpha^p * sum_i q_p(z_i / alpha^p)."""
    p, s = _split(hp)
    z = _finite(z, "z")
    return float(s * np.sum(q_p(z / s, p)))


def grad_Q_p(z, hp):
    p, s = _split(hp)
    z = _finite(z, "z")
    return np.asarray(h_p_inv(z / s, p), dtype=float)


def hess_Q_p_diag(z, hp):
    """Diagonal of the (diagonal) Hessian of Q_p."""
    p, s = _split(hp)
    z = _finite(z, "z")
    return np.asarray(q_p_second(z / s, p), dtype=float) / s


def G_p(z, hp):
    """G_p(z) = alpha^p * sum_i g_p(z_i / alpha^p)."""
    p, s = _split(hp)
    z = _finite(z, "z")
    return float(s * np.sum(g_p(z / s, p)))


def kappa_bound(z, hp):
    """Upper bound 0.5 (||z||_inf / alpha^p + 2)^((2p-2)/p) on cond(hess Q_p(z))."""
    p, s = _split(hp)
    z = _finite(z, "z")
    return 0.5 * (np.max(np.abs(z)) / s + 2.0) ** ((2.0 * p - 2.0) / p)
