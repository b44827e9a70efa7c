"""Regression instances (A, y) and the built-in examples."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, RankDeficientError
from .linalg import as_matrix, svd_summary


@dataclass(frozen=True)
class RegressionInstance:
    """Training data (A, y) with A of full row rank m <= N and y != 0.

    Pass ``check_rank=False`` to hold a rank-deficient matrix, e.g. before
    calling :func:`dlnbp.bp.reduce_rank_deficient`.
    """

    A: np.ndarray
    y: np.ndarray
    name: str = ""
    check_rank: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        A = as_matrix(self.A)
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if y.ndim != 1 or y.shape[0] != A.shape[0]:
            raise InvalidInputError(f"y must have length {A.shape[0]}, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("y has non-finite entries")
        if not np.any(y != 0):
            raise InvalidInputError("y must be non-zero")
        A.setflags(write=False)
        y = y.copy()
        y.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        if self.check_rank:
            m, N = A.shape
            if m > N:
                raise RankDeficientError(f"A is {m}x{N}; full row rank needs m <= N")
            rank = svd_summary(A).rank
            if rank < m:
                raise RankDeficientError(
                    f"A has rank {rank} < m = {m}; use reduce_rank_deficient first"
                )

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def N(self):
        return self.A.shape[1]

    @property
    def y_norm(self):
        return float(np.linalg.norm(self.y))

    @property
    def sigma_min(self):
        return svd_summary(self.A).sigma_min

    @property
    def op_norm(self):
        return svd_summary(self.A).sigma_max

    def to_dict(self):
        return {"name": self.name, "A": self.A.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["A"], dtype=float), np.asarray(d["y"], dtype=float), d.get("name", ""))


A1 = [
    [-0.111, 0.120, -0.370, -0.240, -1.197],
    [0.209, -0.972, -0.755, 0.324, -0.109],
    [0.210, -0.391, 0.235, 0.665, 0.353],
]
Y1 = [0.973, -0.039, -0.886]
A2 = [[1.0, 1.0, 1.0], [3.0, 0.0, 1.0]]
Y2 = [3.0, 3.0]
A3 = [[2.0, -1.0, 0.0, 1.0], [0.0, 3.0, 2.0, 0.0]]
Y3 = [0.0, 6.0]


def instance_a1():
    return RegressionInstance(np.array(A1), np.array(Y1), "a1")


def instance_a2():
    return RegressionInstance(np.array(A2), np.array(Y2), "a2")


def instance_a3():
    return RegressionInstance(np.array(A3), np.array(Y3), "a3")


def shift_instance(eps):
    """The 1 x 2 system [1, 1 - eps] z = 1, whose l1 minimizer is (1, 0) for eps > 0."""
    eps = float(eps)
    if not (np.isfinite(eps) and 0 < eps <= 1):
        raise InvalidInputError(f"eps must lie in (0, 1], got {eps!r}")
    return RegressionInstance(np.array([[1.0, 1.0 - eps]]), np.array([1.0]), f"shift:{eps:g}")


def builtin_instances():
    """The three fixed example instances, in order a1, a2, a3."""
    return [instance_a1(), instance_a2(), instance_a3()]


def mu_closed_form(p):
    """Face parameter of the selected minimizer (1 - mu, 2 - 2 mu, 3 mu) for instances a2/a3."""
    if p == 2:
        c2, c4 = 2.0 ** (1.0 / 3.0), 4.0 ** (1.0 / 3.0)
        return (4.0 - 6.0 * c2 + 9.0 * c4) / 31.0
    r = 3.0 ** (2.0 / p) / (2.0 ** (2.0 / p) + 1.0)
    return 1.0 / (1.0 + r ** (-p / (p - 2.0)))


def wp_closed_form(name, p):
    """Closed-form selected minimizer for the built-in instances a2 and a3."""
    mu = mu_closed_form(p)
    z = np.array([1.0 - mu, 2.0 - 2.0 * mu, 3.0 * mu])
    if name == "a2":
        return z
    if name == "a3":
        return np.append(z, 0.0)
    raise KeyError(name)


class SplitMix64:
    """SplitMix64 generator: a 64-bit counter passed through a fixed mixer.

    Chosen because its output is fully specified by integer arithmetic and is
    therefore identical on every platform and numpy version.
    """

    _MASK = (1 << 64) - 1

    def __init__(self, seed=0):
        self.state = int(seed) & self._MASK

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & self._MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def uniform(self, low=0.0, high=1.0):
        """Float in [low, high) built from the top 53 bits."""
        return low + (high - low) * ((self.next_u64() >> 11) * 2.0 ** -53)

    def uniform_array(self, shape, low=0.0, high=1.0):
        n = int(np.prod(shape))
        return np.array([self.uniform(low, high) for _ in range(n)]).reshape(shape)


def random_instance(m, N, seed=0, decimals=3, max_tries=100):
    """Random full-row-rank instance with entries uniform in [-1, 1), rounded like a1."""
    if not (1 <= m <= N):
        raise InvalidInputError(f"need 1 <= m <= N, got m={m}, N={N}")
    rng = SplitMix64(seed)
    for _ in range(max_tries):
        A = np.round(rng.uniform_array((m, N), -1.0, 1.0), decimals)
        y = np.round(rng.uniform_array((m,), -1.0, 1.0), decimals)
        if np.any(y != 0) and svd_summary(A).rank == m:
            return RegressionInstance(A, y, f"random:{m}x{N}:{seed}")
    raise RankDeficientError("could not draw a full-rank instance")


def load_instance(path):
    """Read an instance from a JSON file with keys ``A`` and ``y``."""
    import json

    with open(path) as fh:
        d = json.load(fh)
    d.setdefault("name", f"file:{path}")
    return RegressionInstance.from_dict(d)


def parse_instance(ident, seed=0):
    """Resolve an instance identifier: a1, a2, a3, shift:EPS, file:PATH or random:MxN."""
    ident = ident.strip()
    table = {"a1": instance_a1, "a2": instance_a2, "a3": instance_a3}
    if ident.lower() in table:
        return table[ident.lower()]()
    kind, _, arg = ident.partition(":")
    if kind == "shift" and arg:
        try:
            return shift_instance(float(arg))
        except ValueError as exc:
            raise InvalidInputError(str(exc)) from exc
    if kind == "file" and arg:
        return load_instance(arg)
    if kind == "random" and arg:
        try:
            m, N = (int(v) for v in arg.lower().split("x"))
        except ValueError as exc:
            raise InvalidInputError(f"random instance needs MxN, got {arg!r}") from exc
        return random_instance(m, N, seed)
    raise InvalidInputError(f"unknown instance {ident!r}")
