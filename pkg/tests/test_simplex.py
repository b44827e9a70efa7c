import numpy as np
import pytest
from scipy.optimize import linprog

from dlnbp.errors import InvalidInputError
from dlnbp.simplex import InfeasibleError, UnboundedError, simplex


def test_small_lp():
    # min -x1 - x2 s.t. x1 + 2 x2 + s1 = 4, 3 x1 + x2 + s2 = 6
    c = np.array([-1.0, -1.0, 0.0, 0.0])
    A = np.array([[1.0, 2.0, 1.0, 0.0], [3.0, 1.0, 0.0, 1.0]])
    res = simplex(c, A, [4.0, 6.0])
    np.testing.assert_allclose(res.x[:2], [1.6, 1.2], atol=1e-14)
    assert res.value == pytest.approx(-2.8)


def test_infeasible_and_unbounded():
    with pytest.raises(InfeasibleError):
        simplex([1.0, 1.0], [[1.0, 1.0]], [-1.0])
    with pytest.raises(UnboundedError):
        simplex([-1.0, 0.0], [[1.0, -1.0]], [1.0])
    with pytest.raises(InvalidInputError):
        simplex([1.0], [[1.0, 1.0]], [1.0])


def test_redundant_rows():
    A = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    res = simplex([1.0, 2.0, 3.0], A, [1.0, 2.0])
    np.testing.assert_allclose(res.x, [1.0, 0.0, 0.0])


def test_negative_rhs():
    res = simplex([1.0, 1.0], [[-1.0, -2.0]], [-2.0])
    np.testing.assert_allclose(res.x, [0.0, 1.0])


def test_matches_scipy_on_random_lps(rng):
    for _ in range(40):
        m, n = rng.integers(1, 5), rng.integers(5, 10)
        A = rng.standard_normal((m, n))
        x0 = rng.uniform(0, 1, n)
        b = A @ x0
        c = rng.uniform(0.1, 2.0, n)
        ours = simplex(c, A, b)
        ref = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        assert ours.value == pytest.approx(ref.fun, rel=1e-9, abs=1e-10)
        np.testing.assert_allclose(A @ ours.x, b, atol=1e-10)
        assert np.all(ours.x >= 0)


def test_deterministic():
    A = np.array([[1.0, 1.0, 1.0, 1.0]])
    r1 = simplex(np.ones(4), A, [1.0])
    r2 = simplex(np.ones(4), A, [1.0])
    np.testing.assert_array_equal(r1.x, r2.x)
    assert r1.basis == r2.basis
