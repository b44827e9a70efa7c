import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dlnbp.errors import InvalidInputError
from dlnbp.instances import A2
from dlnbp.linalg import null_projector, nullspace_basis, svd_summary, thin_qr

small = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_svd_identity():
    sv = svd_summary(np.eye(3))
    np.testing.assert_allclose(sv.singular_values, [1, 1, 1])
    assert sv.rank == 3


def test_svd_single_row_is_row_norm():
    A = np.array([[1.0, 0.5]])
    sv = svd_summary(A)
    assert sv.rank == 1
    assert sv.sigma_max == pytest.approx(np.sqrt(1.25), rel=1e-15)
    # Gram-matrix oracle: A A^T has the single eigenvalue sigma^2.
    assert sv.sigma_max ** 2 == pytest.approx(np.linalg.eigvalsh(A @ A.T)[0], rel=1e-14)


def test_svd_a2_rank_by_minors():
    A = np.array(A2)
    minors = [np.linalg.det(A[:, [i, j]]) for i in range(3) for j in range(i + 1, 3)]
    assert max(abs(d) for d in minors) > 0
    assert svd_summary(A).rank == 2


def test_svd_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        svd_summary(np.array([[1.0, np.nan]]))


def test_sigma_min_matches_direction_sampling(rng):
    # Sample unit directions, then polish the best one with a local minimizer
    # of the Rayleigh quotient |A^T z| / |z|.
    from scipy.optimize import minimize

    for m in (1, 2, 3):
        A = rng.standard_normal((m, m + 2))
        z = rng.standard_normal((20_000, m))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        vals = np.linalg.norm(z @ A, axis=1)
        z0 = z[np.argmin(vals)]
        res = minimize(lambda v: np.linalg.norm(v @ A) / np.linalg.norm(v), z0,
                       method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
        smin = svd_summary(A).sigma_min
        assert smin <= vals.min() + 1e-12
        assert abs(res.fun - smin) <= 1e-8


def test_thin_qr_identity():
    Q, R = thin_qr(np.eye(2))
    np.testing.assert_allclose(Q, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(R, np.eye(2), atol=1e-15)


def test_thin_qr_single_column():
    Q, R = thin_qr(np.array([[2.0], [0.0]]))
    np.testing.assert_allclose(Q, [[1.0], [0.0]])
    np.testing.assert_allclose(R, [[2.0]])


def test_thin_qr_duplicate_row(rng):
    B = rng.standard_normal((2, 5))
    A = np.vstack([B, B[1]])
    Q, R = thin_qr(A)
    assert Q.shape == (3, 2)
    assert np.max(np.abs(Q.T @ Q - np.eye(2))) <= 1e-12
    np.testing.assert_allclose(Q @ Q.T @ A, A, atol=1e-10)


def test_thin_qr_zero_matrix():
    with pytest.raises(InvalidInputError):
        thin_qr(np.zeros((2, 3)))


def test_nullspace_examples():
    B = nullspace_basis(np.array([[1.0, 1.0]]))
    assert B.shape == (2, 1)
    np.testing.assert_allclose(np.abs(B[:, 0]), [2 ** -0.5, 2 ** -0.5])
    assert B[0, 0] * B[1, 0] < 0
    assert nullspace_basis(np.eye(2)).shape == (2, 0)
    A = np.array([[1.0, 0.5]])
    b = nullspace_basis(A)[:, 0]
    assert abs(A @ b)[0] <= 1e-15
    assert np.linalg.norm(b) == pytest.approx(1.0)
    np.testing.assert_allclose(np.abs(b), np.abs(np.array([0.5, -1.0]) / np.hypot(0.5, 1.0)))


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 6)), elements=small))
def test_nullspace_properties(A):
    if not np.any(A):
        return
    B = nullspace_basis(A)
    op = np.linalg.norm(A, 2)
    assert np.max(np.abs(A @ B), initial=0.0) <= 1e-10 * op
    assert np.max(np.abs(B.T @ B - np.eye(B.shape[1])), initial=0.0) <= 1e-12
    np.testing.assert_allclose(null_projector(A), B @ B.T, atol=1e-14)
    assert svd_summary(A).rank + B.shape[1] == A.shape[1]


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=small))
def test_thin_qr_properties(A):
    if svd_summary(A).rank == 0:
        return
    Q, R = thin_qr(A)
    assert np.max(np.abs(Q.T @ Q - np.eye(Q.shape[1]))) <= 1e-12
    np.testing.assert_allclose(Q @ R, A, atol=1e-9 * max(1.0, np.abs(A).max()))
    sv = svd_summary(A)
    assert sv.rank <= min(A.shape)
    assert np.all(np.diff(sv.singular_values) <= 0)
