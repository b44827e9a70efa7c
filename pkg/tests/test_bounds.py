import math

import numpy as np
import pytest

from dlnbp.bounds import (FORMULAS, algorithm_constants, bounds, cap_constant, derivative_bounds,
                          eta_max, flow_rate, gd_step_bound, log_step_bounds, max_horizon,
                          psi_eps_hat, psi_step_bound)
from dlnbp.errors import InvalidInputError, RankDeficientError
from dlnbp.instances import RegressionInstance, builtin_instances, instance_a2
from dlnbp.potentials import Hyperparams

ONE_D = RegressionInstance(np.array([[1.0]]), np.array([1.0]))


def test_literal_examples():
    hp = Hyperparams(2, 0.1)
    _, K2 = flow_rate(ONE_D, hp)
    assert K2 == pytest.approx(0.08, rel=1e-14)
    M, _, _ = derivative_bounds(ONE_D, hp)
    assert M == pytest.approx(2.01, rel=1e-14)


def test_formulas_by_hand():
    inst = instance_a2()
    hp = Hyperparams(3, 0.2)
    s = np.linalg.svd(inst.A, compute_uv=False)
    N, y = 3, math.hypot(3, 3)
    ap = 0.2 ** 3
    K1, K2 = flow_rate(inst, hp)
    assert K1 == pytest.approx(ap * (2 * math.sqrt(N) * y / (s[-1] * ap) + 2) ** (7 / 3))
    assert K2 == pytest.approx(2 * 9 * s[-1] ** 2 * 0.2 ** 4)
    M, C1, C2 = derivative_bounds(inst, hp)
    assert C1 == pytest.approx(40 * 3 * math.sqrt(N) * s[0] ** 2 * M ** (5 / 3))
    assert C2 == pytest.approx(50 * 9 * math.sqrt(N) * s[0] ** 2 * M ** (4 / 3))
    assert eta_max(inst, hp, 0.5, 1e-3) == pytest.approx(min(1e-3, 0.2 / 3) / C1 * math.exp(-C2 * 0.5))
    K = cap_constant(inst, hp)
    assert K == pytest.approx((2 * math.sqrt(N) * y / s[-1] + ap) ** (1 / 3))
    assert psi_eps_hat(inst, hp, 1e-3) == pytest.approx(min(K, 1e-3 / (8 * 3 * N * K ** 2)))


def test_algorithm_constants_by_hand():
    inst = instance_a2()
    hp = Hyperparams(4, 0.3)
    eps, C1, C2 = 1e-3, 2.0, 1.0
    U_alpha, L_t, U_eta, K, eps_hat = algorithm_constants(inst, hp, 1.0, eps, C1, C2)
    y = inst.y_norm
    assert U_alpha == pytest.approx((eps / (3 * C1 * y)) ** (1 / 4) * y ** 0.25)
    smin = inst.sigma_min
    rate = 2 * 16 * smin ** 2 * 0.3 ** 6
    assert L_t == pytest.approx(max((math.log(24 * K ** 10) - math.log(eps * 0.3 ** 6)) / rate, 1.0))
    assert eps_hat == pytest.approx(min(K, eps / (3 * 16 * 4 * 3 * K ** 3)))
    assert U_eta == pytest.approx(psi_step_bound(inst, hp, 1.0, eps, split=3.0))


def test_bundle_positive_finite():
    # t is kept small enough that exp(-C t) in the step bounds is representable.
    for inst in builtin_instances():
        for p in (2.0, 3.0, 5.0):
            b = bounds(inst, Hyperparams(p, 0.1), 1e-4, 1e-3)
            d = b.to_dict()
            assert set(d) == set(FORMULAS)
            for k, v in d.items():
                assert np.isfinite(v) and v > 0, k


def test_monotonicity():
    inst = instance_a2()
    hp = Hyperparams(3, 0.2)
    ts = [0.0, 1e-4, 1e-3]
    assert all(eta_max(inst, hp, a, 1e-3) > eta_max(inst, hp, b, 1e-3) for a, b in zip(ts, ts[1:]))
    eps = [1e-1, 1e-2, 1e-3]
    assert all(eta_max(inst, hp, 1e-4, a) > eta_max(inst, hp, 1e-4, b) for a, b in zip(eps, eps[1:]))
    K2s = [flow_rate(inst, Hyperparams(3, a))[1] for a in (0.05, 0.1, 0.2)]
    assert K2s == sorted(K2s)


def test_step_bound_and_horizon():
    hp = Hyperparams(2, 0.5)
    eta, J = gd_step_bound(ONE_D, hp, 0.01, 1e-2)
    assert J == math.floor(0.01 / eta)
    t = max_horizon(ONE_D, hp, 1e-2, 10_000)
    eta_t, J_t = gd_step_bound(ONE_D, hp, t, 1e-2)
    assert 9_990 <= J_t <= 10_000
    with pytest.raises(InvalidInputError):
        gd_step_bound(ONE_D, hp, 5.0, 1e-2)


def test_errors():
    inst = RegressionInstance(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2), check_rank=False)
    with pytest.raises(RankDeficientError):
        bounds(inst, Hyperparams(2, 0.1), 1.0, 1e-3)
    with pytest.raises(InvalidInputError):
        bounds(instance_a2(), Hyperparams(2, 0.1), -1.0, 1e-3)
    with pytest.raises(InvalidInputError):
        eta_max(instance_a2(), Hyperparams(2, 0.1), 1.0, 0.0)


def test_log_step_bounds():
    inst = instance_a2()
    hp = Hyperparams(3, 0.1)
    log_eta, log_U = log_step_bounds(inst, hp, 1e-4, 1e-3)
    b = bounds(inst, hp, 1e-4, 1e-3)
    assert math.exp(log_eta) == pytest.approx(b.eta_max, rel=1e-12)
    assert math.exp(log_U) == pytest.approx(b.U_eta, rel=1e-12)
    # At t = 1 both bounds underflow; the logarithms stay finite.
    b1 = bounds(inst, hp, 1.0, 1e-3)
    assert b1.eta_max == 0.0 and b1.U_eta == 0.0
    assert all(np.isfinite(v) and v < -700 for v in log_step_bounds(inst, hp, 1.0, 1e-3))
