import math

import numpy as np
import pytest

import dlnbp.dynamics as dyn
from dlnbp.bounds import eta_max, flow_rate, max_horizon
from dlnbp.bp import solve_qstar
from dlnbp.dynamics import (DlnParams, FlowTrace, euler_integrate, exact_flow_state,
                            flow_invariant_defect, flow_run, gd_matches_flow, gd_run, grad_loss,
                            hess_loss, loss, theta_bound_slack)
from dlnbp.errors import IntegrationError, InvalidInputError
from dlnbp.instances import RegressionInstance, instance_a1, instance_a2, instance_a3
from dlnbp.potentials import Hyperparams

ONE_D = RegressionInstance(np.array([[1.0]]), np.array([1.0]), "one-d")


@pytest.fixture(scope="module")
def traces():
    out = []
    for inst, p, alpha in ((instance_a1(), 2.0, 0.1), (instance_a2(), 3.0, 0.5),
                           (instance_a3(), 4.0, 0.7)):
        hp = Hyperparams(p, alpha)
        _, K2 = flow_rate(inst, hp)
        out.append((inst, hp, flow_run(inst, hp, 5.0 / K2, rtol=1e-10)))
    return out


def test_loss_examples(rng):
    inst = instance_a2()
    v = rng.uniform(0, 2, 3)
    assert loss(DlnParams(v, v), inst, 3) == pytest.approx(0.5 * inst.y @ inst.y)
    assert loss(DlnParams([1.0], [0.0]), ONE_D, 2) == 0.0
    inst2 = RegressionInstance(np.array([[1.0, 1.0]]), np.array([2.0]))
    assert loss(DlnParams([1.0, 1.0], [0.0, 0.0]), inst2, 2) == 0.0
    assert loss(DlnParams(-v, v), inst, 2) >= 0


def test_grad_examples():
    inst = instance_a2()
    g = grad_loss(DlnParams(np.zeros(3), np.zeros(3)), inst, 2.5)
    assert not np.any(g.as_vector())
    # theta_+^3 = W, theta_- = 0 interpolates, so the gradient vanishes.
    w = np.array([1.0, 2.0, 0.0])
    g = grad_loss(DlnParams(w ** (1 / 3), np.zeros(3)), inst, 3)
    np.testing.assert_allclose(g.as_vector(), 0.0, atol=1e-14)


@pytest.mark.parametrize("p", [2.0, 2.5, 3.0, 4.0])
def test_grad_and_hessian_finite_differences(p, rng):
    inst = instance_a1()
    v = rng.uniform(-1.0, 1.0, 2 * inst.N)
    d = 1e-6
    g = grad_loss(DlnParams.from_vector(v), inst, p).as_vector()
    fd = np.array([(loss(DlnParams.from_vector(v + d * e), inst, p)
                    - loss(DlnParams.from_vector(v - d * e), inst, p)) / (2 * d)
                   for e in np.eye(2 * inst.N)])
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(g)
    H = hess_loss(DlnParams.from_vector(v), inst, p)
    fdH = np.array([(grad_loss(DlnParams.from_vector(v + d * e), inst, p).as_vector()
                     - grad_loss(DlnParams.from_vector(v - d * e), inst, p).as_vector()) / (2 * d)
                    for e in np.eye(2 * inst.N)])
    assert np.linalg.norm(H - fdH) <= 1e-6 * np.linalg.norm(H)
    np.testing.assert_allclose(H, H.T, atol=1e-14)


def test_params_validation():
    with pytest.raises(InvalidInputError):
        DlnParams([1.0, 2.0], [1.0])
    with pytest.raises(InvalidInputError):
        DlnParams([np.nan], [1.0])
    p = DlnParams.initial(3, 0.2)
    np.testing.assert_array_equal(p.psi(3), 0.0)
    np.testing.assert_array_equal(DlnParams.from_vector(p.as_vector()).theta_minus, p.theta_minus)


def test_gd_zero_steps():
    tr = gd_run(instance_a2(), Hyperparams(3, 0.1), 0.01, 0)
    assert len(tr) == 1
    np.testing.assert_array_equal(tr.final_psi, 0.0)


def test_gd_one_dimensional_converges():
    hp = Hyperparams(2, 0.1)
    eta = eta_max(ONE_D, hp, 0.0, 0.05)
    tr = gd_run(ONE_D, hp, eta, int(10.0 / eta), record=10)
    assert tr.status == "ok"
    assert abs(tr.final_psi[0] - 1.0) <= 1e-4


def test_gd_executes_exact_steps(rng):
    inst = instance_a3()
    hp = Hyperparams(2.5, 0.3)
    tr = gd_run(inst, hp, 0.01, 7, record=range(8))
    v = np.full(2 * inst.N, 0.3)
    for _ in range(7):
        v = v - 0.01 * grad_loss(DlnParams.from_vector(v), inst, 2.5).as_vector()
    np.testing.assert_array_equal(tr.theta_plus[-1], v[:inst.N])
    np.testing.assert_allclose(tr.times, 0.01 * np.arange(8))
    assert tr.info["steps_taken"] == 7


def test_gd_divergence_is_reported():
    tr = gd_run(instance_a2(), Hyperparams(2, 1.0), 5.0, 1000)
    assert tr.status == "diverged"
    assert tr.info["steps_taken"] < 1000
    with pytest.raises(InvalidInputError):
        gd_run(instance_a2(), Hyperparams(2, 1.0), -1.0, 10)
    with pytest.raises(InvalidInputError):
        gd_run(instance_a2(), Hyperparams(2, 1.0), 0.1, -1)


def test_gd_energy_non_increasing():
    inst = instance_a2()
    for p in (2.0, 3.0):
        hp = Hyperparams(p, 0.5)
        eta = eta_max(inst, hp, 0.0, 1e-2)
        tr = gd_run(inst, hp, eta, 3000, record=range(0, 3001, 50))
        assert np.all(np.diff(tr.residual) <= 1e-15)


def test_gd_approaches_flow_limit_linearly_in_eta():
    # The limit of gradient descent carries a first-order step-size bias.
    inst = instance_a2()
    hp = Hyperparams(3, 0.1)
    q = solve_qstar(inst, hp)
    errs = []
    for eta in (4e-3, 2e-3):
        tr = gd_run(inst, hp, eta, int(60 / eta), record=2)
        assert tr.residual[-1] <= 1e-10
        errs.append(np.linalg.norm(tr.final_psi - q))
    assert 1.8 <= errs[0] / errs[1] <= 2.2
    assert errs[1] <= 0.1


def test_flow_zero_horizon():
    tr = flow_run(instance_a2(), Hyperparams(2, 0.1), 0.0)
    assert len(tr) == 1
    np.testing.assert_array_equal(tr.final_psi, 0.0)
    with pytest.raises(InvalidInputError):
        flow_run(instance_a2(), Hyperparams(2, 0.1), -1.0)


def test_flow_trace_properties(traces):
    for inst, hp, tr in traces:
        assert tr.status == "ok"
        assert np.all(np.diff(tr.times) > 0)
        assert tr.residual_consistency(inst) <= 1e-12
        _, K2 = flow_rate(inst, hp)
        assert np.all(tr.residual <= inst.y_norm * np.exp(-K2 * tr.times) * (1 + 1e-6))
        cap = 2 * math.sqrt(inst.N) * inst.y_norm / inst.sigma_min
        assert np.all(np.max(np.abs(tr.psi), axis=1) <= cap)
        assert np.max(flow_invariant_defect(tr)) <= 1e-7
        assert np.min(theta_bound_slack(tr)) >= -1e-12
        assert np.all(tr.theta_plus > 0) and np.all(tr.theta_minus > 0)


def test_flow_exponential_convergence(traces):
    for inst, hp, tr in traces:
        q = solve_qstar(inst, hp)
        K1, K2 = flow_rate(inst, hp)
        assert np.all(np.linalg.norm(tr.psi - q, axis=1) <= K1 * np.exp(-K2 * tr.times))


def test_flow_self_consistency(traces):
    # psi(t) minimizes Q_p over {z : A z = A psi(t)}.
    for inst, hp, tr in traces:
        for k in (len(tr) // 4, len(tr) // 2, 3 * len(tr) // 4):
            target = inst.A @ tr.psi[k]
            sub = RegressionInstance(inst.A, target)
            assert np.linalg.norm(solve_qstar(sub, hp) - tr.psi[k]) <= 1e-6


def test_exact_synthetic_trace_has_zero_defect(rng):
    inst = instance_a3()
    for p in (2.0, 3.0, 4.5):
        hp = Hyperparams(p, 0.4)
        cs = rng.uniform(-0.05, 0.05, (5, inst.N))
        states = [np.concatenate(exact_flow_state(c, hp)) for c in cs]
        tr = FlowTrace.from_states(np.arange(5.0), states, inst, hp)
        assert np.max(flow_invariant_defect(tr)) <= 1e-14


def test_flow_matches_closed_form_in_one_dimension():
    # For A = [1] the correlation integral is c(t) = int (psi - 1) ds; check
    # the stored state against the closed form built from the trace itself.
    hp = Hyperparams(2, 0.5)
    tr = flow_run(ONE_D, hp, 2.0, rtol=1e-12, n_samples=400)
    c = np.concatenate([[0.0], np.cumsum(np.diff(tr.times) * 0.5 * (tr.psi[1:, 0] + tr.psi[:-1, 0] - 2))])
    tp, _ = exact_flow_state(c, hp)
    assert np.max(np.abs(tp - tr.theta_plus[:, 0])) <= 1e-4


def test_integration_failure_carries_partial_trace(monkeypatch):
    real = dyn.solve_ivp
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        sol = real(*args, **kwargs)
        if calls["n"] == 3:
            sol.status = -1
            sol.message = "forced failure"
        return sol

    monkeypatch.setattr(dyn, "solve_ivp", flaky)
    with pytest.raises(IntegrationError) as info:
        flow_run(instance_a2(), Hyperparams(2, 0.5), 1.0, n_samples=10)
    assert info.value.trace is not None
    assert len(info.value.trace) == 3
    assert info.value.trace.status == "failed"


def test_trace_serialization(traces):
    inst, hp, tr = traces[1]
    text = tr.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "t,residual,psi_1,psi_2,psi_3"
    assert len(lines) == len(tr) + 1
    row = [float(v) for v in lines[-1].split(",")]
    assert row[2:] == list(tr.final_psi)
    d = tr.to_dict()
    assert d["samples"][-1]["theta_plus"] == tr.theta_plus[-1].tolist()
    assert '"status": "ok"' in tr.to_json()


def test_euler_examples():
    assert euler_integrate(lambda t, y: 0.0 * y, 1.5, 1.0, 0.1) == 1.5
    for eta in (0.1, 0.01, 1e-3):
        y = euler_integrate(lambda t, y: -y, 1.0, 1.0, eta)
        assert y == pytest.approx((1 - eta) ** math.floor(1 / eta), rel=1e-12)
    # For f(y) = -y the Lipschitz and derivative constants are both 1.
    for eps in (1e-1, 1e-2):
        eta = min(eps, 1.0) * math.exp(-1.0)
        y = euler_integrate(lambda t, y: -y, 1.0, 1.0, eta)
        T = math.floor(1.0 / eta) * eta
        assert abs(y - math.exp(-T)) <= eps
    with pytest.raises(InvalidInputError):
        euler_integrate(lambda t, y: y, 1.0, 1.0, 0.0)


def test_gd_matches_flow_small_horizon():
    hp = Hyperparams(2, 0.5)
    t = max_horizon(ONE_D, hp, 1e-2, 20_000)
    rep = gd_matches_flow(ONE_D, hp, t, eps=1e-2)
    assert rep.passed and rep.J <= 20_000
    assert rep.to_dict()["gap"] == rep.gap
    gd = gd_run(ONE_D, hp, rep.eta, rep.J)
    assert np.max(flow_invariant_defect(gd)) <= 1e-2


def test_gd_matches_flow_huge_eps_and_limits():
    hp = Hyperparams(2, 0.5)
    rep = gd_matches_flow(ONE_D, hp, 1e-3, eps=10.0)
    assert rep.passed
    with pytest.raises(InvalidInputError):
        gd_matches_flow(ONE_D, hp, 5.0, eps=1e-2)
