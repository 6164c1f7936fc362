import numpy as np
import pytest

from lagrangenet.backprop import solve_adjoint
from lagrangenet.core import UsageError, build_mlp, forward
from lagrangenet.data import Dataset, gen_xor
from lagrangenet.lagrangian import AdjointState, BlockGradients, LossKind, block_gradients
from lagrangenet.optimizer import (
    DivergenceError, Method, SaddleConfig, gda_step, init_state, locality_audit,
    locality_violations, saddle_step, train,
)

from conftest import two_branch_net


def bilinear(state):
    # L(x, lam) = lam * x
    return BlockGradients(np.zeros(0), state.lam.copy(), state.x.copy())


def toy(x=1.0, lam=1.0):
    return AdjointState(np.zeros(0), [[x]], [[lam]])


def radius(s):
    return float(np.hypot(s.x[0, 0], s.lam[0, 0]))


def test_bilinear_single_gda_step():
    cfg = SaddleConfig(eta_w=0.1, eta_x=0.1, eta_lam=0.1)
    s = saddle_step(bilinear, toy(), cfg)
    assert s.x[0, 0] == pytest.approx(0.9, abs=1e-15)
    assert s.lam[0, 0] == pytest.approx(1.1, abs=1e-15)


@pytest.mark.parametrize("method, grows", [(Method.GDA, True), (Method.EXTRAGRADIENT, False)])
def test_bilinear_radius_regimes(method, grows):
    cfg = SaddleConfig(eta_w=0.1, eta_x=0.1, eta_lam=0.1, method=method)
    s, radii = toy(), [radius(toy())]
    for _ in range(1000):
        s = saddle_step(bilinear, s, cfg)
        radii.append(radius(s))
    steps = np.diff(radii)
    assert np.all(steps > 0) if grows else np.all(steps < 0)


def test_zero_gradient_state_unchanged(rng):
    net = build_mlp([2, 3, 1])
    w = rng.normal(size=net.num_weights)
    u = rng.normal(size=(3, 2))
    data = Dataset(u, forward(net, w, u)[:, net.output_cols])
    s = AdjointState(w, forward(net, w, u), np.zeros((3, 4)))
    out = gda_step(net, s, data, LossKind.SQUARED_ERROR, SaddleConfig())
    assert np.array_equal(out.flatten(), s.flatten())


def test_lambda_update_is_residual_ascent(rng):
    net = build_mlp([2, 3, 1])
    data = gen_xor()
    s = AdjointState(rng.normal(size=13), rng.normal(size=(4, 4)), rng.normal(size=(4, 4)))
    cfg = SaddleConfig(rho=0.0, eta_lam=0.3)
    G = block_gradients(net, s, data).d_lam
    np.testing.assert_array_equal(gda_step(net, s, data, "squared_error", cfg).lam, s.lam + 0.3 * G)


def test_step_is_simultaneous(rng):
    net = build_mlp([2, 3, 1])
    data = gen_xor()
    s = AdjointState(rng.normal(size=13), rng.normal(size=(4, 4)), rng.normal(size=(4, 4)))
    snapshot = s.copy()
    cfg = SaddleConfig(eta_w=0.02, eta_x=0.05, eta_lam=0.04, rho=0.3)
    g = block_gradients(net, snapshot, data, rho=0.3)
    out = gda_step(net, s, data, "squared_error", cfg)
    np.testing.assert_array_equal(out.w, snapshot.w - 0.02 * g.d_w)
    np.testing.assert_array_equal(out.x, snapshot.x - 0.05 * g.d_x)
    np.testing.assert_array_equal(out.lam, snapshot.lam + 0.04 * g.d_lam)
    np.testing.assert_array_equal(s.flatten(), snapshot.flatten())


def test_extragradient_uses_predicted_point(rng):
    net = build_mlp([2, 3, 1])
    data = gen_xor()
    s = AdjointState(rng.normal(size=13), rng.normal(size=(4, 4)), rng.normal(size=(4, 4)))
    cfg = SaddleConfig(eta_w=0.02, eta_x=0.05, eta_lam=0.04, rho=0.3, method="extragradient")
    g0 = block_gradients(net, s, data, rho=0.3)
    mid = AdjointState(s.w - 0.02 * g0.d_w, s.x - 0.05 * g0.d_x, s.lam + 0.04 * g0.d_lam)
    g1 = block_gradients(net, mid, data, rho=0.3)
    out = gda_step(net, s, data, "squared_error", cfg)
    np.testing.assert_array_equal(out.w, s.w - 0.02 * g1.d_w)
    np.testing.assert_array_equal(out.lam, s.lam + 0.04 * g1.d_lam)


def test_train_fixed_point_stops_after_window(rng):
    net = build_mlp([2, 3, 1])
    w = rng.normal(size=net.num_weights)
    u = rng.normal(size=(3, 2))
    data = Dataset(u, forward(net, w, u)[:, net.output_cols])
    start = solve_adjoint(net, w, data).state(w)
    state, trace = train(net, start, data, "squared_error", SaddleConfig(window=100))
    assert trace.converged and len(trace.records) == 100
    assert np.array_equal(state.flatten(), start.flatten())


def test_train_trace_fields_and_limit():
    net = build_mlp([2, 4, 1])
    data = gen_xor()
    _, trace = train(net, init_state(net, data, 0), data, "squared_error", SaddleConfig(max_iters=5))
    assert trace.stop_reason == "max_iters"
    assert [r["it"] for r in trace.records] == [1, 2, 3, 4, 5]
    assert set(trace.records[0]) == {"it", "L", "loss", "res_inf", "res_2", "gw", "gx", "gl"}


def test_train_deterministic():
    net = build_mlp([2, 4, 1])
    data = gen_xor()
    cfg = SaddleConfig(max_iters=300, seed=3)
    a = train(net, init_state(net, data, 3), data, "squared_error", cfg)
    b = train(net, init_state(net, data, 3), data, "squared_error", cfg)
    assert a[1].to_jsonl() == b[1].to_jsonl()
    assert np.array_equal(a[0].flatten(), b[0].flatten())


def test_divergence_reports_iteration():
    net = build_mlp([2, 4, 1])
    data = gen_xor()
    cfg = SaddleConfig(eta_w=5.0, eta_x=5.0, eta_lam=5.0, rho=0.0, max_iters=10_000)
    with pytest.raises(DivergenceError) as exc:
        train(net, init_state(net, data, 0), data, "squared_error", cfg)
    assert exc.value.iteration >= 1
    assert len(exc.value.trace.records) == exc.value.iteration - 1


def test_initial_state_is_feasible():
    net = build_mlp([2, 4, 1])
    s = init_state(net, gen_xor(), 0)
    assert not np.any(s.lam)
    assert not np.any(block_gradients(net, s, gen_xor()).d_lam)


@pytest.mark.parametrize("field, value", [("eta_w", -1.0), ("eta_x", 0.0), ("rho", -0.1),
                                          ("max_iters", 0), ("residual_tol", 0.0)])
def test_config_validation(field, value):
    with pytest.raises(UsageError, match=field):
        SaddleConfig(**{field: value})


def _random_state(rng, net, E):
    return AdjointState(rng.normal(size=net.num_weights), rng.normal(size=(E, net.num_constrained)),
                        rng.normal(size=(E, net.num_constrained)))


def test_disjoint_branch_multiplier_does_not_touch_other_branch(rng):
    net = two_branch_net()
    batch = Dataset(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)))
    s = _random_state(rng, net, 3)
    base = block_gradients(net, s, batch).d_w
    s.lam[:, net.col[3]] += 1.5
    after = block_gradients(net, s, batch).d_w
    left = [net.edges.index((0, 2)), net.edges.index((2, 4)), net.bias_index[2], net.bias_index[4]]
    assert base[left].tobytes() == after[left].tobytes()


def test_input_perturbation_is_per_example(rng):
    net = build_mlp([2, 3, 2])
    batch = Dataset(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)))
    s = _random_state(rng, net, 3)
    base = block_gradients(net, s, batch).d_lam
    batch.inputs[0, 1] += 0.7
    after = block_gradients(net, s, batch).d_lam
    assert base[1:].tobytes() == after[1:].tobytes()
    assert not np.array_equal(base[0], after[0])


@pytest.mark.parametrize("rho, eps", [(0.0, 0.0), (0.5, 0.0), (0.5, 0.05)])
def test_locality_audit_passes(rng, rho, eps):
    net = build_mlp([2, 3, 2])
    batch = Dataset(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)))
    assert locality_audit(net, _random_state(rng, net, 3), batch, "squared_error", rho, eps)


def test_locality_audit_detects_nonlocal_gradient(rng, monkeypatch):
    """A gradient that mixes examples must be flagged."""
    import lagrangenet.optimizer as opt

    real = opt.evaluate

    def leaky(*args, **kw):
        ev = real(*args, **kw)
        ev.grads.d_lam = ev.grads.d_lam + ev.grads.d_lam[::-1]
        return ev

    monkeypatch.setattr(opt, "evaluate", leaky)
    net = build_mlp([2, 2, 1])
    batch = Dataset(rng.normal(size=(2, 2)), rng.normal(size=(2, 1)))
    assert locality_violations(net, _random_state(rng, net, 2), batch)
