import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lagrangenet.core import (
    ActivationKind, Network, Neuron, NumericError, ShapeError, StructureError, activation_eval,
    build_mlp, forward, init_weights, predict,
)
from lagrangenet.checks import random_problem

from conftest import skip_net, two_branch_net

KINDS = list(ActivationKind)


def _is_topological(net):
    pos = {i: k for k, i in enumerate(net.topo_order)}
    return sorted(net.topo_order) == sorted(n.id for n in net.neurons) and all(
        pos[s] < pos[d] for s, d in net.edges)


def _has_cycle(ids, edges):
    # plain recursive DFS, independent of the library's Kahn ordering
    adj = {i: [] for i in ids}
    for s, d in edges:
        adj[s].append(d)
    color = {i: 0 for i in ids}

    def visit(i):
        color[i] = 1
        for d in adj[i]:
            if color[d] == 1 or (color[d] == 0 and visit(d)):
                return True
        color[i] = 2
        return False

    return any(color[i] == 0 and visit(i) for i in ids)


def test_build_mlp_counts():
    net = build_mlp([2, 2, 1], "tanh", "identity")
    assert len(net.neurons) == 5
    assert net.inputs == (0, 1) and net.outputs == (4,)
    assert net.num_weights == 9


def test_build_mlp_single_edge():
    net = build_mlp([1, 1], "identity", "identity")
    assert net.edges == ((0, 1),)
    assert net.num_weights == 2


def test_build_mlp_topo_order_is_valid():
    net = build_mlp([2, 3, 3, 1], "tanh", "logistic")
    assert not _has_cycle([n.id for n in net.neurons], net.edges)
    assert _is_topological(net)
    assert [n.id for n in net.neurons] == list(range(9))


@pytest.mark.parametrize("sizes", [[], [3], [2, 0, 1], [2, -1]])
def test_build_mlp_rejects_bad_layers(sizes):
    with pytest.raises(StructureError):
        build_mlp(sizes)


def test_network_rejects_cycle():
    n = (Neuron(0, "identity", False), Neuron(1, "tanh"), Neuron(2, "tanh"), Neuron(3, "tanh"))
    with pytest.raises(StructureError, match="cycle"):
        Network(n, ((0, 1), (1, 2), (2, 3), (3, 1)), (0,), (3,))


@pytest.mark.parametrize("edges, inputs, outputs", [
    (((0, 1),), (0,), (0,)),              # input doubles as output
    (((0, 1), (1, 0)), (0,), (1,)),        # edge into an input
    (((0, 1), (0, 1)), (0,), (1,)),        # duplicate edge
    (((0, 1),), (0,), (5,)),               # unknown output
])
def test_network_rejects_invalid(edges, inputs, outputs):
    n = (Neuron(0, "identity", False), Neuron(1, "tanh"))
    with pytest.raises(StructureError):
        Network(n, edges, inputs, outputs)


def test_non_input_without_parents_rejected():
    n = (Neuron(0, "identity", False), Neuron(1, "tanh"), Neuron(2, "tanh"))
    with pytest.raises(StructureError, match="no incoming"):
        Network(n, ((0, 1),), (0,), (1, 2))


@pytest.mark.parametrize("kind, a, expected", [
    ("tanh", 0.0, (0.0, 1.0)),
    ("logistic", 0.0, (0.5, 0.25)),
    ("identity", -3.0, (-3.0, 1.0)),
    ("relu", 2.0, (2.0, 1.0)),
    ("relu", -2.0, (0.0, 0.0)),
])
def test_activation_values(kind, a, expected):
    assert activation_eval(kind, a) == expected


def test_relu_derivative_at_kink_is_zero():
    assert activation_eval("relu", 0.0) == (0.0, 0.0)


def test_tanh_derivative_finite_difference():
    h = 1e-6
    fd = (math.tanh(0.7 + h) - math.tanh(0.7 - h)) / (2 * h)
    assert abs(activation_eval("tanh", 0.7)[1] - fd) <= 1e-8


@pytest.mark.parametrize("a", [math.inf, -math.inf, math.nan])
def test_activation_rejects_non_finite(a):
    with pytest.raises(NumericError):
        activation_eval("tanh", a)


@settings(max_examples=300, deadline=None)
@given(kind=st.sampled_from(KINDS), a=st.floats(-30, 30, allow_nan=False))
def test_activation_derivative_matches_central_difference(kind, a):
    h = 1e-6
    if kind is ActivationKind.RELU and abs(a) <= 2 * h:
        a = a + 1e-3  # step over the kink
    v, d = activation_eval(kind, a)
    fd = (activation_eval(kind, a + h)[0] - activation_eval(kind, a - h)[0]) / (2 * h)
    assert abs(d - fd) <= 1e-7 * max(1.0, abs(d))


def test_forward_identity_chain():
    n = [Neuron(0, "identity", False)] + [Neuron(i, "identity", False) for i in (1, 2, 3)]
    net = Network(tuple(n), ((0, 1), (1, 2), (2, 3)), (0,), (3,))
    assert np.array_equal(forward(net, np.ones(3), [2.0]), [2.0, 2.0, 2.0])


def test_forward_affine_single_neuron():
    net = build_mlp([1, 1], "identity", "identity")
    assert forward(net, [3.0, -1.0], [2.0]) == pytest.approx([5.0], abs=0)


def test_forward_shape_errors():
    net = build_mlp([2, 3, 1])
    with pytest.raises(ShapeError):
        forward(net, np.zeros(net.num_weights), [1.0, 2.0, 3.0])
    with pytest.raises(ShapeError):
        forward(net, np.zeros(3), [1.0, 2.0])


def test_forward_batch_matches_single_examples(rng):
    net = build_mlp([3, 5, 2], "tanh", "logistic")
    w = rng.normal(size=net.num_weights)
    inputs = rng.normal(size=(6, 3))
    batch = forward(net, w, inputs)
    for e in range(6):
        np.testing.assert_array_equal(batch[e], forward(net, w, inputs[e]))
    np.testing.assert_array_equal(predict(net, w, inputs), batch[:, net.output_cols])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_forward_invariant_under_edge_reordering(seed):
    rng = np.random.default_rng(seed)
    net, w, batch, _ = random_problem(rng)
    perm = rng.permutation(len(net.edges))
    shuffled = Network(net.neurons, tuple(net.edges[k] for k in perm), net.inputs, net.outputs)
    w2 = np.empty_like(w)
    w2[: len(perm)] = w[perm]
    w2[len(perm):] = w[len(perm):]
    np.testing.assert_array_equal(forward(shuffled, w2, batch.inputs), forward(net, w, batch.inputs))


@pytest.mark.parametrize("net", [build_mlp([2, 3, 1], "relu", "logistic"), two_branch_net(), skip_net()])
def test_json_roundtrip_lossless(net):
    doc = json.loads(net.to_json())
    assert set(doc) == {"neurons", "edges", "inputs", "outputs"}
    back = Network.from_json(net.to_json())
    assert back == net
    assert back.topo_order == net.topo_order
    assert back.num_weights == net.num_weights


def test_init_weights_within_fan_in_bound(rng):
    net = build_mlp([3, 4, 1])
    w = init_weights(net, rng)
    # hidden neurons: fan-in 3 + bias
    assert np.all(np.abs(w[:12]) <= 0.5)
