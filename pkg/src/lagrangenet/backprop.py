"""Classical backpropagation and the closed-form multiplier solve.

At a feasible point, stationarity of the Lagrangian in ``x`` gives the
backward recursion

    lam_i = sum_{children k} lam_k * act_k'(a_k) * w_ki  -  dV/dx_i

so ``lam`` is the negated backpropagated sensitivity, and the weight block
of the Lagrangian gradient reproduces the BP gradient.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import Network, _act, as_batch, check_weights, neuron_preact
from .lagrangian import AdjointState, LossKind, _targets, block_gradients, loss_terms


def _forward_cache(net: Network, w: np.ndarray, inputs: np.ndarray):
    E = inputs.shape[0]
    values = np.zeros((E, net.num_inputs + net.num_constrained))
    values[:, : net.num_inputs] = inputs
    D = np.zeros((E, net.num_constrained))
    for c in net.topo_cols:
        a = neuron_preact(net, c, w, values)
        values[:, net.num_inputs + c], D[:, c] = _act(net.acts[c], a)
    return values, D


def backprop_gradient(net: Network, w, batch, loss=LossKind.SQUARED_ERROR) -> np.ndarray:
    """Gradient of ``sum_e V(forward(w, input_e), target_e)`` by reverse accumulation."""
    w = check_weights(net, w)
    inputs, _ = as_batch(net, batch.inputs)
    inputs, targets = _targets(net, batch, inputs.shape[0])
    values, D = _forward_cache(net, w, inputs)
    nin = net.num_inputs

    # sens[:, c] = dLoss/dx_c, filled in reverse topological order
    sens = np.zeros((inputs.shape[0], net.num_constrained))
    _, dV = loss_terms(loss, values[:, nin + net.output_cols], targets)
    sens[:, net.output_cols] = dV
    grad = np.zeros_like(w)
    for c in reversed(net.topo_cols):
        i = net.constrained[c]
        da = sens[:, c] * D[:, c]
        for s, k in net.parents[i]:
            grad[k] += np.sum(da * values[:, net.slot[s]])
            if s in net.col:
                sens[:, net.col[s]] += da * w[k]
        if i in net.bias_index:
            grad[net.bias_index[i]] += np.sum(da)
    return grad


@dataclass
class AdjointSolution:
    lam_star: np.ndarray
    x_feasible: np.ndarray

    def state(self, w) -> AdjointState:
        return AdjointState(np.asarray(w, dtype=float).copy(), self.x_feasible.copy(), self.lam_star.copy())


def solve_adjoint(net: Network, w, batch, loss=LossKind.SQUARED_ERROR,
                  counter: Counter | None = None) -> AdjointSolution:
    """Feasible outputs and the multipliers that zero the x-block gradient.

    Each neuron is visited once and each edge read once per neuron visit;
    pass a ``Counter`` to record ``neuron`` and ``edge`` visits.
    """
    w = check_weights(net, w)
    inputs, _ = as_batch(net, batch.inputs)
    inputs, targets = _targets(net, batch, inputs.shape[0])
    values, D = _forward_cache(net, w, inputs)
    nin = net.num_inputs
    x = values[:, nin:].copy()

    _, dV = loss_terms(loss, x[:, net.output_cols], targets)
    lam = np.zeros_like(x)
    lam[:, net.output_cols] = -dV
    for c in reversed(net.topo_cols):
        i = net.constrained[c]
        # children were finished earlier in reverse order
        for d, k in net.children[i]:
            kc = net.col[d]
            lam[:, c] += lam[:, kc] * D[:, kc] * w[k]
            if counter is not None:
                counter["edge"] += 1
        if counter is not None:
            counter["neuron"] += 1
    return AdjointSolution(lam, x)


def verify_bp_equivalence(net: Network, w, batch, loss=LossKind.SQUARED_ERROR) -> dict:
    """Compare the Lagrangian weight gradient at the adjoint solution with BP.

    ``max_rel`` is normwise: ``max|a - b| / max(max|a|, max|b|)``, 0 when
    both gradients vanish.
    """
    sol = solve_adjoint(net, w, batch, loss)
    d_w = block_gradients(net, sol.state(w), batch, loss).d_w
    bp = backprop_gradient(net, w, batch, loss)
    diff = np.abs(d_w - bp)
    max_abs = float(diff.max()) if diff.size else 0.0
    scale = float(max(np.abs(d_w).max(initial=0.0), np.abs(bp).max(initial=0.0)))
    max_rel = max_abs / scale if scale > 0 else 0.0
    return {"max_abs": max_abs, "max_rel": max_rel, "lagrangian": d_w, "backprop": bp}
