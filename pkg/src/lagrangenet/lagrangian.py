"""The constrained-learning Lagrangian over (weights, neural outputs, multipliers).

For example ``e`` and constrained neuron ``i`` the architectural constraint is

    G[e, i] = x[e, i] - act_i(a[e, i]),   a[e, i] = b_i + sum_j w_ij * x[e, j]

and the Lagrangian is

    L = sum_e V(x[e, outputs], t[e]) + sum_{e,i} lam[e, i] * c[e, i]
        + rho/2 * sum_{e,i} c[e, i]**2

with ``c = G`` by default, or ``c = shrink_eps(G)`` when the eps-insensitive
variant is on. The loss only sees the *stored* outputs ``x``.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    Network, NumericError, ShapeError, UsageError, _act, as_batch, check_weights, neuron_preact,
)


class LossKind(str, enum.Enum):
    SQUARED_ERROR = "squared_error"
    CROSS_ENTROPY_WITH_LOGISTIC = "cross_entropy_with_logistic"


def loss_terms(kind: LossKind | str, pred: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-example loss and its gradient w.r.t. ``pred`` (both (E, k) inputs).

    squared_error is ``sum_k (p - t)^2``; cross_entropy_with_logistic treats
    ``pred`` as logits: ``softplus(p) - t*p``.
    """
    kind = LossKind(kind)
    if kind is LossKind.SQUARED_ERROR:
        r = pred - target
        return np.sum(r * r, axis=-1), 2.0 * r
    p = 0.5 * (1.0 + np.tanh(0.5 * pred))
    return np.sum(np.logaddexp(0.0, pred) - target * pred, axis=-1), p - target


def eps_insensitive_residual(g, eps: float):
    """Soft shrinkage ``sign(g) * max(|g| - eps, 0)`` and its derivative.

    The derivative is 1 outside the dead zone and 0 inside it, including the
    kink ``|g| == eps``.
    """
    if eps < 0:
        raise UsageError(f"eps must be >= 0, got {eps}")
    arr = np.asarray(g, dtype=float)
    mag = np.abs(arr) - eps
    value = np.sign(arr) * np.maximum(mag, 0.0)
    deriv = (mag > 0.0).astype(float)
    if arr.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


@dataclass
class AdjointState:
    """A point of the learning adjoint space.

    ``w`` has one entry per weight, ``x`` and ``lam`` are (examples x
    constrained neurons).
    """

    w: np.ndarray
    x: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.w.ndim != 1 or self.x.ndim != 2:
            raise ShapeError("w must be 1-D and x 2-D")
        if self.x.shape != self.lam.shape:
            raise ShapeError(f"x {self.x.shape} and lam {self.lam.shape} must have the same shape")
        for name in ("w", "x", "lam"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericError(f"non-finite entries in {name}")

    @property
    def num_examples(self) -> int:
        return self.x.shape[0]

    def copy(self) -> "AdjointState":
        return AdjointState(self.w.copy(), self.x.copy(), self.lam.copy())

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.w, self.x.ravel(), self.lam.ravel()])

    def unflatten(self, flat) -> "AdjointState":
        """State of this shape built from a flat vector (w, x row-major, lam row-major)."""
        flat = np.asarray(flat, dtype=float)
        nw, nx = self.w.size, self.x.size
        if flat.shape != (nw + 2 * nx,):
            raise ShapeError(f"flat vector has shape {flat.shape}, expected ({nw + 2 * nx},)")
        return AdjointState(flat[:nw].copy(), flat[nw:nw + nx].reshape(self.x.shape).copy(),
                            flat[nw + nx:].reshape(self.x.shape).copy())

    def to_dict(self) -> dict:
        return {
            "format": "adjoint-state",
            "version": 1,
            "shape": {"w": [int(self.w.size)], "x": list(self.x.shape), "lam": list(self.lam.shape)},
            "values": [float(v) for v in self.flatten()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "AdjointState":
        if doc.get("format") != "adjoint-state":
            raise ValueError("not an adjoint-state document")
        shape = doc["shape"]
        nw = int(shape["w"][0])
        xs = tuple(int(s) for s in shape["x"])
        if tuple(shape["lam"]) != xs:
            raise ShapeError("x and lam shapes differ in header")
        template = cls(np.zeros(nw), np.zeros(xs), np.zeros(xs))
        return template.unflatten(doc["values"])

    @classmethod
    def from_json(cls, text: str) -> "AdjointState":
        return cls.from_dict(json.loads(text))


def check_state(net: Network, state: AdjointState, num_examples: int | None = None):
    check_weights(net, state.w)
    if state.x.shape[1] != net.num_constrained:
        raise ShapeError(f"state has {state.x.shape[1]} neuron columns, network has {net.num_constrained}")
    if num_examples is not None and state.x.shape[0] != num_examples:
        raise ShapeError(f"state has {state.x.shape[0]} examples, batch has {num_examples}")


def _slot_values(net: Network, inputs: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.concatenate([inputs, x], axis=1)


def _preactivations(net: Network, w: np.ndarray, values: np.ndarray):
    """Pre-activations, activations and derivatives, each (E, C)."""
    E, C = values.shape[0], net.num_constrained
    A = np.empty((E, C))
    S = np.empty((E, C))
    D = np.empty((E, C))
    for c in range(C):
        a = neuron_preact(net, c, w, values)
        A[:, c] = a
        S[:, c], D[:, c] = _act(net.acts[c], a)
    return A, S, D


def constraint_residual(net: Network, w, x, example_input) -> np.ndarray:
    """``G = x - act(a)`` for every constrained neuron.

    Accepts one example (1-D ``x`` and input) or a batch (2-D).
    """
    w = check_weights(net, w)
    inputs, single = as_batch(net, example_input)
    x = np.asarray(x, dtype=float)
    xb = x[None, :] if x.ndim == 1 else x
    if xb.shape != (inputs.shape[0], net.num_constrained):
        raise ShapeError(f"x has shape {x.shape}, expected {(inputs.shape[0], net.num_constrained)}")
    _, S, _ = _preactivations(net, w, _slot_values(net, inputs, xb))
    G = xb - S
    return G[0] if single else G


@dataclass
class BlockGradients:
    d_w: np.ndarray
    d_x: np.ndarray
    d_lam: np.ndarray

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.d_w, self.d_x.ravel(), self.d_lam.ravel()])


@dataclass
class Evaluation:
    """Everything one pass over the batch produces."""

    value: float
    loss: float
    residual: np.ndarray       # raw G
    effective: np.ndarray      # c, the residual entering the multiplier term
    grads: BlockGradients


def _targets(net: Network, batch, E: int) -> tuple[np.ndarray, np.ndarray]:
    inputs = np.asarray(batch.inputs, dtype=float)
    targets = np.asarray(batch.targets, dtype=float)
    if inputs.shape[0] == 0:
        raise UsageError("empty batch")
    if inputs.shape != (E, net.num_inputs):
        raise ShapeError(f"batch inputs have shape {inputs.shape}, expected {(E, net.num_inputs)}")
    if targets.shape != (E, len(net.outputs)):
        raise ShapeError(f"batch targets have shape {targets.shape}, expected {(E, len(net.outputs))}")
    return inputs, targets


def evaluate(net: Network, state: AdjointState, batch, loss=LossKind.SQUARED_ERROR,
             rho: float = 0.0, eps: float = 0.0) -> Evaluation:
    """Lagrangian value, residuals and block gradients in a single pass."""
    check_state(net, state)
    inputs, targets = _targets(net, batch, state.x.shape[0])
    w, x, lam = state.w, state.x, state.lam
    values = _slot_values(net, inputs, x)
    _, S, D = _preactivations(net, w, values)
    G = x - S
    if eps > 0.0:
        c, dc = eps_insensitive_residual(G, eps)
    else:
        c, dc = G, None

    per_ex, dV = loss_terms(loss, x[:, net.output_cols], targets)
    loss_val = float(np.sum(per_ex))
    value = loss_val + float(np.sum(lam * c))
    if rho:
        value += 0.5 * rho * float(np.sum(c * c))

    # mu = dL/dG, delta = dL/da (up to sign)
    mu = lam + rho * c if rho else lam.copy()
    if dc is not None:
        mu = mu * dc
    delta = mu * D

    nin = net.num_inputs
    W = np.zeros((net.num_constrained, nin + net.num_constrained))
    W[net.edge_dst_col, net.edge_src_slot] = w[: len(net.edges)]

    d_x = mu - delta @ W[:, nin:]
    d_x[:, net.output_cols] += dV

    d_w = np.empty_like(w)
    d_w[: len(net.edges)] = -(delta.T @ values)[net.edge_dst_col, net.edge_src_slot]
    d_w[net.bias_w] = -np.sum(delta[:, net.bias_cols], axis=0)

    return Evaluation(value, loss_val, G, c, BlockGradients(d_w, d_x, c.copy() if dc is not None else G.copy()))


def lagrangian_value(net: Network, state: AdjointState, batch, loss=LossKind.SQUARED_ERROR,
                     rho: float = 0.0, eps: float = 0.0) -> float:
    return evaluate(net, state, batch, loss, rho, eps).value


def block_gradients(net: Network, state: AdjointState, batch, loss=LossKind.SQUARED_ERROR,
                    rho: float = 0.0, eps: float = 0.0) -> BlockGradients:
    """Exact partials of the Lagrangian w.r.t. w, x and lam.

    ``d_lam`` is the (effective) constraint residual itself.
    """
    return evaluate(net, state, batch, loss, rho, eps).grads


def finite_diff_gradient(f: Callable[[np.ndarray], float], point, h: float = 1e-5) -> np.ndarray:
    """Central differences ``(f(p + h e_k) - f(p - h e_k)) / 2h`` per coordinate."""
    if not h > 0:
        raise UsageError(f"step h must be > 0, got {h}")
    p = np.array(point, dtype=float)
    grad = np.empty_like(p)
    for k in range(p.size):
        orig = p[k]
        p[k] = orig + h
        fp = f(p)
        p[k] = orig - h
        fm = f(p)
        p[k] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value at coordinate {k}")
        grad[k] = (fp - fm) / (2.0 * h)
    return grad
