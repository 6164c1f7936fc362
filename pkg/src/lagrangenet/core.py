"""Network topology, activations and the feasible forward pass.

A network is a DAG of neurons. Every non-input neuron ``i`` computes
``x_i = act_i(a_i)`` with ``a_i = b_i + sum_j w_ij * x_j``. Biases are
weights from a constant-1 virtual input, so the weight vector holds one
entry per edge (in edge-list order) followed by one entry per biased
neuron (in neuron-list order).

Values live in "slots": input neurons occupy slots ``0..n_in-1`` (in
``inputs`` order) and constrained (non-input) neurons follow, in neuron-list
order. Per-example neural outputs ``x`` have one column per constrained
neuron, in that same order.
"""
from __future__ import annotations

import enum
import heapq
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


class StructureError(ValueError):
    pass


class UsageError(ValueError):
    pass


class ActivationKind(str, enum.Enum):
    IDENTITY = "identity"
    TANH = "tanh"
    LOGISTIC = "logistic"
    RELU = "relu"


def _act(kind: ActivationKind, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if kind is ActivationKind.IDENTITY:
        return a.copy(), np.ones_like(a)
    if kind is ActivationKind.TANH:
        v = np.tanh(a)
        return v, 1.0 - v * v
    if kind is ActivationKind.LOGISTIC:
        # tanh form is overflow-free and exact at 0
        v = 0.5 * (1.0 + np.tanh(0.5 * a))
        return v, v * (1.0 - v)
    if kind is ActivationKind.RELU:
        # derivative at the kink is 0
        return np.maximum(a, 0.0), (a > 0.0).astype(float)
    raise UsageError(f"unknown activation {kind!r}")


def activation_eval(kind: ActivationKind | str, a):
    """Value and exact derivative of ``kind`` at ``a`` (scalar or array)."""
    kind = ActivationKind(kind)
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite pre-activation {a!r}")
    v, d = _act(kind, arr)
    if arr.ndim == 0:
        return float(v), float(d)
    return v, d


@dataclass(frozen=True)
class Neuron:
    id: int
    act: ActivationKind = ActivationKind.TANH
    bias: bool = True

    def __post_init__(self):
        object.__setattr__(self, "act", ActivationKind(self.act))


@dataclass(frozen=True)
class Network:
    """Immutable feedforward DAG.

    Construction validates the topology and precomputes the index tables
    used by the vectorised Lagrangian code.
    """

    neurons: tuple[Neuron, ...]
    edges: tuple[tuple[int, int], ...]
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    topo_order: tuple[int, ...] = field(init=False)

    # derived tables
    constrained: tuple[int, ...] = field(init=False, repr=False, compare=False)
    col: dict = field(init=False, repr=False, compare=False)
    slot: dict = field(init=False, repr=False, compare=False)
    num_weights: int = field(init=False, repr=False, compare=False)
    bias_index: dict = field(init=False, repr=False, compare=False)
    parents: dict = field(init=False, repr=False, compare=False)
    children: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        neurons = tuple(
            n if isinstance(n, Neuron) else Neuron(int(n[0]), ActivationKind(n[1]), bool(n[2]))
            for n in self.neurons
        )
        edges = tuple((int(s), int(d)) for s, d in self.edges)
        inputs = tuple(int(i) for i in self.inputs)
        outputs = tuple(int(o) for o in self.outputs)
        set_ = object.__setattr__
        set_(self, "neurons", neurons)
        set_(self, "edges", edges)
        set_(self, "inputs", inputs)
        set_(self, "outputs", outputs)

        if not neurons:
            raise StructureError("network has no neurons")
        ids = [n.id for n in neurons]
        if len(set(ids)) != len(ids):
            raise StructureError("duplicate neuron ids")
        idset = set(ids)
        if not inputs or not outputs:
            raise StructureError("network needs at least one input and one output")
        if len(set(inputs)) != len(inputs) or len(set(outputs)) != len(outputs):
            raise StructureError("duplicate input or output ids")
        if not set(inputs) <= idset or not set(outputs) <= idset:
            raise StructureError("input/output ids must name neurons")
        if set(inputs) & set(outputs):
            raise StructureError("input and output sets must be disjoint")
        if len(set(edges)) != len(edges):
            raise StructureError("duplicate edges")
        for s, d in edges:
            if s not in idset or d not in idset:
                raise StructureError(f"edge ({s}, {d}) references an unknown neuron")
            if s == d:
                raise StructureError(f"self loop on neuron {s}")
            if d in inputs:
                raise StructureError(f"input neuron {d} has an incoming edge")
        by_id = {n.id: n for n in neurons}
        for i in inputs:
            if by_id[i].bias:
                raise StructureError(f"input neuron {i} cannot carry a bias")

        parents: dict[int, list[tuple[int, int]]] = {i: [] for i in ids}
        children: dict[int, list[tuple[int, int]]] = {i: [] for i in ids}
        for k, (s, d) in enumerate(edges):
            parents[d].append((s, k))
            children[s].append((d, k))
        inset = set(inputs)
        for i in ids:
            if i not in inset and not parents[i]:
                raise StructureError(f"non-input neuron {i} has no incoming edge")

        # Kahn with smallest-id tie break, so the order depends only on topology
        indeg = {i: len(parents[i]) for i in ids}
        heap = [i for i in ids if indeg[i] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            i = heapq.heappop(heap)
            order.append(i)
            for d, _ in children[i]:
                indeg[d] -= 1
                if indeg[d] == 0:
                    heapq.heappush(heap, d)
        if len(order) != len(ids):
            raise StructureError("edge graph contains a cycle")

        constrained = tuple(i for i in ids if i not in inset)
        slot = {i: k for k, i in enumerate(inputs)}
        slot.update({i: len(inputs) + k for k, i in enumerate(constrained)})
        col = {i: k for k, i in enumerate(constrained)}
        bias_index = {}
        nw = len(edges)
        for i in constrained:
            if by_id[i].bias:
                bias_index[i] = nw
                nw += 1

        set_(self, "topo_order", tuple(order))
        set_(self, "constrained", constrained)
        set_(self, "col", col)
        set_(self, "slot", slot)
        set_(self, "num_weights", nw)
        set_(self, "bias_index", bias_index)
        # parents sorted by source id: storage order of edges must not matter
        set_(self, "parents", {i: tuple(sorted(p)) for i, p in parents.items()})
        set_(self, "children", {i: tuple(sorted(c)) for i, c in children.items()})
        self._build_tables()

    def _build_tables(self):
        set_ = object.__setattr__
        by_id = {n.id: n for n in self.neurons}
        set_(self, "acts", tuple(by_id[i].act for i in self.constrained))
        set_(self, "output_cols", np.array([self.col[o] for o in self.outputs], dtype=int))
        set_(self, "edge_src_slot", np.array([self.slot[s] for s, _ in self.edges], dtype=int))
        set_(self, "edge_dst_col", np.array([self.col[d] for _, d in self.edges], dtype=int))
        set_(self, "bias_cols", np.array(sorted(self.col[i] for i in self.bias_index), dtype=int))
        set_(self, "bias_w", np.array([self.bias_index[i] for i in self.constrained if i in self.bias_index], dtype=int))
        # per constrained column: parent slots and weight indices, sorted by source id
        set_(self, "parent_slots", tuple(
            np.array([self.slot[s] for s, _ in self.parents[i]], dtype=int) for i in self.constrained))
        set_(self, "parent_w", tuple(
            np.array([k for _, k in self.parents[i]], dtype=int) for i in self.constrained))
        set_(self, "topo_cols", tuple(self.col[i] for i in self.topo_order if i in self.col))

    # -- convenience -------------------------------------------------------

    @property
    def num_inputs(self) -> int:
        return len(self.inputs)

    @property
    def num_constrained(self) -> int:
        return len(self.constrained)

    @property
    def hidden(self) -> tuple[int, ...]:
        outs = set(self.outputs)
        return tuple(i for i in self.constrained if i not in outs)

    def neuron(self, i: int) -> Neuron:
        for n in self.neurons:
            if n.id == i:
                return n
        raise KeyError(i)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "neurons": [{"id": n.id, "act": n.act.value, "bias": n.bias} for n in self.neurons],
            "edges": [[s, d] for s, d in self.edges],
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Network":
        inputs = set(doc["inputs"])
        neurons = tuple(
            Neuron(int(n["id"]), ActivationKind(n.get("act", "identity")),
                   bool(n.get("bias", n["id"] not in inputs)))
            for n in doc["neurons"]
        )
        return cls(neurons, tuple(tuple(e) for e in doc["edges"]), tuple(doc["inputs"]), tuple(doc["outputs"]))

    @classmethod
    def from_json(cls, text: str) -> "Network":
        return cls.from_dict(json.loads(text))


def build_mlp(layer_sizes: Sequence[int], activation=ActivationKind.TANH,
              output_activation=ActivationKind.IDENTITY) -> Network:
    """Fully connected layered network with a bias on every non-input neuron.

    Neuron ids are assigned layer-major starting from 0.
    """
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise StructureError("an MLP needs at least an input and an output layer")
    if any(int(s) != s or s < 1 for s in sizes):
        raise StructureError(f"layer sizes must be positive integers, got {sizes}")
    activation = ActivationKind(activation)
    output_activation = ActivationKind(output_activation)

    layers, nid = [], 0
    for s in sizes:
        layers.append(list(range(nid, nid + s)))
        nid += s
    neurons = [Neuron(i, ActivationKind.IDENTITY, False) for i in layers[0]]
    for li, layer in enumerate(layers[1:], start=1):
        act = output_activation if li == len(layers) - 1 else activation
        neurons += [Neuron(i, act, True) for i in layer]
    edges = [(s, d) for prev, cur in zip(layers, layers[1:]) for d in cur for s in prev]
    return Network(tuple(neurons), tuple(edges), tuple(layers[0]), tuple(layers[-1]))


def init_weights(net: Network, rng: np.random.Generator) -> np.ndarray:
    """Uniform(-r, r) with r = 1/sqrt(fan-in); the bias counts towards fan-in."""
    w = np.empty(net.num_weights)
    for i in net.constrained:
        idx = [k for _, k in net.parents[i]]
        if i in net.bias_index:
            idx.append(net.bias_index[i])
        r = 1.0 / np.sqrt(len(idx))
        w[idx] = rng.uniform(-r, r, size=len(idx))
    return w


def check_weights(net: Network, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (net.num_weights,):
        raise ShapeError(f"expected {net.num_weights} weights, got shape {w.shape}")
    return w


def as_batch(net: Network, inputs) -> tuple[np.ndarray, bool]:
    """Coerce inputs to (E, n_in); report whether a single example was given."""
    arr = np.asarray(inputs, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != net.num_inputs:
        raise ShapeError(f"expected inputs with {net.num_inputs} columns, got shape {np.shape(inputs)}")
    return arr, single


def neuron_preact(net: Network, c: int, w: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Pre-activation of constrained column ``c`` from slot values (E, n_slots).

    Accumulated elementwise, bias first and parents in source-id order, so the
    forward pass and the residual share bit-identical arithmetic.
    """
    i = net.constrained[c]
    bi = net.bias_index.get(i)
    a = np.full(values.shape[0], w[bi]) if bi is not None else np.zeros(values.shape[0])
    for s, k in zip(net.parent_slots[c], net.parent_w[c]):
        a = a + w[k] * values[:, s]
    return a


def forward(net: Network, w, inputs) -> np.ndarray:
    """Feasible neural outputs, one column per constrained neuron.

    ``inputs`` is one example (1-D) or a batch (E, n_in); the result has the
    matching rank.
    """
    w = check_weights(net, w)
    batch, single = as_batch(net, inputs)
    values = np.zeros((batch.shape[0], net.num_inputs + net.num_constrained))
    values[:, : net.num_inputs] = batch
    for c in net.topo_cols:
        a = neuron_preact(net, c, w, values)
        values[:, net.num_inputs + c] = _act(net.acts[c], a)[0]
    x = values[:, net.num_inputs:].copy()
    return x[0] if single else x


def predict(net: Network, w, inputs) -> np.ndarray:
    """Outputs of the output neurons only."""
    x = forward(net, w, inputs)
    return x[..., net.output_cols]
