"""Support neurons, support examples and architecture pruning."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Network, StructureError, UsageError, check_weights
from .lagrangian import AdjointState, eps_insensitive_residual  # noqa: F401  (re-exported)


@dataclass
class SupportReport:
    tau: float
    neuron_ids: tuple
    neuron_scores: np.ndarray
    example_scores: np.ndarray
    support_neurons: frozenset
    support_examples: frozenset

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "neurons": [{"id": int(i), "score": float(s)} for i, s in zip(self.neuron_ids, self.neuron_scores)],
            "examples": [{"index": e, "score": float(s)} for e, s in enumerate(self.example_scores)],
            "support_neurons": sorted(int(i) for i in self.support_neurons),
            "support_examples": sorted(int(e) for e in self.support_examples),
        }


def support_report(state: AdjointState, tau: float, neuron_ids=None) -> SupportReport:
    """Threshold multiplier magnitudes; membership is strict (score > tau).

    ``neuron_ids`` names the multiplier columns (``net.constrained``); it
    defaults to the column indices.
    """
    if not tau >= 0:
        raise UsageError(f"tau must be >= 0, got {tau}")
    mag = np.abs(state.lam)
    E, C = mag.shape
    ids = tuple(range(C)) if neuron_ids is None else tuple(neuron_ids)
    if len(ids) != C:
        raise UsageError(f"{len(ids)} neuron ids for {C} multiplier columns")
    neuron_scores = mag.max(axis=0) if E else np.zeros(C)
    example_scores = mag.max(axis=1) if C else np.zeros(E)
    return SupportReport(
        float(tau), ids, neuron_scores, example_scores,
        frozenset(i for i, s in zip(ids, neuron_scores) if s > tau),
        frozenset(int(e) for e in np.flatnonzero(example_scores > tau)),
    )


def zero_fraction(state: AdjointState) -> float:
    """Fraction of multipliers that are exactly zero."""
    return float(np.mean(state.lam == 0.0))


def prune(net: Network, report: SupportReport) -> Network:
    """Drop hidden neurons outside the support set, with their edges.

    Inputs and outputs are always kept. Refuses (StructureError) when the
    result would leave a neuron without inputs or an output unreachable from
    the inputs.
    """
    keep = set(net.inputs) | set(net.outputs) | (set(net.hidden) & set(report.support_neurons))
    neurons = tuple(n for n in net.neurons if n.id in keep)
    edges = tuple(e for e in net.edges if e[0] in keep and e[1] in keep)

    reach = set(net.inputs)
    frontier = list(net.inputs)
    adj: dict[int, list[int]] = {}
    for s, d in edges:
        adj.setdefault(s, []).append(d)
    while frontier:
        for d in adj.get(frontier.pop(), []):
            if d not in reach:
                reach.add(d)
                frontier.append(d)
    cut = [o for o in net.outputs if o not in reach]
    if cut:
        raise StructureError(f"pruning disconnects outputs {cut} from all inputs")
    has_in = {d for _, d in edges}
    orphans = [n.id for n in neurons if n.id not in net.inputs and n.id not in has_in]
    if orphans:
        raise StructureError(f"pruning leaves neurons {orphans} without incoming edges")
    return Network(neurons, edges, net.inputs, net.outputs)


def restrict_weights(net: Network, pruned: Network, w) -> np.ndarray:
    """Carry weights of surviving edges and biases over to ``pruned``."""
    w = check_weights(net, w)
    index = {e: k for k, e in enumerate(net.edges)}
    out = np.empty(pruned.num_weights)
    for k, e in enumerate(pruned.edges):
        out[k] = w[index[e]]
    for i, k in pruned.bias_index.items():
        out[k] = w[net.bias_index[i]]
    return out


def mask_weights(net: Network, w, removed) -> np.ndarray:
    """Zero the outgoing weights of ``removed`` neurons (pruning oracle)."""
    w = np.array(check_weights(net, w))
    removed = set(removed)
    for k, (s, _) in enumerate(net.edges):
        if s in removed:
            w[k] = 0.0
    return w
