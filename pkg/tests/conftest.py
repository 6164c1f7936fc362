from pathlib import Path

import numpy as np
import pytest

from lagrangenet.core import ActivationKind, Network, Neuron

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"

_ACCEPTANCE: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def criterion():
    """Record one acceptance line; the summary prints them all at the end."""
    def record(number, name, passed, detail=""):
        _ACCEPTANCE.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name}  {detail}".rstrip())
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


def two_branch_net() -> Network:
    """Inputs 0, 1 feed disjoint chains 0->2->4 and 1->3->5."""
    tanh, ident = ActivationKind.TANH, ActivationKind.IDENTITY
    neurons = (Neuron(0, ident, False), Neuron(1, ident, False), Neuron(2, tanh), Neuron(3, tanh),
               Neuron(4, ident), Neuron(5, ident))
    return Network(neurons, ((0, 2), (1, 3), (2, 4), (3, 5)), (0, 1), (4, 5))


def skip_net() -> Network:
    """A DAG with a skip connection from the input straight to the output."""
    neurons = (Neuron(0, ActivationKind.IDENTITY, False), Neuron(1, ActivationKind.IDENTITY, False),
               Neuron(2, ActivationKind.TANH), Neuron(3, ActivationKind.LOGISTIC),
               Neuron(4, ActivationKind.IDENTITY))
    edges = ((0, 2), (1, 2), (2, 3), (0, 3), (3, 4), (2, 4), (1, 4))
    return Network(neurons, edges, (0, 1), (4,))
