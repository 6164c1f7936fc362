"""Seeded verification suites: BP emergence and finite-difference gradient checks."""
from __future__ import annotations

import numpy as np

from .backprop import solve_adjoint, verify_bp_equivalence
from .core import ActivationKind, Network, build_mlp, forward
from .data import Dataset
from .lagrangian import AdjointState, LossKind, block_gradients, finite_diff_gradient, lagrangian_value
from .lagrangian import _preactivations, _slot_values

SMOOTH = (ActivationKind.TANH, ActivationKind.LOGISTIC, ActivationKind.IDENTITY)


def random_problem(rng: np.random.Generator, max_weights: int | None = None, acts=SMOOTH):
    """Random MLP (2-4 layers, <= 8 units), weights, batch and loss kind."""
    while True:
        depth = int(rng.integers(2, 5))
        sizes = [int(s) for s in rng.integers(1, 9, size=depth)]
        net = build_mlp(sizes, acts[rng.integers(len(acts))], acts[rng.integers(len(acts))])
        if max_weights is None or net.num_weights <= max_weights:
            break
    loss = LossKind.SQUARED_ERROR if rng.random() < 0.5 else LossKind.CROSS_ENTROPY_WITH_LOGISTIC
    E = int(rng.integers(1, 6))
    inputs = rng.normal(size=(E, sizes[0]))
    if loss is LossKind.SQUARED_ERROR:
        targets = rng.normal(size=(E, sizes[-1]))
    else:
        targets = rng.integers(0, 2, size=(E, sizes[-1])).astype(float)
    w = rng.normal(0.0, 0.8, size=net.num_weights)
    return net, w, Dataset(inputs, targets, "random"), loss


def run_verify_bp(n_nets: int = 100, seed: int = 0, rtol: float = 1e-10) -> dict:
    """BP-emergence and adjoint-stationarity check over ``n_nets`` random problems."""
    rng = np.random.default_rng(seed)
    worst_rel, worst_abs, worst_dx, dlam_exact = 0.0, 0.0, 0.0, True
    for _ in range(n_nets):
        net, w, batch, loss = random_problem(rng)
        rep = verify_bp_equivalence(net, w, batch, loss)
        worst_rel = max(worst_rel, rep["max_rel"])
        worst_abs = max(worst_abs, rep["max_abs"])
        sol = solve_adjoint(net, w, batch, loss)
        g = block_gradients(net, sol.state(w), batch, loss)
        worst_dx = max(worst_dx, float(np.abs(g.d_x).max()))
        dlam_exact &= bool(np.all(g.d_lam == 0.0))
    return {
        "n_nets": n_nets, "max_abs": worst_abs, "max_rel": worst_rel,
        "max_abs_dx": worst_dx, "d_lam_zero": dlam_exact,
        "pass": worst_rel <= rtol,
    }


def _near_kink(net: Network, state: AdjointState, batch, eps: float, margin: float) -> bool:
    A, S, _ = _preactivations(net, state.w, _slot_values(net, batch.inputs, state.x))
    relu = [c for c, a in enumerate(net.acts) if a is ActivationKind.RELU]
    if relu and np.any(np.abs(A[:, relu]) < margin):
        return True
    if eps > 0 and np.any(np.abs(np.abs(state.x - S) - eps) < margin):
        return True
    return False


def random_state(rng: np.random.Generator, max_weights: int = 50, relu: bool = True,
                 margin: float = 1e-4):
    """A random (net, state, batch, loss, rho, eps) away from non-smooth points."""
    acts = SMOOTH + (ActivationKind.RELU,) if relu else SMOOTH
    net, w, batch, loss = random_problem(rng, max_weights, acts)
    rho = float(rng.choice([0.0, 0.5]))
    eps = float(rng.choice([0.0, 0.0, 0.05]))
    E = batch.inputs.shape[0]
    while True:
        x = forward(net, w, batch.inputs) + rng.normal(0.0, 0.3, size=(E, net.num_constrained))
        state = AdjointState(w, x, rng.normal(size=x.shape))
        if not _near_kink(net, state, batch, eps, margin):
            return net, state, batch, loss, rho, eps
        w = rng.normal(0.0, 0.8, size=net.num_weights)


def gradient_errors(net, state, batch, loss, rho=0.0, eps=0.0, h=1e-5) -> np.ndarray:
    """Componentwise ``|analytic - fd| / max(1, |fd|)`` over the flattened state."""
    g = block_gradients(net, state, batch, loss, rho, eps).flatten()
    fd = finite_diff_gradient(
        lambda v: lagrangian_value(net, state.unflatten(v), batch, loss, rho, eps), state.flatten(), h)
    return np.abs(g - fd) / np.maximum(1.0, np.abs(fd))


def block_of(state: AdjointState, k: int) -> tuple[str, tuple]:
    nw, nx = state.w.size, state.x.size
    if k < nw:
        return "w", (k,)
    if k < nw + nx:
        return "x", tuple(int(v) for v in np.unravel_index(k - nw, state.x.shape))
    return "lam", tuple(int(v) for v in np.unravel_index(k - nw - nx, state.x.shape))


def run_grad_check(n_states: int = 50, seed: int = 0, h: float = 1e-5, rtol: float = 1e-6) -> dict:
    rng = np.random.default_rng(seed)
    worst = {"error": -1.0}
    for s in range(n_states):
        net, state, batch, loss, rho, eps = random_state(rng)
        err = gradient_errors(net, state, batch, loss, rho, eps, h)
        k = int(np.argmax(err))
        if err[k] > worst["error"]:
            block, index = block_of(state, k)
            worst = {"error": float(err[k]), "state": s, "block": block, "index": list(index),
                     "loss": loss.value, "rho": rho, "eps": eps}
    return {"n_states": n_states, "h": h, "rtol": rtol, "max_rel": worst["error"],
            "worst": worst, "pass": worst["error"] <= rtol}
