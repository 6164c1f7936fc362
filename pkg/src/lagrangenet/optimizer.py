"""Saddle-point search in the learning adjoint space.

Gradient descent on weights and neural outputs, gradient ascent on the
multipliers, all blocks updated simultaneously from one gradient evaluation.
"""
from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .core import Network, UsageError, forward, init_weights
from .lagrangian import AdjointState, BlockGradients, LossKind, evaluate


class Method(str, enum.Enum):
    GDA = "gda"
    EXTRAGRADIENT = "extragradient"


class DivergenceError(ArithmeticError):
    def __init__(self, message: str, iteration: int, trace: "TrainTrace | None" = None):
        super().__init__(message)
        self.iteration = iteration
        self.trace = trace


@dataclass
class SaddleConfig:
    eta_w: float = 0.05
    eta_x: float = 0.1
    # keep eta_lam < rho: the linearised x/lam block is unstable otherwise
    eta_lam: float = 0.05
    max_iters: int = 50_000
    method: Method = Method.GDA
    rho: float = 0.1
    eps: float = 0.0
    residual_tol: float = 1e-3
    loss_tol: float = 1e-6
    window: int = 100
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        self.method = Method(self.method)
        self.validate()

    def validate(self):
        for name in ("eta_w", "eta_x", "eta_lam", "residual_tol", "loss_tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and np.isfinite(v) and v > 0):
                raise UsageError(f"{name} must be a positive real, got {v!r}")
        for name in ("rho", "eps"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and np.isfinite(v) and v >= 0):
                raise UsageError(f"{name} must be a nonnegative real, got {v!r}")
        for name in ("max_iters", "window"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise UsageError(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise UsageError(f"seed must be an integer, got {self.seed!r}")


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)
    stop_reason: str = ""

    @property
    def converged(self) -> bool:
        return self.stop_reason == "converged"

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records)


def _apply(state: AdjointState, g: BlockGradients, cfg: SaddleConfig, iteration: int) -> AdjointState:
    for name, block in (("d_w", g.d_w), ("d_x", g.d_x), ("d_lam", g.d_lam)):
        if not np.all(np.isfinite(block)):
            raise DivergenceError(f"non-finite {name} at iteration {iteration}", iteration)
    w = state.w - cfg.eta_w * g.d_w
    x = state.x - cfg.eta_x * g.d_x
    lam = state.lam + cfg.eta_lam * g.d_lam
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(x)) and np.all(np.isfinite(lam))):
        raise DivergenceError(f"state overflow at iteration {iteration}", iteration)
    return AdjointState(w, x, lam)


def saddle_step(grad_fn: Callable[[AdjointState], BlockGradients], state: AdjointState,
                cfg: SaddleConfig, grads: BlockGradients | None = None, iteration: int = 0) -> AdjointState:
    """One descent-ascent step for an arbitrary block-gradient oracle.

    ``grads`` may carry an already computed evaluation at ``state``.
    With extragradient, gradients at the predicted point drive the real step.
    """
    g = grads if grads is not None else grad_fn(state)
    if cfg.method is Method.EXTRAGRADIENT:
        g = grad_fn(_apply(state, g, cfg, iteration))
    return _apply(state, g, cfg, iteration)


def gda_step(net: Network, state: AdjointState, batch, loss, cfg: SaddleConfig,
             iteration: int = 0) -> AdjointState:
    def grad_fn(s):
        return evaluate(net, s, batch, loss, cfg.rho, cfg.eps).grads

    return saddle_step(grad_fn, state, cfg, iteration=iteration)


def init_state(net: Network, data, seed: int) -> AdjointState:
    """Random weights, feasible outputs, zero multipliers."""
    rng = np.random.default_rng(seed)
    w = init_weights(net, rng)
    x = forward(net, w, data.inputs)
    return AdjointState(w, x, np.zeros_like(x))


def _record(it, ev) -> dict:
    g = ev.grads
    return {
        "it": it,
        "L": ev.value,
        "loss": ev.loss,
        "res_inf": float(np.max(np.abs(ev.effective))),
        "res_2": float(np.linalg.norm(ev.effective)),
        "gw": float(np.linalg.norm(g.d_w)),
        "gx": float(np.linalg.norm(g.d_x)),
        "gl": float(np.linalg.norm(g.d_lam)),
    }


def train(net: Network, init: AdjointState, data, loss=LossKind.SQUARED_ERROR,
          cfg: SaddleConfig | None = None, callback=None) -> tuple[AdjointState, TrainTrace]:
    """Iterate saddle steps until converged or ``max_iters``.

    Converged means: effective residual inf-norm <= residual_tol and the loss
    improved by at most loss_tol over the last ``window`` iterations. Record
    ``it`` describes the state after ``it`` steps.
    """
    cfg = cfg or SaddleConfig()
    cfg.validate()
    if len(data.inputs) == 0:
        raise UsageError("empty dataset")

    def grad_fn(s):
        return evaluate(net, s, data, loss, cfg.rho, cfg.eps).grads

    trace = TrainTrace()
    state = init
    ev = evaluate(net, state, data, loss, cfg.rho, cfg.eps)
    losses = [ev.loss]
    for it in range(1, cfg.max_iters + 1):
        try:
            state = saddle_step(grad_fn, state, cfg, grads=ev.grads, iteration=it)
            ev = evaluate(net, state, data, loss, cfg.rho, cfg.eps)
        except DivergenceError as err:
            err.trace = trace
            trace.stop_reason = "diverged"
            raise
        rec = _record(it, ev)
        if not all(np.isfinite(v) for v in rec.values()):
            trace.stop_reason = "diverged"
            raise DivergenceError(f"non-finite trace values at iteration {it}", it, trace)
        trace.records.append(rec)
        if callback is not None:
            callback(rec)
        losses.append(ev.loss)
        if (it >= cfg.window and rec["res_inf"] <= cfg.residual_tol
                and losses[it - cfg.window] - losses[it] <= cfg.loss_tol):
            trace.stop_reason = "converged"
            return state, trace
    trace.stop_reason = "max_iters"
    return state, trace


# -- locality ---------------------------------------------------------------


def _neighborhoods(net: Network, E: int):
    """Allowed-dependency matrix between update components and variables.

    Variables are the flattened state (w, x, lam) followed by the batch
    inputs and targets. Components are the flattened gradient (w, x, lam).
    """
    nw, C, nin, nout = net.num_weights, net.num_constrained, net.num_inputs, len(net.outputs)
    n_state = nw + 2 * E * C
    n_vars = n_state + E * nin + E * nout

    def xv(e, c):
        return nw + e * C + c

    def lv(e, c):
        return nw + E * C + e * C + c

    def inv(e, s):
        return n_state + e * nin + s

    def tv(e, o):
        return n_state + E * nin + e * nout + o

    cons = {}
    for c, i in enumerate(net.constrained):
        wset = [k for _, k in net.parents[i]]
        if i in net.bias_index:
            wset.append(net.bias_index[i])
        for e in range(E):
            vs = set(wset) | {xv(e, c), lv(e, c)}
            for s, _ in net.parents[i]:
                vs.add(xv(e, net.col[s]) if s in net.col else inv(e, net.slot[s]))
            cons[c, e] = vs

    allowed = np.zeros((n_state, n_vars), dtype=bool)
    for k in range(nw):
        if k < len(net.edges):
            dst = net.edges[k][1]
        else:
            dst = next(i for i, b in net.bias_index.items() if b == k)
        for e in range(E):
            allowed[k, list(cons[net.col[dst], e])] = True
    out_pos = {net.col[o]: p for p, o in enumerate(net.outputs)}
    for e in range(E):
        for c, i in enumerate(net.constrained):
            allowed[lv(e, c), list(cons[c, e])] = True
            vs = set(cons[c, e])
            for d, _ in net.children[i]:
                vs |= cons[net.col[d], e]
            if c in out_pos:
                vs.add(tv(e, out_pos[c]))
            allowed[xv(e, c), list(vs)] = True
    return allowed


def locality_violations(net: Network, state: AdjointState, batch, loss=LossKind.SQUARED_ERROR,
                        rho: float = 0.0, eps: float = 0.0, scale: float = 0.37):
    """All (component, variable) pairs where an update depends on a non-neighbour.

    Every variable is perturbed in turn and each gradient component is
    compared bitwise against the unperturbed evaluation.
    """
    from .data import Dataset

    E = state.num_examples
    inputs = np.array(batch.inputs, dtype=float)
    targets = np.array(batch.targets, dtype=float)
    allowed = _neighborhoods(net, E)
    n_state = allowed.shape[0]

    def grads(flat_vars):
        st = state.unflatten(flat_vars[:n_state])
        b = Dataset(flat_vars[n_state:n_state + inputs.size].reshape(inputs.shape),
                    flat_vars[n_state + inputs.size:].reshape(targets.shape))
        return evaluate(net, st, b, loss, rho, eps).grads.flatten()

    base_vars = np.concatenate([state.flatten(), inputs.ravel(), targets.ravel()])
    base = grads(base_vars).view(np.int64)
    violations = []
    for v in range(base_vars.size):
        pert = base_vars.copy()
        pert[v] += scale * (1.0 + abs(pert[v]))
        changed = np.flatnonzero(grads(pert).view(np.int64) != base)
        for u in changed:
            if not allowed[u, v]:
                violations.append((int(u), int(v)))
    return violations


def locality_audit(net: Network, state: AdjointState, batch, loss=LossKind.SQUARED_ERROR,
                   rho: float = 0.0, eps: float = 0.0) -> bool:
    return not locality_violations(net, state, batch, loss, rho, eps)


def config_dict(cfg: SaddleConfig) -> dict:
    d = asdict(cfg)
    d["method"] = cfg.method.value
    return d
