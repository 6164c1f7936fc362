"""Command-line front end.

Exit codes: 0 ok, 1 usage/config error, 2 stopped at the iteration limit,
3 divergence, 4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .checks import run_grad_check, run_verify_bp
from .config import ConfigError, RunConfig, load_config, parse_config
from .core import Network, UsageError, predict
from .data import GENERATORS, ParseError, save_csv
from .lagrangian import AdjointState, LossKind
from .optimizer import DivergenceError, init_state, train
from .support import support_report

log = logging.getLogger("lagrangenet")

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3, 4


def accuracy(net: Network, w, data, loss) -> float:
    """Training accuracy of the real forward pass.

    Logits are thresholded at 0 for cross-entropy; for squared error the
    threshold is the midpoint of the two target values. Multi-output nets
    use argmax.
    """
    scores = predict(net, w, data.inputs)
    t = data.targets
    if t.shape[1] > 1:
        return float(np.mean(np.argmax(scores, axis=1) == np.argmax(t, axis=1)))
    if LossKind(loss) is LossKind.CROSS_ENTROPY_WITH_LOGISTIC:
        return float(np.mean((scores[:, 0] > 0) == (t[:, 0] > 0.5)))
    mid = 0.5 * (t.min() + t.max())
    return float(np.mean((scores[:, 0] > mid) == (t[:, 0] > mid)))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else parse_config({})
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "seed", None) is not None:
        cfg.saddle.seed = args.seed
    return cfg


def cmd_train(args) -> int:
    cfg = _load(args)
    net = cfg.build_network()
    data = cfg.build_dataset()
    loss = LossKind(cfg.loss)
    run_dir = cfg.run_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    _write_json(run_dir / "config.json", cfg.to_dict())
    (run_dir / "network.json").write_text(net.to_json() + "\n", encoding="utf-8")

    state = init_state(net, data, cfg.saddle.seed)
    code = EXIT_OK
    try:
        state, trace = train(net, state, data, loss, cfg.saddle)
        if not trace.converged:
            code = EXIT_NONCONVERGED
    except DivergenceError as err:
        log.error("%s", err)
        trace, code = err.trace, EXIT_DIVERGED

    (run_dir / "trace.jsonl").write_text(trace.to_jsonl(), encoding="utf-8")
    last = trace.records[-1] if trace.records else {}
    summary = {"status": trace.stop_reason, "iterations": len(trace.records)}
    if code != EXIT_DIVERGED:
        (run_dir / "checkpoint.json").write_text(state.to_json() + "\n", encoding="utf-8")
        summary.update(final_loss=last.get("loss"), accuracy=accuracy(net, state.w, data, loss),
                       res_inf=last.get("res_inf"), res_2=last.get("res_2"))
    _write_json(run_dir / "summary.json", summary)
    print(run_dir)
    return code


def cmd_verify_bp(args) -> int:
    cfg = _load(args)
    v = cfg.verify
    rep = run_verify_bp(v.n_nets, v.seed, v.rtol)
    out = {"max_abs": rep["max_abs"], "max_rel": rep["max_rel"], "pass": rep["pass"],
           "n_nets": rep["n_nets"], "max_abs_dx": rep["max_abs_dx"], "d_lam_zero": rep["d_lam_zero"]}
    print(json.dumps(out))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        _write_json(Path(args.out) / "verify_bp.json", out)
    return EXIT_OK if rep["pass"] else EXIT_VERIFY


def cmd_grad_check(args) -> int:
    cfg = _load(args)
    g = cfg.grad_check
    rep = run_grad_check(g.n_states, g.seed, g.h, g.rtol)
    print(json.dumps(rep))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        _write_json(Path(args.out) / "grad_check.json", rep)
    return EXIT_OK if rep["pass"] else EXIT_VERIFY


def cmd_support(args) -> int:
    path = Path(args.checkpoint)
    if not path.is_file():
        raise UsageError(f"checkpoint {path} not found")
    state = AdjointState.from_json(path.read_text(encoding="utf-8"))
    ids = None
    net_path = path.with_name("network.json")
    if net_path.is_file():
        net = Network.from_json(net_path.read_text(encoding="utf-8"))
        if net.num_constrained == state.x.shape[1]:
            ids = net.constrained
    rep = support_report(state, args.tau, ids).to_dict()
    print(json.dumps(rep))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        _write_json(Path(args.out) / "support.json", rep)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    if args.generator not in GENERATORS:
        raise UsageError(f"unknown generator {args.generator!r}; choose from {sorted(GENERATORS)}")
    if args.generator == "xor":
        ds = GENERATORS["xor"](signed=args.signed)
    else:
        ds = GENERATORS["two_moons"](args.n, args.noise, args.seed if args.seed is not None else 0,
                                     signed=args.signed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(ds, out)
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lagrangenet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help="output directory"):
        sp.add_argument("--config", type=str, default=None, help="run config (JSON)")
        sp.add_argument("--out", type=str, default=None, help=out_help)
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")

    common(sub.add_parser("train", help="saddle-point training run"))
    common(sub.add_parser("verify-bp", help="check that BP emerges at the adjoint solution"))
    common(sub.add_parser("grad-check", help="finite-difference check of the block gradients"))
    sp = sub.add_parser("support", help="support neurons/examples of a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--tau", type=float, default=1e-3)
    sp.add_argument("--out", type=str, default=None)
    sp = sub.add_parser("gen-data", help="write a synthetic dataset as CSV")
    sp.add_argument("generator")
    sp.add_argument("--out", required=True, help="CSV path")
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--noise", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--signed", action="store_true", help="targets in {-1, +1}")
    return p


COMMANDS = {
    "train": cmd_train, "verify-bp": cmd_verify_bp, "grad-check": cmd_grad_check,
    "support": cmd_support, "gen-data": cmd_gen_data,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError, ParseError, FileNotFoundError, KeyError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
