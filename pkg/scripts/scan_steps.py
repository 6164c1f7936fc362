"""Grid over per-block step sizes and damping; how the shipped fixtures were chosen.

    python scripts/scan_steps.py --config configs/xor.json --seeds 0 1 2
"""
import argparse
import itertools
import warnings

from lagrangenet.cli import accuracy
from lagrangenet.config import load_config
from lagrangenet.optimizer import DivergenceError, SaddleConfig, init_state, train


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--config", default="configs/xor.json")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--eta-w", type=float, nargs="+", default=[0.005, 0.05])
    p.add_argument("--eta-x", type=float, nargs="+", default=[0.1, 0.5])
    p.add_argument("--eta-lam", type=float, nargs="+", default=[0.05, 0.2])
    p.add_argument("--rho", type=float, nargs="+", default=[0.1, 0.5, 2.0])
    p.add_argument("--max-iters", type=int, default=20_000)
    args = p.parse_args()
    warnings.simplefilter("ignore", RuntimeWarning)

    cfg = load_config(args.config)
    net, data = cfg.build_network(), cfg.build_dataset()
    for ew, ex, el, rho in itertools.product(args.eta_w, args.eta_x, args.eta_lam, args.rho):
        for seed in args.seeds:
            sc = SaddleConfig(**{**vars(cfg.saddle), "eta_w": ew, "eta_x": ex, "eta_lam": el,
                                 "rho": rho, "seed": seed, "max_iters": args.max_iters})
            try:
                state, trace = train(net, init_state(net, data, seed), data, cfg.loss, sc)
            except DivergenceError as err:
                print(f"{ew} {ex} {el} {rho} seed={seed} diverged at {err.iteration}")
                continue
            print(f"{ew} {ex} {el} {rho} seed={seed} {trace.stop_reason} it={len(trace.records)} "
                  f"acc={accuracy(net, state.w, data, cfg.loss):.3f} res_inf={trace.records[-1]['res_inf']:.1e}")


if __name__ == "__main__":
    main()
