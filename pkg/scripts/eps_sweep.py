"""Fraction of exactly-zero multipliers as the dead zone widens.

    python scripts/eps_sweep.py --config configs/moons.json --eps 0 0.05 0.1 0.2 0.3
"""
import argparse
import json

from lagrangenet.cli import accuracy
from lagrangenet.config import load_config
from lagrangenet.optimizer import SaddleConfig, init_state, train
from lagrangenet.support import support_report, zero_fraction


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--config", default="configs/xor.json")
    p.add_argument("--eps", type=float, nargs="+", default=[0.0, 0.01, 0.05, 0.1])
    p.add_argument("--max-iters", type=int, default=None)
    args = p.parse_args()

    cfg = load_config(args.config)
    net, data = cfg.build_network(), cfg.build_dataset()
    for eps in args.eps:
        sc = SaddleConfig(**{**vars(cfg.saddle), "eps": eps})
        if args.max_iters:
            sc.max_iters = args.max_iters
        state, trace = train(net, init_state(net, data, sc.seed), data, cfg.loss, sc)
        rep = support_report(state, cfg.tau, net.constrained)
        print(json.dumps({
            "eps": eps, "zero_fraction": zero_fraction(state), "status": trace.stop_reason,
            "iterations": len(trace.records), "accuracy": accuracy(net, state.w, data, cfg.loss),
            "support_neurons": sorted(rep.support_neurons), "n_support_examples": len(rep.support_examples),
        }))


if __name__ == "__main__":
    main()
