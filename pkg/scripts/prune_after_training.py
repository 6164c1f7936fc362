"""Train, extract support neurons, prune, and compare accuracy before/after.

    python scripts/prune_after_training.py --config configs/moons.json --eps 0.2 --tau 0.01
"""
import argparse

from lagrangenet.cli import accuracy
from lagrangenet.config import load_config
from lagrangenet.core import StructureError
from lagrangenet.optimizer import SaddleConfig, init_state, train
from lagrangenet.support import prune, restrict_weights, support_report


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--config", default="configs/moons.json")
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--tau", type=float, default=0.01)
    args = p.parse_args()

    cfg = load_config(args.config)
    net, data = cfg.build_network(), cfg.build_dataset()
    sc = SaddleConfig(**{**vars(cfg.saddle), "eps": args.eps})
    state, trace = train(net, init_state(net, data, sc.seed), data, cfg.loss, sc)
    rep = support_report(state, args.tau, net.constrained)
    print(f"trained: {trace.stop_reason} after {len(trace.records)} iterations, "
          f"accuracy {accuracy(net, state.w, data, cfg.loss):.3f}")
    print("hidden neuron scores:",
          {i: round(float(s), 4) for i, s in zip(rep.neuron_ids, rep.neuron_scores) if i in net.hidden})
    try:
        small = prune(net, rep)
    except StructureError as err:
        print("refused to prune:", err)
        return
    w_small = restrict_weights(net, small, state.w)
    print(f"pruned hidden {len(net.hidden)} -> {len(small.hidden)}, "
          f"accuracy {accuracy(small, w_small, data, cfg.loss):.3f}")


if __name__ == "__main__":
    main()
