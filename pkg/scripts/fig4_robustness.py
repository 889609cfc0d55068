"""Layer robustness and the predicted generalization error of pruned networks.

For each hidden layer, thresholding sweeps give the measured train/test gap;
an L1 FeTa sweep gives the predicted GE from the measured margins and layer
errors, next to the measured one.
"""

import argparse
import math

from _common import float_list, write_rows
from fetaprune import experiments as ex
from fetaprune.bounds import ManifoldParams, analyze_pruning
from fetaprune.network import accuracy


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=float, default=20.0)
    p.add_argument("--lambdas", type=float_list, default=[0.001, 0.003, 0.01, 0.03])
    p.add_argument("--targets", type=float_list, default=[0.5, 0.8, 0.9, 0.95])
    p.add_argument("--csv", default="fig4_robustness.csv")
    args = p.parse_args()
    train, test = ex.reference_data(args.seed)
    net = ex.train_reference(train, args.seed)
    mp = ManifoldParams(1.0, args.k, train.n_classes, len(train))
    rows = []

    def add(method, layer, knob, sparsity, pruned, predicted):
        ge = accuracy(pruned, train) - accuracy(pruned, test)
        rows.append(dict(method=method, layer=layer, knob=knob, sparsity=sparsity,
                         measured_ge=ge, predicted_ge=predicted))

    for layer in range(net.depth - 1):
        for target in args.targets:
            pruned, rep = ex.threshold_layer(net, layer, target)
            add("threshold", layer, target, rep.sparsity, pruned, "NA")
        for lam in args.lambdas:
            pruned, _, res = ex.feta_layer(net, train, layer,
                                           ex.default_prune_config("l1", lam, args.seed))
            an = analyze_pruning(net, pruned, train, mp, test=test)
            pred = an.predicted_ge if math.isfinite(an.predicted_ge) else "VACUOUS"
            add("feta-l1", layer, lam, res.achieved_sparsity, pruned, pred)
            print(f"layer {layer} lambda {lam}: sparsity {res.achieved_sparsity:.2f} "
                  f"predicted {pred}")
    write_rows(rows, args.csv)


if __name__ == "__main__":
    main()
