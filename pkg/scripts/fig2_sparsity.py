"""Test accuracy against sparsity for FeTa and hard thresholding on one layer."""

import argparse
import time

from _common import float_list, int_list, write_rows
from fetaprune import experiments as ex
from fetaprune.network import accuracy


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int_list, default=[0, 1, 2])
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--targets", type=float_list, default=[0.5, 0.7, 0.8, 0.9, 0.95])
    p.add_argument("--csv", default="fig2_sparsity.csv")
    args = p.parse_args()
    rows = []
    for seed in args.seeds:
        train, test = ex.reference_data(seed)
        net = ex.train_reference(train, seed)
        base = accuracy(net, test)
        for target in args.targets:
            t0 = time.perf_counter()
            pruned, lam, res = ex.feta_layer(net, train, args.layer,
                                             ex.default_prune_config(seed=seed), target=target)
            rows.append(dict(seed=seed, method="feta-l1", target=target, lam=lam,
                             sparsity=res.achieved_sparsity, acc_base=base,
                             acc=accuracy(pruned, test), seconds=time.perf_counter() - t0))
            t0 = time.perf_counter()
            thr, rep = ex.threshold_layer(net, args.layer, target)
            rows.append(dict(seed=seed, method="threshold", target=target, lam="NA",
                             sparsity=rep.sparsity, acc_base=base, acc=accuracy(thr, test),
                             seconds=time.perf_counter() - t0))
            print(f"seed {seed} target {target}: feta {rows[-2]['acc']:.3f} "
                  f"threshold {rows[-1]['acc']:.3f}")
    write_rows(rows, args.csv)


if __name__ == "__main__":
    main()
