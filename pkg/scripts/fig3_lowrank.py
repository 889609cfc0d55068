"""Test accuracy against compression ratio for nuclear-norm FeTa and truncated SVD."""

import argparse

from _common import int_list, write_rows
from fetaprune import experiments as ex
from fetaprune.baselines import compression_ratio
from fetaprune.network import accuracy


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int_list, default=[0, 1, 2])
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--ranks", type=int_list, default=[32, 16, 8, 4])
    p.add_argument("--csv", default="fig3_lowrank.csv")
    args = p.parse_args()
    rows = []
    for seed in args.seeds:
        train, test = ex.reference_data(seed)
        net = ex.train_reference(train, seed)
        d1, d2 = net.layers[args.layer].weights.shape
        base = accuracy(net, test)
        for rank in args.ranks:
            pruned, lam, res = ex.feta_layer(
                net, train, args.layer, ex.default_prune_config("nuclear", seed=seed),
                target=1 - rank / min(d1, d2))
            svd_net, _ = ex.svd_layer(net, args.layer, res.rank)
            rows.append(dict(seed=seed, rank=res.rank, cr=compression_ratio(d1, d2, res.rank),
                             lam=lam, acc_base=base, acc_feta=accuracy(pruned, test),
                             acc_svd=accuracy(svd_net, test)))
            print(f"seed {seed} rank {res.rank}: feta {rows[-1]['acc_feta']:.3f} "
                  f"svd {rows[-1]['acc_svd']:.3f}")
    write_rows(rows, args.csv)


if __name__ == "__main__":
    main()
