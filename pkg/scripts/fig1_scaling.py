"""Wall time of FeTa on toy Gaussian layers as the input dimension grows.

A log-log slope near 1 means the cost is linear in d1.
"""

import argparse

from _common import int_list, write_rows
from fetaprune.experiments import bench_scaling


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--d1-list", type=int_list, default=[250, 500, 1000, 2000, 3000])
    p.add_argument("--d2", type=int, default=10)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default="fig1_scaling.csv")
    args = p.parse_args()
    rows = bench_scaling(args.d1_list, args.d2, args.n, args.seed, args.reps)
    write_rows([vars(r) for r in rows], args.csv)
    print(f"slope {rows[0].slope:.3f}")


if __name__ == "__main__":
    main()
