"""Count distinct explicit-MPC pieces of the benchmark as resolution grows.

Enumerates optimal active sets of the double integrator over square state
grids of increasing resolution and prints the count per resolution (a
grid census lower-bounds the true piece count).

Usage:
    python3 scripts/piece_census.py [--resolutions 100 250 500] [--out results]
"""

import argparse
import os
import time

import numpy as np

from barriermpc import condense, double_integrator, enumerate_pieces


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--resolutions", type=int, nargs="+", default=[100, 250, 500])
    parser.add_argument("--out", default=None, help="optional CSV output directory")
    args = parser.parse_args()

    spec = double_integrator()
    qp = condense(spec)
    lo, hi = spec.X.box_bounds()

    rows = ["resolution,n_pieces,n_infeasible,n_states,seconds"]
    for n in args.resolutions:
        axes = [np.linspace(lo[i], hi[i], n) for i in range(2)]
        grid = np.array([[a, b] for a in axes[0] for b in axes[1]])
        t0 = time.time()
        census = enumerate_pieces(qp, grid)
        dt = time.time() - t0
        print(f"{n}x{n}: {len(census.counts)} pieces, "
              f"{census.infeasible}/{census.total} infeasible, {dt:.1f}s")
        rows.append(f"{n},{len(census.counts)},{census.infeasible},{census.total},{dt:.3f}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "piece_census.csv")
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
