"""Reproduce the smoothness sweeps for both policy families.

Measures the worst Jacobian norm (L0) and worst Jacobian difference
quotient (L1) of the barrier policy over eta in [1e-4, 1e3] and of the
randomized-smoothing policy over eps in [1e-4, 20], on a segment of
states piercing the first-input saturation boundary, and writes one CSV
per family.

Usage:
    python3 scripts/smoothness_sweeps.py [--out results] [--points 25]
"""

import argparse
import os

import numpy as np

from barriermpc import (
    barrier_family,
    condense,
    double_integrator,
    piece_gains,
    randomized_family,
    smoothness_sweep,
    sweep_to_csv,
)


def boundary_segment(qp, n_points=9, half_width=0.5):
    k = piece_gains(qp, np.zeros(qp.m, dtype=bool)).K[0]
    center = k / (k @ k)
    direction = k / np.linalg.norm(k)
    return [center + t * direction for t in np.linspace(-half_width, half_width, n_points)]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--points", type=int, default=25, help="barrier grid size")
    parser.add_argument("--rs-points", type=int, default=13, help="randomized grid size")
    parser.add_argument("--samples", type=int, default=500, help="Monte Carlo samples")
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    qp = condense(double_integrator())
    segment = boundary_segment(qp)
    os.makedirs(args.out, exist_ok=True)

    etas = np.geomspace(1e-4, 1e3, args.points)
    barrier_est = smoothness_sweep(
        barrier_family(qp), etas, segment, n_random_directions=1
    )
    path = os.path.join(args.out, "sweep_barrier.csv")
    sweep_to_csv(barrier_est, path)
    print(f"barrier: L1 {barrier_est[0].L1_est:.4g} -> {barrier_est[-1].L1_est:.4g} "
          f"over {len(etas)} etas, wrote {path}")

    eps = np.geomspace(1e-4, 20.0, args.rs_points)
    rs_est = smoothness_sweep(
        randomized_family(qp, n_samples=args.samples, seed=args.seed),
        eps, segment, n_random_directions=0, h_param_frac=0.05,
    )
    path = os.path.join(args.out, "sweep_rs.csv")
    sweep_to_csv(rs_est, path)
    print(f"randomized: L1 {rs_est[0].L1_est:.4g} -> {rs_est[-1].L1_est:.4g} "
          f"over {len(eps)} epsilons, wrote {path}")


if __name__ == "__main__":
    main()
