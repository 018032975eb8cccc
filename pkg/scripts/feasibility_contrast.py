"""Contrast constraint handling of the barrier and randomized policies.

Rolls both controllers from random feasible starts and reports constraint
violations (barrier: provably zero, every iterate is strictly interior)
and the fraction of perturbed states the randomized policy had to project
back into the feasible domain.

Usage:
    python3 scripts/feasibility_contrast.py [--rollouts 100] [--eta 0.1] [--eps 1.0]
"""

import argparse

from barriermpc import (
    BarrierConfig,
    BarrierPolicy,
    RandomizedSmoothingPolicy,
    SmoothingSpec,
    closed_loop,
    condense,
    double_integrator,
    sample_initial_states,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rollouts", type=int, default=100)
    parser.add_argument("--steps", type=int, default=20)
    parser.add_argument("--eta", type=float, default=0.1)
    parser.add_argument("--eps", type=float, default=1.0)
    parser.add_argument("--samples", type=int, default=200)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    spec = double_integrator()
    qp = condense(spec)

    starts = sample_initial_states(qp, spec.X, args.rollouts, seed=args.seed, frac=0.8)
    pol = BarrierPolicy(qp, BarrierConfig(eta=args.eta))
    violations = sum(
        closed_loop(spec.sys, pol, x0, args.steps,
                    state_set=spec.X, input_set=spec.U).n_violations
        for x0 in starts
    )
    print(f"barrier eta={args.eta}: {violations} violations "
          f"over {args.rollouts} rollouts x {args.steps} steps")

    near_edge = sample_initial_states(qp, spec.X, max(args.rollouts // 10, 1),
                                      seed=args.seed + 1, frac=0.95)
    rs = RandomizedSmoothingPolicy(
        qp, SmoothingSpec("gaussian", args.eps, args.samples, 0),
        record_jacobians=False,
    )
    rs_violations = sum(
        closed_loop(spec.sys, rs, x0, args.steps,
                    state_set=spec.X, input_set=spec.U).n_violations
        for x0 in near_edge
    )
    print(f"randomized eps={args.eps}: projected {rs.projected_fraction:.2%} of "
          f"perturbed states, {rs_violations} closed-loop violations "
          f"over {len(near_edge)} near-boundary rollouts")


if __name__ == "__main__":
    main()
