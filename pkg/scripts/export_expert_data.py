"""Export imitation-learning datasets for both expert controllers.

Wraps the command line's export-dataset subcommand so the artifacts are
bit-identical to what any consumer of the CLI would produce: one CSV of
(state, input, Jacobian) rows per expert, from the same initial states.

Usage:
    python3 scripts/export_expert_data.py [--out results/experts] [--n 50]
"""

import argparse
import os
import subprocess
import sys


def run(args_list):
    proc = subprocess.run(
        [sys.executable, "-m", "barriermpc.cli", *args_list],
        capture_output=True, text=True,
    )
    if proc.returncode != 0:
        raise SystemExit(f"cli failed ({proc.returncode}): {proc.stderr.strip()}")
    return proc.stdout


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results/experts")
    parser.add_argument("--n", type=int, default=50, help="trajectories per expert")
    parser.add_argument("--steps", type=int, default=20)
    parser.add_argument("--eta", type=float, default=0.1)
    parser.add_argument("--eps", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    common = ["--n-traj", str(args.n), "--steps", str(args.steps),
              "--seed", str(args.seed), "--jobs", str(args.jobs)]
    for name, policy_args in (
        ("barrier", ["--policy", "barrier", "--eta", str(args.eta)]),
        ("rs", ["--policy", "rs", "--eps", str(args.eps)]),
    ):
        out_dir = os.path.join(args.out, name)
        stdout = run(["export-dataset", *policy_args, *common,
                      "--output-dir", out_dir])
        print(f"{name}: {stdout.strip()}")


if __name__ == "__main__":
    main()
