"""Command line for the imitation harness: train, evaluate, compare."""

import argparse
import json
import sys
from pathlib import Path

from .compare import ComparisonConfig, compare_experts
from .config import TrainConfig
from .evaluate import evaluate, write_report_csv, write_report_json
from .expert import ExpertSpec, measure_smoothness
from .train import train


def _add_expert_flags(parser):
    parser.add_argument(
        "--expert-kind", choices=("barrier", "rs", "explicit"), default=None
    )
    parser.add_argument(
        "--parameter",
        type=float,
        default=0.0,
        help="barrier weight or noise scale of the expert",
    )
    parser.add_argument("--samples", type=int, default=300)
    parser.add_argument(
        "--dist", choices=("uniform-ball", "uniform-box", "gaussian"), default="gaussian"
    )


def _expert_from_args(args):
    if args.expert_kind is None:
        return None
    return ExpertSpec(args.expert_kind, args.parameter, args.samples, args.dist)


def cmd_train(args):
    cfg = TrainConfig(
        dataset_path=args.dataset,
        hidden_layers=args.layers,
        hidden_width=args.width,
        activation=args.activation,
        jacobian_loss_weight=args.jacobian_weight,
        epochs=args.epochs,
        lr=args.lr,
        seed=args.seed,
    )
    model_path = train(cfg, args.out)
    print(f"model={model_path}")
    return 0


def cmd_evaluate(args):
    expert = _expert_from_args(args)
    smoothness = None
    if args.measure_smoothness:
        if expert is None or expert.kind == "explicit":
            print("smoothness sweeps need --expert-kind barrier or rs", file=sys.stderr)
            return 1
        smoothness = measure_smoothness(
            expert, problem_file=args.problem, jobs=args.jobs
        )
    report = evaluate(
        args.model,
        args.problem,
        args.n_eval,
        args.steps,
        args.seed,
        expert=expert,
        smoothness=smoothness,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report_json(report, out / "report.json")
    write_report_csv(report, out / "report.csv")
    sr = report.seeds[0]
    print(
        f"seed={sr.seed} median_max_error={sr.median_max_error:.6g} "
        f"value_mse={sr.value_mse:.6g} jacobian_mse={sr.jacobian_mse:.6g}"
    )
    return 0


def cmd_compare(args):
    cfg = ComparisonConfig(
        problem_file=args.problem,
        out_dir=args.out,
        experts=(
            ExpertSpec("barrier", args.barrier_eta),
            ExpertSpec("rs", args.rs_eps, samples=args.samples, dist=args.dist),
        ),
        n_traj=args.n_traj,
        steps=args.steps,
        data_seed=args.data_seed,
        train_seeds=tuple(args.train_seeds),
        epochs=args.epochs,
        lr=args.lr,
        n_eval=args.n_eval,
        eval_seed=args.eval_seed,
        jobs=args.jobs,
        measure=not args.no_measure,
    )
    reports = compare_experts(cfg)
    summary = {}
    for report in reports:
        label = report.expert["label"]
        summary[label] = {
            "median_max_error": report.median_over_seeds,
            "L1": report.smoothness.get("L1"),
        }
        print(
            f"{label}: median_max_error={report.median_over_seeds:.6g} "
            f"L1={report.smoothness.get('L1')}"
        )
    (Path(args.out) / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="imitation-harness",
        description="Clone smoothed MPC experts and score them in closed loop.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit one policy to a dataset")
    p_train.add_argument("--dataset", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--layers", type=int, default=4)
    p_train.add_argument("--width", type=int, default=64)
    p_train.add_argument("--activation", default="gelu")
    p_train.add_argument("--jacobian-weight", type=float, default=0.1)
    p_train.add_argument("--epochs", type=int, default=600)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="closed-loop error vs the expert")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--problem", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--n-eval", type=int, default=20)
    p_eval.add_argument("--steps", type=int, default=20)
    p_eval.add_argument("--seed", type=int, default=97)
    p_eval.add_argument("--jobs", type=int, default=1)
    p_eval.add_argument("--measure-smoothness", action="store_true")
    _add_expert_flags(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_cmp = sub.add_parser(
        "compare", help="clone a barrier and an rs expert under identical budgets"
    )
    p_cmp.add_argument("--problem", required=True)
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--barrier-eta", type=float, default=0.1)
    p_cmp.add_argument("--rs-eps", type=float, default=0.15)
    p_cmp.add_argument("--samples", type=int, default=300)
    p_cmp.add_argument(
        "--dist", choices=("uniform-ball", "uniform-box", "gaussian"), default="gaussian"
    )
    p_cmp.add_argument("--n-traj", type=int, default=50)
    p_cmp.add_argument("--steps", type=int, default=20)
    p_cmp.add_argument("--data-seed", type=int, default=11)
    p_cmp.add_argument(
        "--train-seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4]
    )
    p_cmp.add_argument("--epochs", type=int, default=4500)
    p_cmp.add_argument("--lr", type=float, default=3e-3)
    p_cmp.add_argument("--n-eval", type=int, default=20)
    p_cmp.add_argument("--eval-seed", type=int, default=97)
    p_cmp.add_argument("--jobs", type=int, default=1)
    p_cmp.add_argument("--no-measure", action="store_true")
    p_cmp.set_defaults(func=cmd_compare)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
