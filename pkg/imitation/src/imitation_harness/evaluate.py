"""Closed-loop evaluation of a cloned policy against its expert.

The expert and the imitator start from the same held-out initial states.
The expert trajectory comes from the controller CLI; the imitator's comes
from simulating x+ = A x + B policy(x) with the problem file's dynamics,
which is exactly the update the controller applies.  The headline metric
per start is max_t ||x_imitator(t) - x_expert(t)|| over the whole run,
including the terminal state.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data import parse_expert_label
from .expert import ExpertCliError, ExpertSpec, expert_rollout, load_problem
from .model import load_policy, weights_hash


@dataclass
class ExpertRun:
    """One cached expert trajectory: states, inputs, Jacobians, terminal state."""

    x0: np.ndarray
    states: np.ndarray  # (steps, d_x)
    inputs: np.ndarray  # (steps, d_u)
    jacobians: np.ndarray  # (steps, d_u, d_x)
    terminal: np.ndarray  # (d_x,)


@dataclass
class SeedResult:
    """Evaluation of one trained model (one training seed)."""

    seed: int
    model_hash: str
    max_errors: list  # per start: max_t ||x_hat - x_expert||
    median_max_error: float
    mean_max_error: float
    value_mse: float
    jacobian_mse: float


@dataclass
class ImitationReport:
    """Everything a comparison needs: provenance, per-seed errors, medians."""

    expert: dict
    recipe: dict
    dataset_hash: str
    config_hash: str
    n_eval: int
    steps: int
    eval_seed: int
    seeds: list = field(default_factory=list)
    median_over_seeds: float = float("nan")
    smoothness: dict = field(default_factory=dict)

    def recompute(self):
        self.seeds.sort(key=lambda sr: sr.seed)
        self.median_over_seeds = float(
            np.median([sr.median_max_error for sr in self.seeds])
        )
        return self


def sample_expert_runs(expert, problem_file, n_eval, steps, seed, frac=0.8, jobs=1):
    """Draw held-out starts and roll the expert once from each.

    Starts are uniform over the frac-scaled state box; draws the expert
    rejects (infeasible or halted runs) are resampled, so every returned
    run has the full number of steps.  The expert rollouts depend only on
    the evaluation seed, never on training, so callers evaluating several
    trained models should reuse the returned list.  jobs > 1 runs the CLI
    subprocesses concurrently; the candidate sequence and the kept subset
    are seed-determined either way.
    """
    problem = load_problem(problem_file)
    center = 0.5 * (problem.state_lo + problem.state_hi)
    half = 0.5 * frac * (problem.state_hi - problem.state_lo)
    rng = np.random.default_rng(seed)

    def attempt(x0):
        try:
            return expert_rollout(
                expert, x0, steps, seed=seed, problem_file=problem_file
            )
        except ExpertCliError:
            return None

    runs = []
    attempts = 0
    while len(runs) < n_eval:
        if attempts > 50 * n_eval:
            raise RuntimeError(
                f"could not find {n_eval} feasible starts in {attempts} draws"
            )
        batch = [rng.uniform(center - half, center + half) for _ in range(n_eval - len(runs))]
        attempts += len(batch)
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(attempt, batch))
        else:
            outcomes = [attempt(x0) for x0 in batch]
        for x0, outcome in zip(batch, outcomes):
            if outcome is None:
                continue
            states, inputs, jacs = outcome
            runs.append(
                ExpertRun(
                    x0=x0,
                    states=states,
                    inputs=inputs,
                    jacobians=jacs,
                    terminal=problem.step(states[-1], inputs[-1]),
                )
            )
    return runs


def rollout_policy(policy, problem, x0, steps):
    """Simulate x+ = A x + B policy(x); returns (states incl. terminal, inputs)."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    states = [x]
    inputs = []
    for t in range(steps):
        u = np.asarray(policy(states[-1], t), dtype=float).reshape(-1)
        inputs.append(u)
        states.append(problem.step(states[-1], u))
    return np.asarray(states), np.asarray(inputs)


def evaluate_policy(policy, expert_runs, problem):
    """Max tracking error of a policy callable against cached expert runs."""
    max_errors = []
    for run in expert_runs:
        states, _ = rollout_policy(policy, problem, run.x0, run.states.shape[0])
        expert_states = np.vstack([run.states, run.terminal])
        err = np.linalg.norm(states - expert_states, axis=1)
        max_errors.append(float(err.max()))
    return max_errors


def evaluate(
    model_file,
    problem_file,
    n_eval,
    steps,
    seed,
    expert=None,
    expert_runs=None,
    smoothness=None,
):
    """Score one trained model in closed loop; returns an ImitationReport.

    The expert defaults to whatever generated the training dataset (read
    from the model file's dataset meta); pass an ExpertSpec to override,
    which is required when the meta label lacks sampling details.  Pass
    expert_runs to reuse rollouts across models trained with different
    seeds, and smoothness (the measure_smoothness() dict) to record the
    expert's measured curvature in the report.
    """
    model, extras = load_policy(model_file)
    if expert is None:
        label = extras.get("dataset_meta", {}).get("policy", "")
        kind, parameter = parse_expert_label(label)
        if parameter is None:
            raise ValueError(
                f"cannot infer the expert from dataset meta {label!r}; "
                "pass expert=ExpertSpec(...)"
            )
        expert = ExpertSpec(kind, parameter)
    problem = load_problem(problem_file)
    if expert_runs is None:
        expert_runs = sample_expert_runs(
            expert, problem_file, n_eval, steps, seed
        )

    max_errors = evaluate_policy(model.policy_fn(), expert_runs, problem)

    expert_states = np.vstack([run.states for run in expert_runs])
    expert_inputs = np.vstack([run.inputs for run in expert_runs])
    expert_jacs = np.concatenate([run.jacobians for run in expert_runs])
    u_pred, jac_pred = model.value_and_jacobian(torch.as_tensor(expert_states))
    u_pred = u_pred.detach()
    jac_pred = jac_pred.detach()
    value_mse = float(torch.mean((u_pred - torch.as_tensor(expert_inputs)) ** 2))
    jac_mse = float(torch.mean((jac_pred - torch.as_tensor(expert_jacs)) ** 2))

    result = SeedResult(
        seed=int(extras["config"]["seed"]),
        model_hash=extras.get("weights_hash", weights_hash(model)),
        max_errors=max_errors,
        median_max_error=float(np.median(max_errors)),
        mean_max_error=float(np.mean(max_errors)),
        value_mse=value_mse,
        jacobian_mse=jac_mse,
    )
    report = ImitationReport(
        expert={
            "label": expert.label(),
            "kind": expert.kind,
            "parameter": expert.parameter,
            "samples": expert.samples,
            "dist": expert.dist,
        },
        recipe=extras["recipe"],
        dataset_hash=extras["dataset_hash"],
        config_hash=extras["config_hash"],
        n_eval=len(expert_runs),
        steps=steps,
        eval_seed=seed,
        seeds=[result],
        smoothness=smoothness or {},
    )
    return report.recompute()


def combine_reports(reports):
    """Merge per-seed reports for the same expert, dataset, and recipe."""
    if not reports:
        raise ValueError("no reports to combine")
    first = reports[0]
    merged = ImitationReport(
        expert=first.expert,
        recipe=first.recipe,
        dataset_hash=first.dataset_hash,
        config_hash=first.config_hash,
        n_eval=first.n_eval,
        steps=first.steps,
        eval_seed=first.eval_seed,
        smoothness=first.smoothness,
    )
    for report in reports:
        if report.dataset_hash != first.dataset_hash:
            raise ValueError("reports mix datasets; refusing to combine")
        if report.config_hash != first.config_hash:
            raise ValueError("reports mix training recipes; refusing to combine")
        if report.expert["label"] != first.expert["label"]:
            raise ValueError("reports mix experts; refusing to combine")
        merged.seeds.extend(report.seeds)
    return merged.recompute()


def write_report_json(report, path):
    payload = asdict(report)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return Path(path)


def write_report_csv(report, path):
    """Plot-ready long format: one row per (training seed, eval start)."""
    lines = ["expert,seed,start_index,max_error,value_mse,jacobian_mse"]
    for sr in report.seeds:
        for idx, err in enumerate(sr.max_errors):
            lines.append(
                f"{report.expert['label']},{sr.seed},{idx},{err:.17g},"
                f"{sr.value_mse:.17g},{sr.jacobian_mse:.17g}"
            )
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)
