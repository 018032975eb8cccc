"""Behavior cloning harness for smoothed MPC experts.

Demonstrations come from the controller's dataset export; evaluation rolls
the cloned policy and the expert from shared held-out starts and reports
the worst state deviation per run.  All contact with the controller goes
through its command line and file formats.
"""

from .compare import ComparisonConfig, clone_expert, compare_experts
from .config import TrainConfig
from .data import Dataset, DatasetSchemaError, file_sha256, load_dataset, parse_expert_label
from .evaluate import (
    ExpertRun,
    ImitationReport,
    SeedResult,
    combine_reports,
    evaluate,
    evaluate_policy,
    rollout_policy,
    sample_expert_runs,
    write_report_csv,
    write_report_json,
)
from .expert import (
    ExpertCliError,
    ExpertSpec,
    LinearProblem,
    expert_rollout,
    export_demonstrations,
    load_problem,
    measure_smoothness,
)
from .model import MlpPolicy, load_policy, save_policy, weights_hash
from .train import TrainingDivergedError, train

__all__ = [
    "ComparisonConfig",
    "Dataset",
    "DatasetSchemaError",
    "ExpertCliError",
    "ExpertRun",
    "ExpertSpec",
    "ImitationReport",
    "LinearProblem",
    "MlpPolicy",
    "SeedResult",
    "TrainConfig",
    "TrainingDivergedError",
    "clone_expert",
    "combine_reports",
    "compare_experts",
    "evaluate",
    "evaluate_policy",
    "expert_rollout",
    "export_demonstrations",
    "file_sha256",
    "load_dataset",
    "load_policy",
    "load_problem",
    "measure_smoothness",
    "parse_expert_label",
    "rollout_policy",
    "sample_expert_runs",
    "save_policy",
    "train",
    "weights_hash",
    "write_report_csv",
    "write_report_json",
]
