"""Subprocess bridge to the controller CLI.

Everything the harness knows about the expert goes through two public
surfaces: the CLI invoked as ``python -m barriermpc.cli ...`` and the files
it writes (trajectory and dataset CSVs, sweep CSVs, problem JSON).  No
controller code is imported here, so the harness exercises the same
interface an external user would.
"""

import json
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import load_dataset

_CLI = (sys.executable, "-m", "barriermpc.cli")


class ExpertCliError(RuntimeError):
    """The controller CLI exited with a non-zero status."""

    def __init__(self, message, returncode):
        super().__init__(message)
        self.returncode = returncode


@dataclass(frozen=True)
class ExpertSpec:
    """Which smoothed controller produces the demonstrations.

    kind is "barrier" (parameter = barrier weight), "rs" (parameter =
    noise scale, with samples Monte Carlo draws from dist), or "explicit"
    (parameter ignored).
    """

    kind: str
    parameter: float = 0.0
    samples: int = 300
    dist: str = "gaussian"

    def __post_init__(self):
        if self.kind not in ("barrier", "rs", "explicit"):
            raise ValueError(f"unknown expert kind {self.kind!r}")

    def policy_args(self):
        args = ["--policy", self.kind]
        if self.kind == "barrier":
            args += ["--eta", repr(float(self.parameter))]
        elif self.kind == "rs":
            args += [
                "--eps",
                repr(float(self.parameter)),
                "--samples",
                str(self.samples),
                "--dist",
                self.dist,
            ]
        return args

    def label(self):
        if self.kind == "barrier":
            return f"barrier(eta={self.parameter:g})"
        if self.kind == "rs":
            return f"rs({self.dist},eps={self.parameter:g},n={self.samples})"
        return "explicit"


@dataclass(frozen=True)
class LinearProblem:
    """Dynamics and state box read from a problem JSON file."""

    A: np.ndarray
    B: np.ndarray
    state_lo: np.ndarray
    state_hi: np.ndarray

    def step(self, x, u):
        return self.A @ x + self.B @ u

    @property
    def d_x(self):
        return self.A.shape[0]

    @property
    def d_u(self):
        return self.B.shape[1]


def load_problem(problem_file):
    """Parse dynamics and the axis-aligned state box from problem JSON.

    The state set is polytopic in general; initial-state sampling only
    needs the box implied by its unit-vector rows, which is exact for the
    box constraints the shipped problems use.
    """
    spec = json.loads(Path(problem_file).read_text())
    A = np.asarray(spec["A"], dtype=float)
    B = np.asarray(spec["B"], dtype=float)
    d_x = A.shape[0]
    lo = np.full(d_x, -np.inf)
    hi = np.full(d_x, np.inf)
    rows = np.asarray(spec["X"]["A"], dtype=float)
    offsets = np.asarray(spec["X"]["b"], dtype=float)
    for row, offset in zip(rows, offsets):
        nonzero = np.nonzero(row)[0]
        if nonzero.size != 1:
            continue
        j = nonzero[0]
        if row[j] > 0:
            hi[j] = min(hi[j], offset / row[j])
        else:
            lo[j] = max(lo[j], offset / row[j])
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError(f"{problem_file} does not bound every state coordinate")
    return LinearProblem(A=A, B=B, state_lo=lo, state_hi=hi)


def _run(args, check=True):
    proc = subprocess.run(
        list(_CLI) + [str(a) for a in args],
        capture_output=True,
        text=True,
    )
    if check and proc.returncode != 0:
        raise ExpertCliError(
            f"controller CLI failed (rc={proc.returncode}): "
            f"{' '.join(str(a) for a in args)}\n{proc.stderr.strip()}",
            proc.returncode,
        )
    return proc


def expert_rollout(spec, x0, steps, seed, problem_file=None):
    """One closed-loop expert run; returns (states, inputs, jacobians).

    states has shape (steps, d_x) with states[t] the state the expert saw
    at step t; inputs and jacobians align with it.  A run the controller
    halts early (infeasible start or constraint exit) raises ExpertCliError
    with the CLI's exit code.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    with tempfile.TemporaryDirectory(prefix="expert-rollout-") as tmp:
        args = [
            "rollout",
            "--x0",
            ",".join(repr(float(v)) for v in x0),
            "--steps",
            str(steps),
            "--seed",
            str(seed),
            "--output-dir",
            tmp,
        ]
        if problem_file is not None:
            args += ["--problem", str(problem_file)]
        args += spec.policy_args()
        _run(args)
        traj = load_dataset(Path(tmp) / "trajectory.csv")
    if traj.n_rows != steps:
        raise ExpertCliError(
            f"expert halted after {traj.n_rows} of {steps} steps from x0={x0}",
            -1,
        )
    return traj.x, traj.u, traj.jac


def export_demonstrations(
    spec, n_traj, steps, seed, out_dir, problem_file=None, frac=0.8, jobs=1
):
    """Batch expert rollouts into a training CSV; returns its path."""
    out_dir = Path(out_dir)
    args = [
        "export-dataset",
        "--n-traj",
        str(n_traj),
        "--steps",
        str(steps),
        "--seed",
        str(seed),
        "--frac",
        repr(float(frac)),
        "--jobs",
        str(jobs),
        "--output-dir",
        str(out_dir),
    ]
    if problem_file is not None:
        args += ["--problem", str(problem_file)]
    args += spec.policy_args()
    _run(args)
    return out_dir / "dataset.csv"


def measure_smoothness(
    spec, problem_file=None, grid=9, frac=0.15, dirs=2, seed=1, jobs=1
):
    """Measure (L0, L1) of the expert with the CLI sweep at one parameter.

    The instrument is fixed across expert kinds (same grid, span, and probe
    directions), so two experts report comparable curvature: "matched
    smoothness" means this L1 agrees.
    """
    if spec.kind == "barrier":
        range_args = ["--etas", repr(float(spec.parameter))]
    elif spec.kind == "rs":
        range_args = [
            "--eps",
            repr(float(spec.parameter)),
            "--samples",
            str(spec.samples),
            "--dist",
            spec.dist,
        ]
    else:
        raise ValueError("smoothness sweeps cover the smoothed experts only")
    with tempfile.TemporaryDirectory(prefix="expert-sweep-") as tmp:
        args = [
            "sweep",
            *range_args,
            "--grid",
            str(grid),
            "--frac",
            repr(float(frac)),
            "--dirs",
            str(dirs),
            "--seed",
            str(seed),
            "--jobs",
            str(jobs),
            "--output-dir",
            tmp,
        ]
        if problem_file is not None:
            args += ["--problem", str(problem_file)]
        _run(args)
        name = "sweep_barrier.csv" if spec.kind == "barrier" else "sweep_rs.csv"
        rows = np.genfromtxt(Path(tmp) / name, delimiter=",", names=True)
    return {
        "parameter": float(rows["parameter"]),
        "L0": float(rows["L0"]),
        "L1": float(rows["L1"]),
        "n_failures": int(rows["n_failures"]),
    }
