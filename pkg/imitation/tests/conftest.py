import csv
from pathlib import Path

import numpy as np
import pytest

from imitation_harness import ExpertSpec, export_demonstrations

PROBLEM_FILE = Path(__file__).resolve().parents[2] / "problems" / "double_integrator.json"


@pytest.fixture(scope="session")
def problem_file():
    return str(PROBLEM_FILE)


@pytest.fixture
def write_dataset(tmp_path):
    """Writer for synthetic demonstration CSVs in the exported layout."""

    def _write(name, x, u, jac, meta=None):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        jac = np.asarray(jac, dtype=float)
        n, d_x = x.shape
        d_u = u.shape[1]
        header = (
            ["traj_id", "t"]
            + [f"x_{j}" for j in range(d_x)]
            + [f"u_{i}" for i in range(d_u)]
            + [f"J_{i}{j}" for i in range(d_u) for j in range(d_x)]
        )
        path = tmp_path / name
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for row in range(n):
                writer.writerow(
                    [row // 20, row % 20]
                    + [repr(float(v)) for v in x[row]]
                    + [repr(float(v)) for v in u[row]]
                    + [repr(float(v)) for v in jac[row].reshape(-1)]
                )
        if meta is not None:
            import json

            (tmp_path / (name + ".meta.json")).write_text(json.dumps(meta))
        return path

    return _write


@pytest.fixture
def affine_demo():
    """Rows from one affine policy piece: u = K x + k with constant Jacobian."""
    rng = np.random.default_rng(7)
    K = np.array([[-1.7, -2.8]])
    k = np.array([0.3])
    x = rng.uniform(-2.0, 2.0, size=(800, 2))
    u = x @ K.T + k
    jac = np.broadcast_to(K, (x.shape[0], 1, 2)).copy()
    return x, u, jac, K, k


@pytest.fixture(scope="session")
def barrier_dataset(tmp_path_factory):
    """A small real demonstration set from the barrier expert at weight 1."""
    out = tmp_path_factory.mktemp("barrier-demos")
    return export_demonstrations(
        ExpertSpec("barrier", 1.0),
        n_traj=12,
        steps=10,
        seed=5,
        out_dir=out,
        problem_file=str(PROBLEM_FILE),
        jobs=2,
    )
