"""Load expert demonstration datasets from the controller CLI's CSV export.

The expected file is the ``export-dataset`` product of the controller
command line: a header ``traj_id,t,x_0,...,u_0,...,J_00,...`` followed by
one row per closed-loop step, with the policy Jacobian flattened row-major
(J_ij is the derivative of input i with respect to state j).  A JSON
sidecar named ``<csv>.meta.json`` describes how the file was generated and
is carried into training reports when present.
"""

import csv
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DatasetSchemaError(ValueError):
    """The CSV file does not follow the demonstration dataset layout."""


@dataclass
class Dataset:
    """Demonstration rows: states, expert inputs, and expert Jacobians."""

    x: np.ndarray  # (n, d_x)
    u: np.ndarray  # (n, d_u)
    jac: np.ndarray  # (n, d_u, d_x)
    traj_id: np.ndarray  # (n,) int
    t: np.ndarray  # (n,) int
    path: Path
    sha256: str
    meta: dict = field(default_factory=dict)

    @property
    def n_rows(self):
        return self.x.shape[0]

    @property
    def d_x(self):
        return self.x.shape[1]

    @property
    def d_u(self):
        return self.u.shape[1]


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _parse_header(header):
    """Split the header into (d_x, d_u) after checking the exact layout."""
    if len(header) < 5 or header[0] != "traj_id" or header[1] != "t":
        raise DatasetSchemaError(
            f"header must start with traj_id,t followed by state, input, and "
            f"Jacobian columns; got {header[:4]}"
        )
    rest = header[2:]
    d_x = 0
    while d_x < len(rest) and rest[d_x] == f"x_{d_x}":
        d_x += 1
    rest = rest[d_x:]
    d_u = 0
    while d_u < len(rest) and rest[d_u] == f"u_{d_u}":
        d_u += 1
    rest = rest[d_u:]
    if d_x == 0 or d_u == 0:
        raise DatasetSchemaError("header is missing x_* or u_* columns")
    expected_jac = [f"J_{i}{j}" for i in range(d_u) for j in range(d_x)]
    if rest != expected_jac:
        raise DatasetSchemaError(
            f"Jacobian columns must be {expected_jac} in row-major order, "
            f"got {rest}"
        )
    return d_x, d_u


def load_dataset(path):
    """Read a demonstration CSV (plus optional meta sidecar) into arrays.

    Raises DatasetSchemaError when the header deviates from the exported
    layout, when any row has the wrong width, or when any value is missing
    or non-finite.  Jacobian columns are mandatory: the training loss needs
    them.
    """
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetSchemaError(f"{path} is empty") from None
        d_x, d_u = _parse_header(header)
        width = 2 + d_x + d_u + d_u * d_x
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DatasetSchemaError(
                    f"{path}:{lineno} has {len(row)} fields, expected {width}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DatasetSchemaError(
                    f"{path}:{lineno} has a non-numeric field"
                ) from None
    if not rows:
        raise DatasetSchemaError(f"{path} has a header but no data rows")
    raw = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise DatasetSchemaError(f"{path} contains non-finite values")

    meta = {}
    meta_path = Path(str(path) + ".meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())

    return Dataset(
        x=raw[:, 2 : 2 + d_x],
        u=raw[:, 2 + d_x : 2 + d_x + d_u],
        jac=raw[:, 2 + d_x + d_u :].reshape(-1, d_u, d_x),
        traj_id=raw[:, 0].astype(int),
        t=raw[:, 1].astype(int),
        path=path,
        sha256=file_sha256(path),
        meta=meta,
    )


def parse_expert_label(label):
    """Extract (kind, parameter) from a meta policy string when possible.

    The exporter writes labels like ``barrier(eta=0.1)`` or
    ``rs(gaussian,eps=0.15)``; anything else returns (label, None).
    """
    match = re.match(r"(barrier)\(eta=([^)]+)\)", label)
    if match:
        return match.group(1), float(match.group(2))
    match = re.match(r"(rs)\([^,)]+,eps=([^,)]+)", label)
    if match:
        return match.group(1), float(match.group(2))
    return label, None
