"""CSV loading with strict schema checks.

Volume snapshots carry node_id,x,y,L,P; boundary snapshots carry
node_id,theta,l,p where p is empty off the active arc.  Loading never
rescales or reinterprets values.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import SchemaError

VOLUME_COLUMNS = ("node_id", "x", "y", "L", "P")
BOUNDARY_COLUMNS = ("node_id", "theta", "l", "p")


def _read_rows(path, expected_columns):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input CSV does not exist: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        for col in expected_columns:
            if col not in header:
                raise SchemaError(f"{path}: missing column '{col}'")
        idx = {col: header.index(col) for col in expected_columns}
        rows = list(reader)
    return rows, idx


def load_volume(path) -> dict[str, np.ndarray]:
    rows, idx = _read_rows(path, VOLUME_COLUMNS)
    out = {col: np.empty(len(rows)) for col in ("x", "y", "L", "P")}
    for i, row in enumerate(rows):
        for col in ("x", "y", "L", "P"):
            out[col][i] = float(row[idx[col]])
    if len(rows) < 3:
        raise SchemaError(f"{path}: fewer than 3 volume nodes")
    return out


def load_boundary(path) -> dict[str, np.ndarray]:
    rows, idx = _read_rows(path, BOUNDARY_COLUMNS)
    theta = np.empty(len(rows))
    l_vals = np.empty(len(rows))
    p_vals = np.full(len(rows), np.nan)  # NaN marks off-arc nodes
    for i, row in enumerate(rows):
        theta[i] = float(row[idx["theta"]])
        l_vals[i] = float(row[idx["l"]])
        raw_p = row[idx["p"]] if idx["p"] < len(row) else ""
        if raw_p.strip():
            p_vals[i] = float(raw_p)
    order = np.argsort(theta, kind="stable")
    return {"theta": theta[order], "l": l_vals[order], "p": p_vals[order]}
