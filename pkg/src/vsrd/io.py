"""CSV snapshot/diagnostic writers and the run manifest.

All numeric output uses repr-precision formatting so reruns with identical
configuration produce byte-identical files.
"""

from __future__ import annotations

import functools
import json
import subprocess
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import FemOperators
from .mesh import Mesh
from .transient import StateVector, TrajectoryRecord


@functools.lru_cache(maxsize=1)
def version_string() -> str:
    """Package version plus the source revision when running from a checkout."""
    try:
        rev = subprocess.run(
            ["git", "-C", str(Path(__file__).parent), "rev-parse", "--short", "HEAD"],
            capture_output=True, text=True, timeout=5)
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.TimeoutExpired):
        pass
    return __version__


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def write_volume_csv(path, mesh: Mesh, state: StateVector) -> None:
    with open(path, "w") as fh:
        fh.write("node_id,x,y,L,P\n")
        for i in range(mesh.n_vertices):
            x, y = mesh.vertices[i]
            fh.write(f"{i},{_fmt(x)},{_fmt(y)},{_fmt(state.L[i])},{_fmt(state.P[i])}\n")


def write_boundary_csv(path, ops: FemOperators, state: StateVector) -> None:
    dm = ops.dofmap
    p_of_gamma = {}
    if len(state.p):
        for j, g in enumerate(dm.gamma2_to_gamma):
            p_of_gamma[int(g)] = state.p[j]
    with open(path, "w") as fh:
        fh.write("node_id,theta,l,p\n")
        for g in range(dm.n_gamma):
            vol = dm.gamma_to_volume[g]
            theta = ops.gamma_theta[g]
            p_str = _fmt(p_of_gamma[g]) if g in p_of_gamma else ""
            fh.write(f"{vol},{_fmt(theta)},{_fmt(state.l[g])},{p_str}\n")


_DIAG_COLUMNS = ("t", "mass", "H",
                 "l2_L", "l2_P", "l2_l", "l2_p",
                 "min_L", "min_P", "min_l", "min_p",
                 "max_L", "max_P", "max_l", "max_p")


def write_diagnostics_csv(path, record: TrajectoryRecord) -> None:
    diag = record.diag
    n = len(diag["t"])
    with open(path, "w") as fh:
        fh.write(",".join(_DIAG_COLUMNS) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(diag[c][i]) for c in _DIAG_COLUMNS) + "\n")


def write_profile_csv(path, field: str, theta: float, profile) -> None:
    values = getattr(profile, field)
    with open(path, "w") as fh:
        fh.write("field,theta,r,value\n")
        for r, v in zip(profile.r, values):
            fh.write(f"{field},{_fmt(theta)},{_fmt(r)},{_fmt(v)}\n")


def write_matrix_coo(path, matrix) -> None:
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for k in order:
            fh.write(f"{coo.row[k]} {coo.col[k]} {_fmt(coo.data[k])}\n")


def write_snapshots(outdir: Path, mesh: Mesh, ops: FemOperators,
                    record: TrajectoryRecord) -> list[dict]:
    entries = []
    for idx, snap in enumerate(record.snapshots):
        vol = outdir / f"snapshot_{idx:04d}_volume.csv"
        bnd = outdir / f"snapshot_{idx:04d}_boundary.csv"
        write_volume_csv(vol, mesh, snap)
        write_boundary_csv(bnd, ops, snap)
        entries.append({"index": idx, "t": snap.t,
                        "volume_csv": vol.name, "boundary_csv": bnd.name})
    return entries


def write_manifest(outdir: Path, payload: dict) -> None:
    payload = dict(payload)
    payload.setdefault("tool", "vsrd")
    payload.setdefault("version", version_string())
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def mesh_stats(mesh: Mesh) -> dict:
    from .mesh import mesh_quality
    q = mesh_quality(mesh)
    return {
        "n_vertices": mesh.n_vertices,
        "n_triangles": q.n_triangles,
        "n_boundary_segments": q.n_boundary_segments,
        "h_max": q.h_max,
        "h_min": q.h_min,
        "min_angle_deg": q.min_angle,
        "disk_area_defect": q.disk_area_defect,
        "refine_level": mesh.refine_level,
    }
