"""Figure rendering.

Heatmaps triangulate the volume point cloud (Delaunay on the disk) and shade
nodal values directly, so the rendered colour range equals the data range
exactly.  Boundary profiles plot field against polar angle with the active
arc shaded.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402

from . import SchemaError  # noqa: E402
from .data import load_boundary, load_volume  # noqa: E402

ARC_START = np.pi
ARC_END = 1.5 * np.pi
_DPI = 110


@dataclass(frozen=True)
class RenderResult:
    out: Path
    vmin: float
    vmax: float


def render_heatmap(volume_csv, field: str, out, cmap: str = "viridis",
                   title: str | None = None) -> RenderResult:
    """Triangulated heatmap of a volume field (L or P)."""
    if field not in ("L", "P"):
        raise SchemaError(f"volume field must be 'L' or 'P', got {field!r}")
    data = load_volume(volume_csv)
    values = data[field]
    vmin, vmax = float(values.min()), float(values.max())
    tri = mtri.Triangulation(data["x"], data["y"])
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    coll = ax.tripcolor(tri, values, shading="gouraud", cmap=cmap,
                        vmin=vmin, vmax=vmax)
    phi = np.linspace(0.0, 2.0 * np.pi, 400)
    ax.plot(np.cos(phi), np.sin(phi), color="0.3", lw=0.8)
    arc = np.linspace(ARC_START, ARC_END, 120)
    ax.plot(np.cos(arc), np.sin(arc), color="crimson", lw=2.0)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title if title is not None else field)
    fig.colorbar(coll, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(out, dpi=_DPI)
    plt.close(fig)
    return RenderResult(out=Path(out), vmin=vmin, vmax=vmax)


def render_boundary_profile(boundary_csv, field: str, out,
                            title: str | None = None) -> RenderResult:
    """Boundary concentration against polar angle; active arc shaded."""
    if field not in ("l", "p"):
        raise SchemaError(f"boundary field must be 'l' or 'p', got {field!r}")
    data = load_boundary(boundary_csv)
    theta = data["theta"]
    values = data[field]
    mask = np.isfinite(values)
    if not np.any(mask):
        raise SchemaError(f"{boundary_csv}: field '{field}' has no values")
    theta, values = theta[mask], values[mask]
    vmin, vmax = float(values.min()), float(values.max())
    fig, ax = plt.subplots(figsize=(5.6, 3.4))
    ax.axvspan(ARC_START, ARC_END, color="mistyrose", zorder=0,
               label="active arc")
    ax.plot(theta, values, color="tab:blue", lw=1.4, marker=".", ms=2.5)
    ax.set_xlim(0.0, 2.0 * np.pi)
    ax.set_xlabel(r"boundary angle $\theta$")
    ax.set_ylabel(field)
    ax.set_title(title if title is not None else f"{field} along the boundary")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=_DPI)
    plt.close(fig)
    return RenderResult(out=Path(out), vmin=vmin, vmax=vmax)
