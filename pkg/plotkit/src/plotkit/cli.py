"""Command-line interface.

  plotkit figure --spec FILE          render one figure from a JSON spec
  plotkit heatmap CSV --field L|P --out PATH [--cmap NAME] [--title T]
  plotkit boundary CSV --field l|p --out PATH [--title T]
  plotkit preset NAME --run-dir DIR --outdir DIR
                                      render the figures of a vsrd preset run

Preset shortcuts read the run manifest to find the final snapshot of each
run directory and render the fields that preset is about.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import SchemaError
from .render import render_boundary_profile, render_heatmap

# which fields each preset's figures show: (kind, field) pairs
_PRESET_FIELDS = {
    "fig3_diff": (("boundary", "l"), ("boundary", "p")),
    "fig3_nodiff": (("boundary", "l"), ("boundary", "p")),
    "figLP_diff": (("heatmap", "L"), ("heatmap", "P")),
    "figLP_nodiff": (("heatmap", "L"), ("heatmap", "P")),
    "figBigDiff": (("boundary", "l"), ("boundary", "p")),
    "fig3a": (("boundary", "p"),),
    "initial_mass": (("heatmap", "P"),),
    "steady_state": (("heatmap", "P"),),
    "qssa_sweep": (("heatmap", "L"), ("boundary", "l")),
}


def _final_snapshot(run_dir: Path) -> tuple[Path, Path]:
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise SchemaError(f"no manifest.json in {run_dir}")
    manifest = json.loads(manifest_path.read_text())
    snaps = manifest.get("snapshots")
    if not snaps:
        raise SchemaError(f"{manifest_path}: manifest lists no snapshots")
    last = snaps[-1]
    return run_dir / last["volume_csv"], run_dir / last["boundary_csv"]


def _render_one(kind: str, field: str, vol: Path, bnd: Path, out: Path,
                title: str) -> Path:
    if kind == "heatmap":
        render_heatmap(vol, field, out, title=title)
    else:
        render_boundary_profile(bnd, field, out, title=title)
    return out


def render_preset(name: str, run_dir, outdir) -> list[Path]:
    """Render the figure set of a finished preset run; returns output paths."""
    if name not in _PRESET_FIELDS:
        raise SchemaError(
            f"unknown preset {name!r}; known: {', '.join(_PRESET_FIELDS)}")
    run_dir = Path(run_dir)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    run_dirs = [run_dir]
    manifest_path = run_dir / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        subs = [run_dir / r["dir"] for r in manifest.get("runs", [])]
        if manifest.get("reduced_dir"):
            subs.append(run_dir / manifest["reduced_dir"])
        if subs:
            run_dirs = subs

    written = []
    for sub in run_dirs:
        label = sub.name if sub != run_dir else "run"
        vol, bnd = _final_snapshot(sub)
        for kind, field in _PRESET_FIELDS[name]:
            out = outdir / f"{name}_{label}_{field}.png"
            _render_one(kind, field, vol, bnd, out, f"{name} {label}: {field}")
            written.append(out)
    # a stationary solve, when present, is rendered alongside the runs
    stat = run_dir / "stationary_volume.csv"
    if stat.exists() and any(k == "heatmap" for k, _ in _PRESET_FIELDS[name]):
        out = outdir / f"{name}_stationary_P.png"
        render_heatmap(stat, "P", out, title=f"{name} stationary: P")
        written.append(out)
    return written


def render_spec(spec_path) -> Path:
    spec = json.loads(Path(spec_path).read_text())
    for key in ("kind", "input", "field", "out"):
        if key not in spec:
            raise SchemaError(f"figure spec is missing key '{key}'")
    kind = spec["kind"]
    if kind == "heatmap":
        render_heatmap(spec["input"], spec["field"], spec["out"],
                       cmap=spec.get("cmap", "viridis"),
                       title=spec.get("title"))
    elif kind == "boundary":
        render_boundary_profile(spec["input"], spec["field"], spec["out"],
                                title=spec.get("title"))
    else:
        raise SchemaError(f"unknown figure kind {kind!r}")
    return Path(spec["out"])


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotkit")
    sub = parser.add_subparsers(dest="command")

    fig = sub.add_parser("figure", help="render from a JSON spec")
    fig.add_argument("--spec", required=True)

    heat = sub.add_parser("heatmap", help="triangulated volume heatmap")
    heat.add_argument("csv")
    heat.add_argument("--field", required=True, choices=("L", "P"))
    heat.add_argument("--out", required=True)
    heat.add_argument("--cmap", default="viridis")
    heat.add_argument("--title")

    bnd = sub.add_parser("boundary", help="boundary concentration profile")
    bnd.add_argument("csv")
    bnd.add_argument("--field", required=True, choices=("l", "p"))
    bnd.add_argument("--out", required=True)
    bnd.add_argument("--title")

    pre = sub.add_parser("preset", help="render the figures of a preset run")
    pre.add_argument("name", choices=sorted(_PRESET_FIELDS))
    pre.add_argument("--run-dir", required=True)
    pre.add_argument("--outdir", required=True)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    if args.command is None:
        parser.print_help()
        return 2
    try:
        if args.command == "figure":
            out = render_spec(args.spec)
            print(out)
        elif args.command == "heatmap":
            res = render_heatmap(args.csv, args.field, args.out,
                                 cmap=args.cmap, title=args.title)
            print(res.out)
        elif args.command == "boundary":
            res = render_boundary_profile(args.csv, args.field, args.out,
                                          title=args.title)
            print(res.out)
        elif args.command == "preset":
            for path in render_preset(args.name, args.run_dir, args.outdir):
                print(path)
        return 0
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
