"""Command-line interface.

  vsrd run --preset NAME | --config FILE [--outdir DIR] [--set k=v ...]
           [--threads N] [--dump-mesh] [--dump-matrices]
  vsrd mesh-info --config FILE [--dump PATH]
  vsrd presets
"""

from __future__ import annotations

import argparse
import sys

from .config import apply_overrides, config_from_dict, parse_config, read_config_text
from .errors import ConfigError, UsageError, VsrdError
from .mesh import build_disk_mesh, mesh_quality, write_mesh_text
from .presets import list_presets, run_config, run_preset

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsrd",
                                     description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="run a preset or a configuration file")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="catalogue preset name")
    src.add_argument("--config", help="path to an INI configuration file")
    run.add_argument("--outdir", default="out", help="output directory")
    run.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="SECTION.KEY=VALUE", help="override a config value")
    run.add_argument("--threads", type=int, default=1,
                     help="concurrent runs for sweep presets")
    run.add_argument("--dump-mesh", action="store_true",
                     help="write the mesh in plain-text node/element format")
    run.add_argument("--dump-matrices", action="store_true",
                     help="write assembled matrices in 'row col value' format")

    info = sub.add_parser("mesh-info", help="build the mesh of a config and report quality")
    info.add_argument("--config", required=True)
    info.add_argument("--dump", help="also write the mesh to this path")

    sub.add_parser("presets", help="list the preset catalogue")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    if args.command is None:
        parser.print_help()
        return EXIT_USAGE

    try:
        if args.command == "presets":
            for name, desc in list_presets():
                print(f"{name:16s} {desc}")
            return EXIT_OK

        if args.command == "mesh-info":
            config = parse_config(args.config)
            mesh = build_disk_mesh(config.mesh.n_base, config.mesh.refine_levels,
                                   config.mesh.corner_grading)
            q = mesh_quality(mesh)
            print(f"vertices            {mesh.n_vertices}")
            print(f"triangles           {q.n_triangles}")
            print(f"boundary segments   {q.n_boundary_segments}")
            print(f"active-arc segments {int(mesh.gamma2_flags.sum())}")
            print(f"h_max               {q.h_max:.6g}")
            print(f"h_min               {q.h_min:.6g}")
            print(f"min angle (deg)     {q.min_angle:.3f}")
            print(f"disk area defect    {q.disk_area_defect:.6g}")
            if args.dump:
                write_mesh_text(mesh, args.dump)
                print(f"mesh written to     {args.dump}")
            return EXIT_OK

        # run
        if args.preset is not None:
            return run_preset(args.preset, args.outdir, tuple(args.overrides),
                              threads=args.threads)
        text = open(args.config).read()
        table = read_config_text(text, source=args.config)
        table = apply_overrides(table, args.overrides)
        from pathlib import Path
        config = config_from_dict(table, base_dir=Path(args.config).parent)
        return run_config(config, args.outdir, threads=args.threads,
                          dump_mesh=args.dump_mesh, dump_matrices=args.dump_matrices)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except VsrdError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
