"""Preset catalogue reproducing the reference experiments, and the run
orchestration that writes snapshot/diagnostic CSVs plus a manifest."""

from __future__ import annotations

import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .assembly import ModelParams, assemble_operators
from .config import apply_overrides, config_from_dict, config_to_dict
from .diagnostics import radial_profile
from .errors import ConfigError, UsageError, VsrdError
from .io import (mesh_stats, write_diagnostics_csv, write_manifest,
                 write_profile_csv, write_snapshots, _fmt)
from .mesh import build_disk_mesh, write_mesh_text
from .qssa import qssa_convergence_study, run_reduced
from .steady import solve_stationary
from .transient import InitialData, MeshSpec, SimConfig, run_transient

_BASE_MESH = MeshSpec(n_base=112, refine_levels=1, corner_grading=0.25)
_GENERIC = ModelParams(alpha=1.0, beta=2.0, gamma=2.0, lam=4.0, sigma=3.0,
                       xi=1.0, d_L=0.01, d_P=0.02, d_l=0.0, d_p=0.0)
_INITIAL = InitialData(L0=0.8, P0=0.6, l0=0.3, p0=0.4)


@dataclass(frozen=True)
class Preset:
    name: str
    config: SimConfig
    description: str
    expected_outputs: tuple
    xis: tuple = ()          # release-rate sweep, empty for single runs
    kind: str = "transient"  # transient | sweep | steady | qssa
    profile_theta: float | None = None


def _cfg(params: ModelParams, dt: float, t_end: float, record_every: int) -> SimConfig:
    return SimConfig(params=params, dt=dt, t_end=t_end, initial=_INITIAL,
                     record_every=record_every, mesh=_BASE_MESH)


def _catalogue() -> dict[str, Preset]:
    long_run = dict(dt=1e-2, t_end=100.0, record_every=2000)
    surf = _GENERIC.replace(d_l=0.02, d_p=0.04)
    entries = [
        Preset("fig3_diff", _cfg(surf, **long_run),
               "long-run boundary concentrations with surface diffusion "
               "(d_l=0.02, d_p=0.04)",
               ("diagnostics.csv", "manifest.json")),
        Preset("fig3_nodiff", _cfg(_GENERIC, **long_run),
               "long-run boundary concentrations without surface diffusion",
               ("diagnostics.csv", "manifest.json")),
        Preset("figLP_diff", _cfg(surf, **long_run),
               "long-run volume concentrations with surface diffusion; "
               "radial profiles along theta=5*pi/4",
               ("diagnostics.csv", "profile_L.csv", "profile_P.csv"),
               profile_theta=1.25 * np.pi),
        Preset("figLP_nodiff", _cfg(_GENERIC, **long_run),
               "long-run volume concentrations without surface diffusion; "
               "radial profiles along theta=5*pi/4",
               ("diagnostics.csv", "profile_L.csv", "profile_P.csv"),
               profile_theta=1.25 * np.pi),
        Preset("figBigDiff", _cfg(_GENERIC.replace(d_L=0.1), **long_run),
               "ten-fold volume diffusion d_L=0.1 without surface diffusion",
               ("diagnostics.csv", "manifest.json")),
        Preset("fig3a", _cfg(_GENERIC, dt=1e-3, t_end=0.04, record_every=10),
               "early-time arc concentration of the released species for "
               "increasing release rates",
               ("comparison.csv",), xis=(10.0, 20.0, 50.0, 100.0), kind="sweep"),
        Preset("initial_mass", _cfg(_GENERIC, dt=1e-4, t_end=0.3, record_every=1000),
               "transient boundary layer in the volume phosphorylated field "
               "for slow vs fast release",
               ("comparison.csv",), xis=(1.0, 1000.0), kind="sweep"),
        Preset("steady_state", _cfg(_GENERIC, **long_run),
               "long-run states for slow vs fast release plus the direct "
               "stationary solve",
               ("comparison.csv", "stationary_volume.csv"),
               xis=(1.0, 1000.0), kind="steady"),
        Preset("qssa_sweep", _cfg(_GENERIC, dt=1e-4, t_end=0.5, record_every=10**9),
               "full-vs-reduced space-time distances and arc norms over a "
               "release-rate sweep",
               ("qssa_report.csv",), xis=(10.0, 100.0, 1000.0), kind="qssa"),
    ]
    return {p.name: p for p in entries}


CATALOGUE = _catalogue()


def list_presets() -> list[tuple[str, str]]:
    return [(p.name, p.description) for p in CATALOGUE.values()]


def _override_config(config: SimConfig, overrides) -> SimConfig:
    if not overrides:
        return config
    table = {sec: {k: (repr(v) if not isinstance(v, str) else v, 0)
                   for k, v in kv.items()}
             for sec, kv in config_to_dict(config).items()}
    # nodal initial data cannot be round-tripped through text overrides
    for key, val in (("L0", config.initial.L0), ("P0", config.initial.P0),
                     ("l0", config.initial.l0), ("p0", config.initial.p0)):
        if np.ndim(val) != 0:
            raise ConfigError("cannot apply overrides to nodal initial data")
    table = apply_overrides(table, overrides)
    return config_from_dict(table)


def _single_run_outputs(outdir: Path, mesh, ops, config: SimConfig, rec,
                        profile_theta=None) -> dict:
    outdir.mkdir(parents=True, exist_ok=True)
    snaps = write_snapshots(outdir, mesh, ops, rec)
    write_diagnostics_csv(outdir / "diagnostics.csv", rec)
    extras = {}
    if profile_theta is not None:
        prof = radial_profile(rec.final(), mesh, profile_theta, n_samples=128)
        write_profile_csv(outdir / "profile_L.csv", "L", profile_theta, prof)
        write_profile_csv(outdir / "profile_P.csv", "P", profile_theta, prof)
        extras["profiles"] = ["profile_L.csv", "profile_P.csv"]
    return {"snapshots": snaps, **extras}


def _run_one_xi(preset: Preset, config: SimConfig, mesh, ops, xi: float,
                outdir: Path) -> dict:
    sub = outdir / f"xi_{xi:g}"
    sub.mkdir(parents=True, exist_ok=True)
    cfg = replace(config, params=config.params.replace(xi=xi))
    rec = run_transient(cfg, mesh, ops=ops)
    entry = _single_run_outputs(sub, mesh, ops, cfg, rec)
    write_manifest(sub, {"preset": preset.name, "xi": xi,
                         "config": config_to_dict(cfg),
                         "mesh": mesh_stats(mesh),
                         "t_final": rec.final().t,
                         **entry})
    fin = rec.final()
    return {"xi": xi, "dir": sub.name,
            "max_p": float(fin.p.max()) if len(fin.p) else 0.0,
            "max_P": float(fin.P.max()),
            "final": fin,
            "mass_drift": float(np.abs(rec.diag["mass"] - rec.diag["mass"][0]).max()
                                / abs(rec.diag["mass"][0]))}


def run_preset(name: str, outdir, overrides=(), threads: int = 1) -> int:
    """Execute a catalogue preset into outdir.  Returns a process exit code:
    0 success, 2 usage, 3 configuration, 4 numerical failure, 5 I/O."""
    try:
        if name not in CATALOGUE:
            raise UsageError(
                f"unknown preset {name!r}; available: {', '.join(CATALOGUE)}")
        preset = CATALOGUE[name]
        config = _override_config(preset.config, overrides)
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        try:
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise OSError(f"output directory {out} is not writable: {exc}")

        mesh = build_disk_mesh(config.mesh.n_base, config.mesh.refine_levels,
                               config.mesh.corner_grading)
        ops = assemble_operators(mesh, lumped=config.lumped_mass)
        manifest = {"preset": preset.name, "config": config_to_dict(config),
                    "mesh": mesh_stats(mesh)}

        if preset.kind == "transient":
            rec = run_transient(config, mesh, ops=ops)
            entry = _single_run_outputs(out, mesh, ops, config, rec,
                                        preset.profile_theta)
            write_manifest(out, {**manifest, "t_final": rec.final().t, **entry})

        elif preset.kind == "sweep":
            runner = lambda xi: _run_one_xi(preset, config, mesh, ops, xi, out)
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    results = list(pool.map(runner, preset.xis))
            else:
                results = [runner(xi) for xi in preset.xis]
            results.sort(key=lambda r: r["xi"])
            value_key = "max_p" if preset.name == "fig3a" else "max_P"
            with open(out / "comparison.csv", "w") as fh:
                fh.write(f"xi,{value_key}\n")
                for r in results:
                    fh.write(f"{r['xi']:g},{_fmt(r[value_key])}\n")
            write_manifest(out, {**manifest,
                                 "runs": [{"xi": r["xi"], "dir": r["dir"]}
                                          for r in results]})

        elif preset.kind == "steady":
            runner = lambda xi: _run_one_xi(preset, config, mesh, ops, xi, out)
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    results = list(pool.map(runner, preset.xis))
            else:
                results = [runner(xi) for xi in preset.xis]
            results.sort(key=lambda r: r["xi"])
            a, b = results[0]["final"], results[-1]["final"]
            pair = float(np.max(np.abs(a.P - b.P) / np.abs(b.P)))
            ss = solve_stationary(config.params, mesh,
                                  M0=float(np.sum(ops.M_omega @ a.L)
                                           + np.sum(ops.M_omega @ a.P)
                                           + np.sum(ops.M_gamma @ a.l)
                                           + np.sum(ops.M_gamma2 @ a.p)),
                                  ops=ops)
            from .transient import StateVector
            st = StateVector(L=ss.L_inf, P=ss.P_inf, l=ss.l_inf, p=ss.p_inf,
                             t=np.inf)
            from .io import write_boundary_csv, write_volume_csv
            write_volume_csv(out / "stationary_volume.csv", mesh, st)
            write_boundary_csv(out / "stationary_boundary.csv", ops, st)
            with open(out / "comparison.csv", "w") as fh:
                fh.write("xi_low,xi_high,max_pointwise_rel_diff_P\n")
                fh.write(f"{results[0]['xi']:g},{results[-1]['xi']:g},{_fmt(pair)}\n")
            write_manifest(out, {**manifest, "t_final": "inf",
                                 "stationary_residual": ss.residual_norm,
                                 "pair_rel_diff_P": pair,
                                 "runs": [{"xi": r["xi"], "dir": r["dir"]}
                                          for r in results]})

        elif preset.kind == "qssa":
            rep = qssa_convergence_study(config, preset.xis, config.t_end,
                                         mesh, ops=ops, threads=threads)
            with open(out / "qssa_report.csv", "w") as fh:
                fh.write("xi,p_norm_sq,p_l1_scaled,err_L,err_l\n")
                for i, xi in enumerate(rep.xis):
                    fh.write(f"{xi:g},{_fmt(rep.p_norms[i])},"
                             f"{_fmt(rep.p_l1_scaled[i])},{_fmt(rep.errors_L[i])},"
                             f"{_fmt(rep.errors_l[i])}\n")
            rec = run_reduced(config, mesh, ops=ops)
            entry = _single_run_outputs(out / "reduced", mesh, ops, config, rec)
            write_manifest(out / "reduced",
                           {"preset": preset.name, "config": config_to_dict(config),
                            "mesh": mesh_stats(mesh), "t_final": rec.final().t,
                            "reduced": True, **entry})
            write_manifest(out, {**manifest,
                                 "qssa_slopes": {"p_norms": rep.slope_p_norms,
                                                 "errors_L": rep.slope_errors_L},
                                 "reduced_dir": "reduced"})
        else:  # pragma: no cover
            raise UsageError(f"preset kind {preset.kind!r} not implemented")
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 5
    except VsrdError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


def run_config(config: SimConfig, outdir, threads: int = 1,
               dump_mesh: bool = False, dump_matrices: bool = False) -> int:
    """Run a single transient from an explicit configuration."""
    try:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        mesh = build_disk_mesh(config.mesh.n_base, config.mesh.refine_levels,
                               config.mesh.corner_grading)
        ops = assemble_operators(mesh, lumped=config.lumped_mass)
        if dump_mesh:
            write_mesh_text(mesh, out / "mesh.txt")
        if dump_matrices:
            from .assembly import assemble_block_operator
            from .io import write_matrix_coo
            op = assemble_block_operator(mesh, config.params, config.dt, ops=ops)
            mat_dir = out / "matrices"
            mat_dir.mkdir(exist_ok=True)
            for key, mat in op.blocks.items():
                write_matrix_coo(mat_dir / f"{key}.txt", mat)
            write_matrix_coo(mat_dir / "system.txt", op.system)
        rec = run_transient(config, mesh, ops=ops)
        entry = _single_run_outputs(out, mesh, ops, config, rec)
        write_manifest(out, {"preset": None, "config": config_to_dict(config),
                             "mesh": mesh_stats(mesh),
                             "t_final": rec.final().t, **entry})
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 5
    except VsrdError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
