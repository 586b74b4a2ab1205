import shutil
import subprocess
import sys
from pathlib import Path

import pytest

# tiny overrides so every preset finishes in seconds; the figures only need
# schema-conforming outputs, not converged physics
_TINY = {
    "fig3_diff": ("mesh.n_base=48", "mesh.refine_levels=0", "time.t_end=0.2",
                  "time.record_every=10"),
    "fig3_nodiff": ("mesh.n_base=48", "mesh.refine_levels=0", "time.t_end=0.2",
                    "time.record_every=10"),
    "figLP_diff": ("mesh.n_base=48", "mesh.refine_levels=0", "time.t_end=0.2",
                   "time.record_every=10"),
    "figLP_nodiff": ("mesh.n_base=48", "mesh.refine_levels=0", "time.t_end=0.2",
                     "time.record_every=10"),
    "figBigDiff": ("mesh.n_base=48", "mesh.refine_levels=0", "time.t_end=0.2",
                   "time.record_every=10"),
    "fig3a": ("mesh.n_base=48", "mesh.refine_levels=0", "time.t_end=0.01",
              "time.record_every=5"),
    "initial_mass": ("mesh.n_base=48", "mesh.refine_levels=0",
                     "time.t_end=0.005", "time.record_every=20"),
    "steady_state": ("mesh.n_base=48", "mesh.refine_levels=0", "time.t_end=0.2",
                     "time.record_every=10"),
    "qssa_sweep": ("mesh.n_base=48", "mesh.refine_levels=0", "time.t_end=0.02",
                   "time.dt=0.0005", "time.record_every=20"),
}


def run_vsrd_preset(name: str, outdir: Path) -> None:
    cmd = [sys.executable, "-m", "vsrd.cli", "run", "--preset", name,
           "--outdir", str(outdir)]
    for ov in _TINY[name]:
        cmd += ["--set", ov]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(
            f"vsrd preset {name} failed ({proc.returncode}): {proc.stderr}")


@pytest.fixture(scope="session")
def preset_runs(tmp_path_factory):
    """One tiny run per catalogue preset, produced through the vsrd CLI."""
    if shutil.which(sys.executable) is None:  # pragma: no cover
        pytest.skip("no python executable")
    root = tmp_path_factory.mktemp("vsrd_runs")
    dirs = {}
    for name in _TINY:
        outdir = root / name
        run_vsrd_preset(name, outdir)
        dirs[name] = outdir
    return dirs


@pytest.fixture(scope="session")
def snapshot_pair(preset_runs):
    """A (volume_csv, boundary_csv) pair from a real run."""
    run = preset_runs["fig3_nodiff"]
    vols = sorted(run.glob("snapshot_*_volume.csv"))
    bnds = sorted(run.glob("snapshot_*_boundary.csv"))
    return vols[-1], bnds[-1]
