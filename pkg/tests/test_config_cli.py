import json
import subprocess
import sys

import numpy as np
import pytest

from vsrd.cli import main
from vsrd.config import parse_config
from vsrd.errors import ConfigError
from vsrd.presets import CATALOGUE, run_preset

GOOD_CONFIG = """\
[mesh]
n_base = 48
refine_levels = 0
corner_grading = 0.5

[params]
alpha = 1
beta = 2
gamma = 2
lambda = 4
sigma = 3
xi = 1
d_L = 0.01
d_P = 0.02
d_l = 0
d_p = 0

[time]
dt = 1e-2
t_end = 0.05
record_every = 5

[initial]
L0 = 0.8
P0 = 0.6
l0 = 0.3
p0 = 0.4

[solver]
tolerance = 1e-10
"""


def write_config(tmp_path, text=GOOD_CONFIG, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_good_config(tmp_path):
    cfg = parse_config(write_config(tmp_path))
    assert cfg.params.alpha == 1.0 and cfg.params.lam == 4.0
    assert cfg.params.sigma == 3.0 and cfg.params.d_P == 0.02
    assert cfg.initial.L0 == 0.8 and cfg.initial.p0 == 0.4
    assert cfg.mesh.n_base == 48 and cfg.dt == 1e-2


def test_unknown_key_names_key_and_line(tmp_path):
    bad = GOOD_CONFIG.replace("xi = 1", "xi = 1\nxi_rate = 2")
    with pytest.raises(ConfigError) as err:
        parse_config(write_config(tmp_path, bad))
    msg = str(err.value)
    assert "xi_rate" in msg and "line" in msg


def test_negative_rate_rejected(tmp_path):
    bad = GOOD_CONFIG.replace("d_l = 0", "d_l = -0.1")
    with pytest.raises(ConfigError) as err:
        parse_config(write_config(tmp_path, bad))
    assert "d_l" in str(err.value)
    bad2 = GOOD_CONFIG.replace("alpha = 1", "alpha = 0")
    with pytest.raises(ConfigError) as err2:
        parse_config(write_config(tmp_path, bad2))
    assert "alpha" in str(err2.value)


def test_missing_required_key(tmp_path):
    bad = GOOD_CONFIG.replace("sigma = 3\n", "")
    with pytest.raises(ConfigError) as err:
        parse_config(write_config(tmp_path, bad))
    assert "sigma" in str(err.value)


def test_malformed_number(tmp_path):
    bad = GOOD_CONFIG.replace("beta = 2", "beta = two")
    with pytest.raises(ConfigError) as err:
        parse_config(write_config(tmp_path, bad))
    assert "beta" in str(err.value)


def test_unknown_section(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(write_config(tmp_path, GOOD_CONFIG + "\n[extra]\nfoo = 1\n"))


def test_nodal_initial_data_from_file(tmp_path):
    # per-node data for the arc field
    from vsrd.assembly import assemble_operators
    from vsrd.mesh import build_disk_mesh
    mesh = build_disk_mesh(48, 0, corner_grading=0.5)
    ops = assemble_operators(mesh)
    values = np.linspace(0.0, 1.0, ops.dofmap.n_gamma2)
    np.savetxt(tmp_path / "p0.txt", values)
    text = GOOD_CONFIG.replace("p0 = 0.4", "p0 = p0.txt")
    cfg = parse_config(write_config(tmp_path, text))
    assert isinstance(cfg.initial.p0, np.ndarray)
    expanded = cfg.initial.expand(ops.dofmap)
    assert np.allclose(expanded["p"], values)


def test_run_config_end_to_end(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "out"
    rc = main(["run", "--config", str(cfg_path), "--outdir", str(out),
               "--dump-mesh", "--dump-matrices"])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["tool"] == "vsrd" and "version" in manifest
    assert manifest["mesh"]["n_triangles"] > 0
    assert manifest["config"]["params"]["lambda"] == 4.0
    assert (out / "diagnostics.csv").exists()
    assert (out / "mesh.txt").exists()
    assert (out / "matrices" / "system.txt").exists()
    vol = (out / "snapshot_0000_volume.csv").read_text().splitlines()
    assert vol[0] == "node_id,x,y,L,P"
    bnd = (out / "snapshot_0000_boundary.csv").read_text().splitlines()
    assert bnd[0] == "node_id,theta,l,p"
    # off-arc rows have an empty released-species column
    assert any(line.endswith(",") for line in bnd[1:])
    diag = (out / "diagnostics.csv").read_text().splitlines()
    assert diag[0].startswith("t,mass,H,l2_L")
    assert len(diag) == 1 + 5 + 1  # header + steps + initial row


def test_rerun_byte_identical(tmp_path):
    cfg_path = write_config(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg_path), "--outdir", str(out1)]) == 0
    assert main(["run", "--config", str(cfg_path), "--outdir", str(out2)]) == 0
    for name in ("diagnostics.csv", "snapshot_0001_volume.csv", "manifest.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_override_flag(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "out"
    rc = main(["run", "--config", str(cfg_path), "--outdir", str(out),
               "--set", "time.t_end=0.02", "--set", "params.xi=5"])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["time"]["t_end"] == 0.02
    assert manifest["config"]["params"]["xi"] == 5.0
    rc_bad = main(["run", "--config", str(cfg_path), "--outdir", str(out),
                   "--set", "params.bogus=1"])
    assert rc_bad == 3


def test_unknown_preset_exit_code(tmp_path):
    assert run_preset("unknown", tmp_path) == 2


def test_preset_catalogue_names():
    expected = {"fig3_diff", "fig3_nodiff", "figLP_diff", "figLP_nodiff",
                "figBigDiff", "fig3a", "initial_mass", "steady_state",
                "qssa_sweep"}
    assert set(CATALOGUE) == expected
    descriptions = [p.description for p in CATALOGUE.values()]
    assert len(set(descriptions)) == len(descriptions)


def test_presets_listing_cli(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    assert "fig3a" in out and "qssa_sweep" in out


def test_mesh_info_cli(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    assert main(["mesh-info", "--config", str(cfg_path),
                 "--dump", str(tmp_path / "m.txt")]) == 0
    out = capsys.readouterr().out
    assert "triangles" in out and "min angle" in out
    assert (tmp_path / "m.txt").exists()


def test_config_error_exit_code(tmp_path):
    bad = write_config(tmp_path, GOOD_CONFIG.replace("alpha = 1", "alpha = -1"))
    assert main(["run", "--config", str(bad), "--outdir", str(tmp_path / "o")]) == 3
    assert main(["mesh-info", "--config", str(tmp_path / "nope.ini")]) == 3


def test_small_preset_run(tmp_path):
    # fig3a on a tiny mesh and horizon: exercises the sweep machinery
    rc = run_preset("fig3a", tmp_path / "f3a",
                    overrides=("mesh.n_base=48", "mesh.refine_levels=0",
                               "time.t_end=0.01", "time.record_every=5"))
    assert rc == 0
    comp = (tmp_path / "f3a" / "comparison.csv").read_text().splitlines()
    assert comp[0] == "xi,max_p"
    assert len(comp) == 5
    values = [float(line.split(",")[1]) for line in comp[1:]]
    assert all(b < a for a, b in zip(values, values[1:]))
    manifest = json.loads((tmp_path / "f3a" / "manifest.json").read_text())
    assert len(manifest["runs"]) == 4
    sub = tmp_path / "f3a" / manifest["runs"][0]["dir"]
    assert (sub / "diagnostics.csv").exists()


def test_chi_smoothing_stub(tmp_path):
    text = GOOD_CONFIG.replace("xi = 1", "xi = 1\nchi_smoothing = 0.05")
    with pytest.raises(ConfigError) as err:
        parse_config(write_config(tmp_path, text))
    assert "chi_smoothing" in str(err.value)
    ok = GOOD_CONFIG.replace("xi = 1", "xi = 1\nchi_smoothing = 0")
    assert parse_config(write_config(tmp_path, ok)).params.xi == 1.0


def test_figlp_preset_writes_profiles(tmp_path):
    rc = run_preset("figLP_nodiff", tmp_path,
                    overrides=("mesh.n_base=48", "mesh.refine_levels=0",
                               "time.t_end=0.05", "time.record_every=5"))
    assert rc == 0
    for name in CATALOGUE["figLP_nodiff"].expected_outputs:
        assert (tmp_path / name).exists(), name
    prof = (tmp_path / "profile_L.csv").read_text().splitlines()
    assert prof[0] == "field,theta,r,value"
    assert prof[1].startswith("L,")


def test_steady_state_preset_schema(tmp_path):
    rc = run_preset("steady_state", tmp_path,
                    overrides=("mesh.n_base=48", "mesh.refine_levels=0",
                               "time.t_end=0.05", "time.record_every=5"))
    assert rc == 0
    comp = (tmp_path / "comparison.csv").read_text().splitlines()
    assert comp[0] == "xi_low,xi_high,max_pointwise_rel_diff_P"
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["t_final"] == "inf"
    assert manifest["stationary_residual"] <= 1e-8
    for name in CATALOGUE["steady_state"].expected_outputs:
        assert (tmp_path / name).exists(), name
    stat = (tmp_path / "stationary_volume.csv").read_text().splitlines()
    assert stat[0] == "node_id,x,y,L,P"


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "vsrd.cli", "presets"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "steady_state" in proc.stdout
