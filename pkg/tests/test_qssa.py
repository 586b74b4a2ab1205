import numpy as np
import pytest

from vsrd.errors import UnsupportedConfigError
from vsrd.qssa import compute_pstar, qssa_convergence_study, run_reduced
from vsrd.steady import solve_stationary
from vsrd.transient import InitialData, MeshSpec, SimConfig, run_transient

from conftest import GENERIC


def test_pstar_zero(mesh_small, ops_small):
    ps = compute_pstar(mesh_small, 0.0, ops=ops_small)
    assert np.all(ps.values == 0.0)
    assert ps.total_integral == 0.0


def test_pstar_constant_mass_transfer(mesh_ref, ops_ref):
    ps = compute_pstar(mesh_ref, 0.4, ops=ops_ref)
    arc_len = ops_ref.M_gamma2.sum()
    # discrete identity: volume integral equals the arc integral exactly
    assert abs(ps.total_integral - 0.4 * arc_len) <= 1e-10 * abs(ps.total_integral)
    # converges to 0.4 * (quarter-circle length) = 0.2*pi under refinement
    assert abs(ps.total_integral - 0.2 * np.pi) < 5e-4


def test_pstar_localization(mesh_small, ops_small):
    # the representative peaks on the arc and decays away from it (the
    # consistent mass inverse has exponential off-diagonal decay)
    ps = compute_pstar(mesh_small, 0.4, ops=ops_small)
    arc_nodes = set(ops_small.dofmap.gamma2_to_volume.tolist())
    assert int(np.argmax(ps.values)) in arc_nodes
    arc_coords = mesh_small.vertices[ops_small.dofmap.gamma2_to_volume]
    dist = np.min(np.linalg.norm(
        mesh_small.vertices[:, None, :] - arc_coords[None, :, :], axis=2), axis=1)
    far = dist > 0.4
    assert np.abs(ps.values[far]).max() <= 1e-2 * ps.values.max()


def test_pstar_linearity(mesh_small, ops_small):
    rng = np.random.default_rng(11)
    n2 = ops_small.dofmap.n_gamma2
    p0 = rng.uniform(0.0, 1.0, n2)
    q0 = rng.uniform(0.0, 1.0, n2)
    a, b = 1.7, -0.4
    combo = compute_pstar(mesh_small, a * p0 + b * q0, ops=ops_small)
    parts = (a * compute_pstar(mesh_small, p0, ops=ops_small).values
             + b * compute_pstar(mesh_small, q0, ops=ops_small).values)
    scale = np.abs(combo.values).max()
    assert np.abs(combo.values - parts).max() <= 1e-12 * scale


def test_pstar_input_validation(mesh_small, ops_small):
    with pytest.raises(ValueError):
        compute_pstar(mesh_small, np.zeros(3), ops=ops_small)
    with pytest.raises(ValueError):
        compute_pstar(mesh_small, np.nan, ops=ops_small)


def test_reduced_rejects_surface_diffusion(mesh_small, ops_small):
    cfg = SimConfig(params=GENERIC.replace(d_l=0.01), dt=1e-2, t_end=0.1,
                    mesh=MeshSpec(48, 0))
    with pytest.raises(UnsupportedConfigError):
        run_reduced(cfg, mesh_small, ops=ops_small)


def test_reduced_zero_initial_data(mesh_small, ops_small):
    cfg = SimConfig(params=GENERIC, dt=1e-2, t_end=0.1, record_every=5,
                    mesh=MeshSpec(48, 0),
                    initial=InitialData(L0=0.0, P0=0.0, l0=0.0, p0=0.0))
    rec = run_reduced(cfg, mesh_small, ops=ops_small)
    fin = rec.final()
    assert np.all(fin.L == 0.0) and np.all(fin.P == 0.0) and np.all(fin.l == 0.0)


def test_reduced_mass_matches_full_budget(mesh_ref, ops_ref):
    # the transferred initial mass makes the reduced budget equal the full one
    cfg = SimConfig(params=GENERIC, dt=1e-3, t_end=0.05, record_every=10,
                    mesh=MeshSpec(112, 1))
    rec = run_reduced(cfg, mesh_ref, ops=ops_ref)
    init = InitialData().expand(ops_ref.dofmap)
    full_mass = (np.sum(ops_ref.M_omega @ init["L"])
                 + np.sum(ops_ref.M_omega @ init["P"])
                 + np.sum(ops_ref.M_gamma @ init["l"])
                 + np.sum(ops_ref.M_gamma2 @ init["p"]))
    mass = rec.diag["mass"]
    assert abs(mass[0] - full_mass) <= 1e-12 * full_mass
    assert np.abs(mass - mass[0]).max() <= 1e-10 * mass[0]


def test_reduced_matches_large_release_rate(mesh_coarse, ops_coarse):
    # with no initial arc mass there is no initial layer, and the reduced
    # trajectory tracks the full one at large xi; frozen at 1.6e-5 for
    # xi=1e4 on the coarse mesh
    cfg = SimConfig(params=GENERIC.replace(xi=1e4), dt=1e-3, t_end=1.0,
                    record_every=10 ** 9, mesh=MeshSpec(96, 0),
                    initial=InitialData(p0=0.0))
    full = run_transient(cfg, mesh_coarse, ops=ops_coarse).final()
    red = run_reduced(cfg, mesh_coarse, ops=ops_coarse).final()
    for a, b, M in ((full.L, red.L, ops_coarse.M_omega),
                    (full.l, red.l, ops_coarse.M_gamma)):
        d = a - b
        rel = np.sqrt(d @ (M @ d)) / np.sqrt(b @ (M @ b))
        assert rel <= 1e-4


def test_reduced_shares_stationary_state(mesh_coarse, ops_coarse):
    # common stationary state: long reduced run vs the direct solve with the
    # limit mass budget
    cfg = SimConfig(params=GENERIC, dt=1e-2, t_end=400.0, record_every=10 ** 9,
                    mesh=MeshSpec(96, 0))
    rec = run_reduced(cfg, mesh_coarse, ops=ops_coarse)
    ss = solve_stationary(GENERIC, mesh_coarse, rec.diag["mass"][-1],
                          ops=ops_coarse, include_p_mass=False)
    for a, b, M in ((rec.final().L, ss.L_inf, ops_coarse.M_omega),
                    (rec.final().P, ss.P_inf, ops_coarse.M_omega),
                    (rec.final().l, ss.l_inf, ops_coarse.M_gamma)):
        d = a - b
        rel = np.sqrt(d @ (M @ d)) / np.sqrt(b @ (M @ b))
        assert rel <= 1e-3


def test_study_input_validation(mesh_small, ops_small):
    cfg = SimConfig(params=GENERIC, dt=1e-2, t_end=0.1, mesh=MeshSpec(48, 0))
    with pytest.raises(ValueError):
        qssa_convergence_study(cfg, [10.0], 0.1, mesh_small, ops=ops_small)
    with pytest.raises(UnsupportedConfigError):
        qssa_convergence_study(
            SimConfig(params=GENERIC.replace(d_l=0.01), dt=1e-2, t_end=0.1,
                      mesh=MeshSpec(48, 0)),
            [1.0, 10.0], 0.1, mesh_small, ops=ops_small)


def test_small_study_trends(mesh_small, ops_small):
    # fast smoke study on the small mesh: suppression of the released species
    # and shrinking distance to the reduced trajectory
    cfg = SimConfig(params=GENERIC, dt=1e-3, t_end=0.2, record_every=10 ** 9,
                    mesh=MeshSpec(48, 0))
    rep = qssa_convergence_study(cfg, [10.0, 100.0], 0.2, mesh_small,
                                 ops=ops_small)
    assert rep.p_norms[1] < rep.p_norms[0]
    assert rep.errors_L[1] < rep.errors_L[0]
    assert np.all(rep.mass_defects <= 1e-9)
    # threaded execution returns identical values
    rep2 = qssa_convergence_study(cfg, [10.0, 100.0], 0.2, mesh_small,
                                  ops=ops_small, threads=2)
    assert np.array_equal(rep.p_norms, rep2.p_norms)
    assert np.array_equal(rep.errors_L, rep2.errors_L)
