import numpy as np
import pytest

from vsrd.assembly import ModelParams, assemble_operators
from vsrd.mesh import build_disk_mesh
from vsrd.transient import InitialData, MeshSpec, SimConfig, run_transient

GENERIC = ModelParams(alpha=1.0, beta=2.0, gamma=2.0, lam=4.0, sigma=3.0,
                      xi=1.0, d_L=0.01, d_P=0.02, d_l=0.0, d_p=0.0)
M0_CONTINUOUS = 2.2 * np.pi  # volume (0.8+0.6)*pi + boundary 0.3*2pi + arc 0.4*pi/2


@pytest.fixture(scope="session")
def mesh_small():
    return build_disk_mesh(48, 0)


@pytest.fixture(scope="session")
def ops_small(mesh_small):
    return assemble_operators(mesh_small)


@pytest.fixture(scope="session")
def mesh_coarse():
    # below the 2000-dof cap of the dense coercivity eigensolve
    return build_disk_mesh(96, 0)


@pytest.fixture(scope="session")
def ops_coarse(mesh_coarse):
    return assemble_operators(mesh_coarse)


@pytest.fixture(scope="session")
def mesh_ref():
    # reference desk-scale mesh, ~4000 triangles
    return build_disk_mesh(112, 1)


@pytest.fixture(scope="session")
def ops_ref(mesh_ref):
    return assemble_operators(mesh_ref)


def long_run_config(params, dt=1e-2, t_end=100.0):
    return SimConfig(params=params, dt=dt, t_end=t_end, initial=InitialData(),
                     record_every=2000, mesh=MeshSpec(112, 1))


@pytest.fixture(scope="session")
def run_fig3_nodiff(mesh_ref, ops_ref):
    """Long run without surface diffusion, xi=1 (shared by several criteria)."""
    return run_transient(long_run_config(GENERIC), mesh_ref, ops=ops_ref)


@pytest.fixture(scope="session")
def run_fig3_diff(mesh_ref, ops_ref):
    """Long run with surface diffusion d_l=0.02, d_p=0.04."""
    params = GENERIC.replace(d_l=0.02, d_p=0.04)
    return run_transient(long_run_config(params), mesh_ref, ops=ops_ref)
