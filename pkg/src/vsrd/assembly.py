"""P1 finite-element assembly: volume mass/stiffness, boundary-polygon
mass/stiffness (tangential derivatives on segments), volume-surface coupling
blocks, and the monolithic implicit-Euler block operator.

All mass matrices are consistent by default so that the discrete conservation
identity (all-ones left vector annihilates the reaction and coupling blocks)
holds to machine precision; a lumped variant is available behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError
from .mesh import Mesh, boundary_lengths, vertex_angles

FIELDS_FULL = ("L", "P", "l", "p")
FIELDS_REDUCED = ("L", "P", "l")


@dataclass(frozen=True)
class ModelParams:
    """Reaction rates (1/time) and diffusion rates (length^2/time).

    alpha/beta: volume interconversion, lam/gamma: sorption/desorption at the
    boundary, sigma: conversion on the active arc, xi: release from the active
    arc into the volume.  Zero rates are structurally permitted (degenerate
    operators are useful for testing); strictly positive rates are enforced at
    the configuration boundary.
    """

    alpha: float = 1.0
    beta: float = 2.0
    gamma: float = 2.0
    lam: float = 4.0
    sigma: float = 3.0
    xi: float = 1.0
    d_L: float = 0.01
    d_P: float = 0.02
    d_l: float = 0.0
    d_p: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "lam", "sigma", "xi",
                     "d_L", "d_P", "d_l", "d_p"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0:
                raise ValueError(f"parameter {name} must be finite and >= 0, got {v!r}")

    def replace(self, **kw) -> "ModelParams":
        from dataclasses import replace
        return replace(self, **kw)


@dataclass(frozen=True)
class DofMap:
    """Index maps between volume, boundary, and active-arc unknowns.

    Volume fields live on all mesh vertices.  Boundary nodes are ordered along
    the boundary cycle starting at (1, 0); active-arc nodes (endpoints
    included) are the contiguous sub-chain from the first corner to the second.
    """

    n_volume: int
    gamma_to_volume: np.ndarray   # (n_gamma,) volume vertex per boundary node
    gamma2_to_gamma: np.ndarray   # (n_gamma2,) boundary node per arc node

    @property
    def n_gamma(self) -> int:
        return len(self.gamma_to_volume)

    @property
    def n_gamma2(self) -> int:
        return len(self.gamma2_to_gamma)

    @property
    def gamma2_to_volume(self) -> np.ndarray:
        return self.gamma_to_volume[self.gamma2_to_gamma]


def build_dofmap(mesh: Mesh) -> DofMap:
    segs = mesh.boundary_segments
    gamma_to_volume = segs[:, 0].copy()
    flagged = np.nonzero(mesh.gamma2_flags)[0]
    if len(flagged) == 0:
        raise AssemblyError("mesh has no active-arc segments")
    # contiguous flagged run, possibly wrapping the cycle start
    order = flagged
    if flagged[0] == 0 and flagged[-1] == len(segs) - 1 and len(flagged) < len(segs):
        breaks = np.nonzero(np.diff(flagged) != 1)[0]
        if len(breaks) == 1:
            order = np.concatenate([flagged[breaks[0] + 1:], flagged[:breaks[0] + 1]])
    gamma2_nodes = np.concatenate([order, [(order[-1] + 1) % len(segs)]])
    dm = DofMap(n_volume=mesh.n_vertices,
                gamma_to_volume=gamma_to_volume,
                gamma2_to_gamma=gamma2_nodes.astype(np.int64))
    start, end = mesh.gamma2_endpoint_vertices
    if gamma_to_volume[gamma2_nodes[0]] != start or gamma_to_volume[gamma2_nodes[-1]] != end:
        raise AssemblyError("active-arc chain does not run between the corner vertices")
    return dm


def assemble_volume_matrices(mesh: Mesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Consistent P1 mass and stiffness matrices on the triangulation."""
    tris = mesh.triangles
    p = mesh.vertices[tris]
    x, y = p[:, :, 0], p[:, :, 1]
    bb = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    cc = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
                  - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    if np.any(area <= 0.0):
        raise AssemblyError("degenerate or inverted triangle in volume assembly")
    ke = (bb[:, :, None] * bb[:, None, :] + cc[:, :, None] * cc[:, None, :]) \
        / (4.0 * area[:, None, None])
    me_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    me = area[:, None, None] * me_ref[None, :, :]
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.n_vertices
    M = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return M, K


def _chain_matrices(lengths: np.ndarray, node_pairs: np.ndarray, n_nodes: int
                    ) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """1D P1 mass/stiffness over a list of segments given as node-index pairs."""
    if len(lengths) == 0:
        raise AssemblyError("empty segment chain")
    me = lengths[:, None, None] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    ke = (1.0 / lengths)[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
    rows = np.repeat(node_pairs, 2, axis=1).ravel()
    cols = np.tile(node_pairs, (1, 2)).ravel()
    M = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    return M, K


def assemble_surface_matrices(mesh: Mesh, which: str
                              ) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """1D P1 mass and Laplace-Beltrami stiffness on the boundary polygon.

    which="gamma": the full cyclic boundary chain.
    which="gamma2": the open active-arc chain; leaving the chain ends free
    realises the natural zero-flux condition at the arc corners.
    """
    dm = build_dofmap(mesh)
    lengths = boundary_lengths(mesh)
    n_seg = len(lengths)
    if which == "gamma":
        pairs = np.column_stack([np.arange(n_seg), (np.arange(n_seg) + 1) % n_seg])
        return _chain_matrices(lengths, pairs, dm.n_gamma)
    if which == "gamma2":
        flagged_order = dm.gamma2_to_gamma[:-1]  # segment start nodes in chain order
        local = np.column_stack([np.arange(dm.n_gamma2 - 1),
                                 np.arange(1, dm.n_gamma2)])
        return _chain_matrices(lengths[flagged_order], local, dm.n_gamma2)
    raise AssemblyError(f"unknown surface chain {which!r}")


def assemble_trace_coupling(mesh: Mesh, dofmap: DofMap, which: str) -> sp.csr_matrix:
    """Rectangular coupling block pairing volume trace dofs with surface dofs.

    Entry (i, j) is the boundary integral of volume basis i against surface
    basis j, i.e. the surface mass matrix lifted through the trace index map:
    the same quadrature as assemble_surface_matrices, so coupling terms cancel
    exactly in the conservation identity.
    """
    if which == "gamma":
        M, _ = assemble_surface_matrices(mesh, "gamma")
        vol_idx = dofmap.gamma_to_volume
    elif which == "gamma2":
        M, _ = assemble_surface_matrices(mesh, "gamma2")
        vol_idx = dofmap.gamma2_to_volume
    else:
        raise AssemblyError(f"unknown surface chain {which!r}")
    if np.any(vol_idx >= dofmap.n_volume):
        raise AssemblyError("trace index map exceeds volume dof range")
    coo = M.tocoo()
    return sp.coo_matrix((coo.data, (vol_idx[coo.row], coo.col)),
                         shape=(dofmap.n_volume, M.shape[1])).tocsr()


def _lump(M: sp.csr_matrix) -> sp.csr_matrix:
    return sp.diags(np.asarray(M.sum(axis=1)).ravel()).tocsr()


@dataclass(frozen=True)
class FemOperators:
    """All base matrices assembled once per mesh."""

    dofmap: DofMap
    M_omega: sp.csr_matrix
    K_omega: sp.csr_matrix
    M_gamma: sp.csr_matrix
    K_gamma: sp.csr_matrix
    M_gamma2: sp.csr_matrix
    K_gamma2: sp.csr_matrix
    M_gamma_chi2: sp.csr_matrix   # boundary mass restricted to flagged segments
    B_gamma: sp.csr_matrix        # (n_volume, n_gamma) trace coupling
    B_gamma2: sp.csr_matrix       # (n_volume, n_gamma2)
    T_gamma: sp.csr_matrix        # (n_gamma, n_volume) 0/1 trace selection
    S_gamma2: sp.csr_matrix       # (n_gamma2, n_gamma) 0/1 arc selection
    gamma_theta: np.ndarray       # polar angle per boundary node
    lumped: bool = False

    @property
    def n_volume(self) -> int:
        return self.dofmap.n_volume


def assemble_operators(mesh: Mesh, lumped: bool = False) -> FemOperators:
    dm = build_dofmap(mesh)
    M_o, K_o = assemble_volume_matrices(mesh)
    M_g, K_g = assemble_surface_matrices(mesh, "gamma")
    M_g2, K_g2 = assemble_surface_matrices(mesh, "gamma2")

    lengths = boundary_lengths(mesh)
    flagged_order = dm.gamma2_to_gamma[:-1]
    n_seg = len(lengths)
    pairs = np.column_stack([flagged_order, (flagged_order + 1) % n_seg])
    M_chi, _ = _chain_matrices(lengths[flagged_order], pairs, dm.n_gamma)

    if lumped:
        M_o, M_g, M_g2, M_chi = map(_lump, (M_o, M_g, M_g2, M_chi))

    ones = np.ones(dm.n_gamma)
    T = sp.coo_matrix((ones, (np.arange(dm.n_gamma), dm.gamma_to_volume)),
                      shape=(dm.n_gamma, dm.n_volume)).tocsr()
    S = sp.coo_matrix((np.ones(dm.n_gamma2),
                       (np.arange(dm.n_gamma2), dm.gamma2_to_gamma)),
                      shape=(dm.n_gamma2, dm.n_gamma)).tocsr()
    B_g = (T.T @ M_g).tocsr()
    B_g2 = (T.T @ (S.T @ M_g2)).tocsr()
    theta = vertex_angles(mesh.vertices[dm.gamma_to_volume])
    theta.setflags(write=False)
    return FemOperators(dofmap=dm, M_omega=M_o, K_omega=K_o,
                        M_gamma=M_g, K_gamma=K_g,
                        M_gamma2=M_g2, K_gamma2=K_g2,
                        M_gamma_chi2=M_chi, B_gamma=B_g, B_gamma2=B_g2,
                        T_gamma=T, S_gamma2=S, gamma_theta=theta, lumped=lumped)


@dataclass(frozen=True)
class BlockOperator:
    """Implicit-Euler system matrix over the stacked unknown and its parts.

    system = M_block + dt * A, where A is the discrete spatial/reaction
    operator of the weak form and M_block the block mass matrix.  fields
    names the stacked components; offsets[f] slices the stacked vector.
    """

    system: sp.csc_matrix
    A: sp.csr_matrix
    M_block: sp.csr_matrix
    blocks: dict
    dt: float
    params: ModelParams
    dofmap: DofMap
    fields: tuple = FIELDS_FULL
    offsets: dict = field(default_factory=dict)

    @property
    def n_dofs(self) -> int:
        return self.system.shape[0]

    def split(self, u: np.ndarray) -> dict:
        return {f: u[self.offsets[f]] for f in self.fields}

    def join(self, parts: dict) -> np.ndarray:
        return np.concatenate([np.asarray(parts[f], dtype=float) for f in self.fields])


def _field_offsets(dofmap: DofMap, fields) -> dict:
    sizes = {"L": dofmap.n_volume, "P": dofmap.n_volume,
             "l": dofmap.n_gamma, "p": dofmap.n_gamma2}
    offsets, start = {}, 0
    for f in fields:
        offsets[f] = slice(start, start + sizes[f])
        start += sizes[f]
    return offsets


def build_spatial_operator(ops: FemOperators, params: ModelParams,
                           reduced: bool = False) -> sp.csr_matrix:
    """Discrete bilinear form as a block matrix over (L, P, l[, p]).

    Full system rows:
      L: d_L*K + beta*M - alpha*M*P + lam*T'M_g*T*L - gamma*B_g*l
      P: d_P*K + alpha*M - beta*M*L - xi*B_g2*p
      l: d_l*K_g + (gamma*M_g + sigma*M_chi2)*l - lam*M_g*T*L
      p: d_p*K_g2 + xi*M_g2*p - sigma*M_g2*S*l
    Reduced (fast-release limit) drops p and sources P from sigma*chi2*l.
    """
    pr = params
    T, S = ops.T_gamma, ops.S_gamma2
    robin = (T.T @ (ops.M_gamma @ T)).tocsr()

    A_LL = pr.d_L * ops.K_omega + pr.beta * ops.M_omega + pr.lam * robin
    A_LP = -pr.alpha * ops.M_omega
    A_Ll = -pr.gamma * ops.B_gamma
    A_PL = -pr.beta * ops.M_omega
    A_PP = pr.d_P * ops.K_omega + pr.alpha * ops.M_omega
    A_lL = -pr.lam * (ops.M_gamma @ T)
    A_ll = pr.d_l * ops.K_gamma + pr.gamma * ops.M_gamma + pr.sigma * ops.M_gamma_chi2

    if reduced:
        A_Pl = -pr.sigma * (ops.B_gamma2 @ S)
        rows = [[A_LL, A_LP, A_Ll],
                [A_PL, A_PP, A_Pl],
                [A_lL, None, A_ll]]
    else:
        A_Pp = -pr.xi * ops.B_gamma2
        A_pl = -pr.sigma * (ops.M_gamma2 @ S)
        A_pp = pr.d_p * ops.K_gamma2 + pr.xi * ops.M_gamma2
        rows = [[A_LL, A_LP, A_Ll, None],
                [A_PL, A_PP, None, A_Pp],
                [A_lL, None, A_ll, None],
                [None, None, A_pl, A_pp]]
    return sp.bmat(rows, format="csr")


def block_mass(ops: FemOperators, reduced: bool = False) -> sp.csr_matrix:
    mats = [ops.M_omega, ops.M_omega, ops.M_gamma]
    if not reduced:
        mats.append(ops.M_gamma2)
    return sp.block_diag(mats, format="csr")


def assemble_block_operator(mesh: Mesh, params: ModelParams, dt: float,
                            lumped: bool = False, ops: FemOperators | None = None,
                            reduced: bool = False) -> BlockOperator:
    """Assemble system = M_block + dt * A for one implicit-Euler step."""
    if not (dt > 0.0):
        raise AssemblyError(f"dt must be positive, got {dt!r}")
    if ops is None:
        ops = assemble_operators(mesh, lumped=lumped)
    A = build_spatial_operator(ops, params, reduced=reduced)
    M = block_mass(ops, reduced=reduced)
    system = (M + dt * A).tocsc()
    fields = FIELDS_REDUCED if reduced else FIELDS_FULL
    return BlockOperator(system=system, A=A, M_block=M,
                         blocks={
                             "M_omega": ops.M_omega, "K_omega": ops.K_omega,
                             "M_gamma": ops.M_gamma, "K_gamma": ops.K_gamma,
                             "M_gamma2": ops.M_gamma2, "K_gamma2": ops.K_gamma2,
                             "M_gamma_chi2": ops.M_gamma_chi2,
                             "B_gamma": ops.B_gamma, "B_gamma2": ops.B_gamma2,
                         },
                         dt=dt, params=params, dofmap=ops.dofmap,
                         fields=fields, offsets=_field_offsets(ops.dofmap, fields))


def conservation_defect(op: BlockOperator) -> float:
    """Max-norm of w'A for the all-ones block vector w, relative to |A|_inf.

    Discrete analogue of total-mass conservation: reaction, sorption and
    release blocks must cancel pairwise.
    """
    w = np.ones(op.A.shape[0])
    wA = op.A.T @ w
    scale = np.abs(op.A).sum(axis=1).max()
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(wA)) / scale)
