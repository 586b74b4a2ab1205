"""Conserved quantities, the quadratic decay functional, coercivity-shift
estimates, log-log decay fits, and radial profile extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .assembly import (BlockOperator, FemOperators, ModelParams, block_mass,
                       build_spatial_operator)
from .errors import SolverError
from .mesh import Mesh


@dataclass(frozen=True)
class MassReport:
    mass_volume_L: float
    mass_volume_P: float
    mass_gamma_l: float
    mass_gamma2_p: float

    @property
    def total(self) -> float:
        return (self.mass_volume_L + self.mass_volume_P
                + self.mass_gamma_l + self.mass_gamma2_p)


@dataclass(frozen=True)
class GardingEstimate:
    delta1: float
    delta2: float
    min_eig_shifted: float


@dataclass(frozen=True)
class DualityFields:
    Z: np.ndarray   # L + P
    W: np.ndarray   # d_L*L + d_P*P

    def ratio_bounds(self, floor: float = 1e-14) -> tuple[float, float]:
        mask = self.Z > floor
        if not np.any(mask):
            return (np.nan, np.nan)
        r = self.W[mask] / self.Z[mask]
        return (float(r.min()), float(r.max()))


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class RadialProfile:
    r: np.ndarray
    L: np.ndarray
    P: np.ndarray
    clamped: np.ndarray  # True where the sample fell outside the polygon


def total_mass(state, ops: FemOperators) -> MassReport:
    """Field masses through the consistent quadrature: 1' M x per field."""
    mL = float(np.sum(ops.M_omega @ state.L))
    mP = float(np.sum(ops.M_omega @ state.P))
    ml = float(np.sum(ops.M_gamma @ state.l))
    mp = float(np.sum(ops.M_gamma2 @ state.p)) if len(state.p) else 0.0
    return MassReport(mL, mP, ml, mp)


def lyapunov_H(state, params: ModelParams, ops: FemOperators) -> float:
    """Quadratic functional H = (|L|^2 + |P|^2 + sigma |l|^2 + xi |p|^2)/2,
    with the p-norm taken over the active arc."""
    h = state.L @ (ops.M_omega @ state.L) + state.P @ (ops.M_omega @ state.P)
    h += params.sigma * (state.l @ (ops.M_gamma @ state.l))
    if len(state.p):
        h += params.xi * (state.p @ (ops.M_gamma2 @ state.p))
    return 0.5 * float(h)


def duality_fields(state, params: ModelParams) -> DualityFields:
    return DualityFields(Z=state.L + state.P,
                         W=params.d_L * state.L + params.d_P * state.P)


_EIG_EPS = 1e-6


def garding_estimate(op: BlockOperator, ops: FemOperators,
                     coarse_only: bool = True) -> GardingEstimate:
    """Validate the coercivity-up-to-shift of the spatial operator.

    With A_sym = (A + A')/2, M the block mass, and N the block H1-norm matrix
    (mass + stiffness per field), finds delta1 >= 0 for the fixed
    delta2 = min(d_L, d_P, d_l+eps, d_p+eps, min reaction rate)/2 such that
    the smallest eigenvalue of (A_sym + delta1*M - delta2*N, M) clears -1e-10.

    The pencil is affine in delta1 with unit shift, so one generalized
    eigensolve determines the minimal delta1 exactly; a second solve verifies.
    """
    n = op.A.shape[0]
    if coarse_only and n > 2000:
        raise SolverError(
            f"dense eigensolve limited to 2000 dofs, operator has {n}")
    pr = op.params
    reaction_floor = min(pr.alpha, pr.beta, pr.gamma, pr.lam, pr.sigma, pr.xi)
    delta2 = 0.5 * min(pr.d_L + (_EIG_EPS if pr.d_L == 0 else 0.0),
                       pr.d_P + (_EIG_EPS if pr.d_P == 0 else 0.0),
                       pr.d_l + _EIG_EPS, pr.d_p + _EIG_EPS,
                       reaction_floor + _EIG_EPS)

    reduced = len(op.fields) == 3
    M = block_mass(ops, reduced=reduced)
    stiff = [ops.K_omega, ops.K_omega, ops.K_gamma]
    if not reduced:
        stiff.append(ops.K_gamma2)
    N = (M + sp.block_diag(stiff, format="csr")).toarray()
    A_sym = 0.5 * (op.A + op.A.T).toarray()
    Md = M.toarray()

    base = scipy.linalg.eigh(A_sym - delta2 * N, Md, eigvals_only=True,
                             subset_by_index=[0, 0])[0]
    delta1 = max(0.0, -float(base))
    shifted = scipy.linalg.eigh(A_sym + delta1 * Md - delta2 * N, Md,
                                eigvals_only=True, subset_by_index=[0, 0])[0]
    if shifted < -1e-10:
        raise SolverError(
            f"coercivity shift failed to validate: min eigenvalue {shifted:.3e} "
            f"at delta1={delta1:.6g}, delta2={delta2:.6g} (assembly regression?)")
    return GardingEstimate(delta1=delta1, delta2=delta2,
                           min_eig_shifted=float(shifted))


def decay_fit(xs, ys) -> DecayFit:
    """Least-squares fit of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 3 or len(xs) != len(ys):
        raise ValueError("need at least 3 matching samples")
    if np.any(np.diff(xs) <= 0.0):
        raise ValueError("xs must be strictly increasing")
    if np.any(ys <= 0.0):
        raise ValueError("ys must be strictly positive for a log-log fit")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return DecayFit(slope=float(slope), intercept=float(intercept), r_squared=r2)


def _barycentric(points: np.ndarray, tri_pts: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of each point w.r.t. each triangle.

    points (n, 2), tri_pts (m, 3, 2) -> (n, m, 3)
    """
    a, b, c = tri_pts[:, 0], tri_pts[:, 1], tri_pts[:, 2]
    v0 = b - a
    v1 = c - a
    den = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    d = points[:, None, :] - a[None, :, :]
    w1 = (d[:, :, 0] * v1[None, :, 1] - d[:, :, 1] * v1[None, :, 0]) / den
    w2 = (v0[None, :, 0] * d[:, :, 1] - v0[None, :, 1] * d[:, :, 0]) / den
    w0 = 1.0 - w1 - w2
    return np.stack([w0, w1, w2], axis=-1)


def radial_profile(state, mesh: Mesh, theta: float, n_samples: int) -> RadialProfile:
    """P1 interpolation of L and P along the ray angle theta, r in [0, 1].

    Points beyond the inscribed polygon are pulled radially onto the last
    interior triangle and flagged.  Points on edges resolve to the lowest
    containing triangle index.
    """
    if not (0.0 <= theta < 2.0 * np.pi):
        raise ValueError("theta must lie in [0, 2*pi)")
    if n_samples < 8:
        raise ValueError("n_samples must be at least 8")
    r = np.linspace(0.0, 1.0, n_samples)
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    tri_pts = mesh.vertices[mesh.triangles]
    tol = 1e-12
    L_out = np.empty(n_samples)
    P_out = np.empty(n_samples)
    clamped = np.zeros(n_samples, dtype=bool)
    bc_all = _barycentric(pts, tri_pts)
    inside = np.all(bc_all >= -tol, axis=2)
    for i in range(n_samples):
        hits = np.nonzero(inside[i])[0]
        if len(hits):
            t = int(hits[0])
            w = bc_all[i, t]
        else:
            clamped[i] = True
            # pull the sample radially inward until it lands in a triangle
            lo, hi = 0.0, r[i]
            t, w = None, None
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                q = np.array([[mid * np.cos(theta), mid * np.sin(theta)]])
                bc = _barycentric(q, tri_pts)[0]
                ok = np.nonzero(np.all(bc >= -tol, axis=1))[0]
                if len(ok):
                    t, w = int(ok[0]), bc[ok[0]]
                    lo = mid
                else:
                    hi = mid
            if t is None:
                raise SolverError("radial sample could not be located in the mesh")
        idx = mesh.triangles[t]
        w = np.clip(w, 0.0, 1.0)
        w = w / w.sum()
        L_out[i] = float(state.L[idx] @ w)
        P_out[i] = float(state.P[idx] @ w)
    return RadialProfile(r=r, L=L_out, P=P_out, clamped=clamped)


def arc_corner_slopes(l_values: np.ndarray, ops: FemOperators, mesh: Mesh,
                      window: float = 0.3,
                      exclude_jump_segments: bool = True) -> float:
    """Max angular slope |dl/dtheta| of a boundary field near the arc corners.

    The bound field is discontinuous across the corner points when surface
    diffusion vanishes, so the slope across the two corner-incident segments
    is mesh-limited (it grows under refinement).  Those segments are excluded
    by default; the remaining flank slopes measure the physical smearing that
    volume diffusion induces.
    """
    theta = ops.gamma_theta
    n = len(theta)
    nxt = np.roll(np.arange(n), -1)
    dth = (theta[nxt] - theta) % (2.0 * np.pi)
    slopes = np.abs((l_values[nxt] - l_values) / dth)
    mid = (theta + 0.5 * dth) % (2.0 * np.pi)
    corners = np.array([np.pi, 1.5 * np.pi])
    dist = np.min(np.abs(mid[:, None] - corners[None, :]), axis=1)
    near = dist < window
    if exclude_jump_segments:
        cv = set(int(v) for v in mesh.gamma2_endpoint_vertices)
        touch = np.array([int(a) in cv or int(b) in cv
                          for a, b in mesh.boundary_segments])
        near &= ~touch
    if not np.any(near):
        raise ValueError("no boundary segments inside the corner window")
    return float(slopes[near].max())


def verify_operator(mesh: Mesh, ops: FemOperators, params: ModelParams,
                    u: np.ndarray, v: np.ndarray, reduced: bool = False) -> float:
    """Quadratic form v' A u of the assembled spatial operator (test helper)."""
    A = build_spatial_operator(ops, params, reduced=reduced)
    return float(v @ (A @ u))
