"""Direct stationary solver, independent of time stepping.

Without surface diffusion the stationary block system reduces exactly: the
release balance gives p = (sigma/xi) l on the arc, eliminating p; the
diffusive fluxes of the volume pair balance so that d_L*L + d_P*P is a global
constant C.  Fixing C = 1, substituting P = (1 - d_L*L)/d_P and retaining the
boundary-exchange row for l yields a sparse coupled system in (L, l) whose
solution reproduces a null vector of the spatial block operator to solver
precision.  Linearity in the total mass then allows exact mass closure by a
single scale factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (FemOperators, ModelParams, assemble_block_operator,
                       assemble_operators, BlockOperator)
from .errors import SolverError, UnsupportedConfigError
from .mesh import Mesh


@dataclass(frozen=True)
class SteadyState:
    L_inf: np.ndarray
    P_inf: np.ndarray
    l_inf: np.ndarray
    p_inf: np.ndarray
    C: float
    residual_norm: float
    mass: float


def solve_stationary(params: ModelParams, mesh: Mesh, M0: float,
                     ops: FemOperators | None = None,
                     include_p_mass: bool = True) -> SteadyState:
    """Stationary state with total discrete mass M0.

    Requires d_l = d_p = 0 (the exact reduction needs vanishing surface
    diffusion).  include_p_mass=False closes the mass budget over (L, P, l)
    only, which is the fast-release-limit budget; the reported p field is
    (sigma/xi) * l on the arc either way.
    """
    if params.d_l != 0.0 or params.d_p != 0.0:
        raise UnsupportedConfigError(
            "stationary reduction requires zero surface diffusion "
            f"(d_l={params.d_l}, d_p={params.d_p})")
    if not (M0 > 0.0):
        raise ValueError(f"M0 must be positive, got {M0!r}")
    if params.d_P <= 0.0 or params.d_L <= 0.0 or params.xi <= 0.0:
        raise UnsupportedConfigError("stationary reduction needs d_L, d_P, xi > 0")
    if ops is None:
        ops = assemble_operators(mesh)

    pr = params
    T = ops.T_gamma
    robin = (T.T @ (ops.M_gamma @ T)).tocsr()
    # L-row with P eliminated; l-row is the boundary exchange balance
    A_LL = (pr.d_L * ops.K_omega
            + (pr.beta + pr.alpha * pr.d_L / pr.d_P) * ops.M_omega
            + pr.lam * robin)
    A_Ll = -pr.gamma * ops.B_gamma
    A_lL = -pr.lam * (ops.M_gamma @ T)
    A_ll = pr.gamma * ops.M_gamma + pr.sigma * ops.M_gamma_chi2
    system = sp.bmat([[A_LL, A_Ll], [A_lL, A_ll]], format="csc")
    rhs = np.concatenate([(pr.alpha / pr.d_P) * (ops.M_omega @ np.ones(ops.n_volume)),
                          np.zeros(ops.dofmap.n_gamma)])
    try:
        lu = spla.splu(system)
    except RuntimeError as exc:
        raise SolverError(f"stationary system is singular: {exc}") from exc
    sol = lu.solve(rhs)
    r = rhs - system @ sol
    if np.linalg.norm(r) > 1e-8 * np.linalg.norm(rhs):
        sol = sol + lu.solve(r)

    n_v = ops.n_volume
    L = sol[:n_v]
    l = sol[n_v:]
    P = (1.0 - pr.d_L * L) / pr.d_P
    p = (pr.sigma / pr.xi) * l[ops.dofmap.gamma2_to_gamma]

    mass = (float(np.sum(ops.M_omega @ L)) + float(np.sum(ops.M_omega @ P))
            + float(np.sum(ops.M_gamma @ l)))
    if include_p_mass:
        mass += float(np.sum(ops.M_gamma2 @ p))
    if not (mass > 0.0) or not np.isfinite(mass):
        raise SolverError(f"stationary mass closure failed (mass={mass!r})")
    kappa = M0 / mass

    L, P, l, p = kappa * L, kappa * P, kappa * l, kappa * p
    op = assemble_block_operator(mesh, params, dt=1.0, ops=ops)
    u = np.concatenate([L, P, l, p])
    residual = float(np.linalg.norm(op.A @ u) / np.linalg.norm(u))
    return SteadyState(L_inf=L, P_inf=P, l_inf=l, p_inf=p, C=kappa,
                       residual_norm=residual, mass=kappa * mass)


def verify_stationarity(steady_or_state, op: BlockOperator) -> float:
    """||A u||_2 / ||u||_2 for the time-independent part of the block system."""
    if isinstance(steady_or_state, SteadyState):
        s = steady_or_state
        u = np.concatenate([s.L_inf, s.P_inf, s.l_inf, s.p_inf])
    else:
        u = steady_or_state.as_vector(op)
    nrm = np.linalg.norm(u)
    if nrm == 0.0:
        return 0.0
    return float(np.linalg.norm(op.A @ u) / nrm)
