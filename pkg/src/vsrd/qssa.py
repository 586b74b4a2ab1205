"""Fast-release limit: the reduced three-field system, the transferred
initial mass of the released species, and the numerical limit study over
increasing release rates."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import (FemOperators, assemble_block_operator,
                       assemble_operators)
from .diagnostics import decay_fit
from .errors import UnsupportedConfigError, VsrdError
from .mesh import Mesh
from .transient import (SimConfig, StateVector, TrajectoryRecord, factorize,
                        run_transient, step)


@dataclass(frozen=True)
class PStarField:
    """Volume representation of the initial arc mass of the released species:
    the unique P1 function whose volume inner products match the arc inner
    products of p0 (a mass-matrix solve against the lifted boundary load)."""

    values: np.ndarray
    total_integral: float


@dataclass(frozen=True)
class ConvergenceReport:
    xis: np.ndarray
    errors_L: np.ndarray        # space-time L2 distance, volume
    errors_l: np.ndarray        # space-time L2 distance, boundary
    p_norms: np.ndarray         # squared space-time L2 norm of p on the arc
    p_l1_scaled: np.ndarray     # xi * space-time L1 norm of p on the arc
    slope_p_norms: float
    slope_errors_L: float
    mass_defects: np.ndarray    # max relative mass drift of each full run


def compute_pstar(mesh: Mesh, p0, ops: FemOperators | None = None) -> PStarField:
    """Transfer an arc density into the volume P1 space, mass-exactly."""
    if ops is None:
        ops = assemble_operators(mesh)
    n2 = ops.dofmap.n_gamma2
    p0v = np.asarray(p0, dtype=float)
    if p0v.ndim == 0:
        p0v = np.full(n2, float(p0v))
    if p0v.shape != (n2,):
        raise ValueError(f"p0 must be scalar or shape ({n2},), got {p0v.shape}")
    if not np.all(np.isfinite(p0v)):
        raise ValueError("p0 must be finite")
    rhs = ops.B_gamma2 @ p0v
    lu = spla.splu(ops.M_omega.tocsc())
    values = lu.solve(rhs)
    r = rhs - ops.M_omega @ values
    if np.linalg.norm(r) > 1e-12 * max(np.linalg.norm(rhs), 1e-300):
        values = values + lu.solve(r)
    total = float(np.sum(ops.M_omega @ values))
    return PStarField(values=values, total_integral=total)


def run_reduced(config: SimConfig, mesh: Mesh,
                ops: FemOperators | None = None) -> TrajectoryRecord:
    """Advance the reduced three-field system.

    The released-species initial mass moves into the volume field at t=0
    through its exact P1 transfer; the active arc then sources the volume
    directly from the bound species at rate sigma.
    """
    if config.params.d_l != 0.0 or config.params.d_p != 0.0:
        raise UnsupportedConfigError(
            "reduced system is defined without surface diffusion")
    if ops is None:
        ops = assemble_operators(mesh, lumped=config.lumped_mass)
    init = config.initial.expand(ops.dofmap)
    pstar = compute_pstar(mesh, init["p"], ops=ops)
    override = {"P": init["P"] + pstar.values}
    return run_transient(config, mesh, ops=ops, reduced=True,
                         initial_override=override)


def _trapz(values: np.ndarray, dt: float) -> float:
    return float(np.trapezoid(values, dx=dt))


def _run_pair(config: SimConfig, mesh: Mesh, ops: FemOperators, xi: float,
              pstar_values: np.ndarray) -> dict:
    """Lockstep full-vs-reduced run for one release rate; accumulates
    per-step squared distances so no trajectory is stored."""
    params = config.params.replace(xi=xi)
    op_full = assemble_block_operator(mesh, params, config.dt, ops=ops)
    op_red = assemble_block_operator(mesh, params, config.dt, ops=ops, reduced=True)
    h_full = factorize(op_full, config.tolerance)
    h_red = factorize(op_red, config.tolerance)

    init = config.initial.expand(ops.dofmap)
    full = StateVector(L=init["L"].copy(), P=init["P"].copy(),
                       l=init["l"].copy(), p=init["p"].copy(), t=0.0)
    red = StateVector(L=init["L"].copy(), P=init["P"] + pstar_values,
                      l=init["l"].copy(), p=np.zeros(0), t=0.0)

    n_steps = config.n_steps
    errL2 = np.empty(n_steps + 1)
    errl2 = np.empty(n_steps + 1)
    pn2 = np.empty(n_steps + 1)
    pl1 = np.empty(n_steps + 1)

    def record(k: int):
        dL = full.L - red.L
        dl = full.l - red.l
        errL2[k] = float(dL @ (ops.M_omega @ dL))
        errl2[k] = float(dl @ (ops.M_gamma @ dl))
        pn2[k] = float(full.p @ (ops.M_gamma2 @ full.p))
        pl1[k] = float(np.sum(ops.M_gamma2 @ np.abs(full.p)))

    record(0)
    mass0 = float(np.sum(ops.M_omega @ full.L) + np.sum(ops.M_omega @ full.P)
                  + np.sum(ops.M_gamma @ full.l) + np.sum(ops.M_gamma2 @ full.p))
    mass_defect = 0.0
    try:
        for k in range(1, n_steps + 1):
            full = step(h_full, op_full, full)
            red = step(h_red, op_red, red)
            record(k)
            mass = float(np.sum(ops.M_omega @ full.L) + np.sum(ops.M_omega @ full.P)
                         + np.sum(ops.M_gamma @ full.l) + np.sum(ops.M_gamma2 @ full.p))
            mass_defect = max(mass_defect, abs(mass - mass0) / abs(mass0))
    except VsrdError as exc:
        raise VsrdError(f"limit-study run failed at xi={xi}: {exc}") from exc

    dt = config.dt
    return {
        "xi": xi,
        "err_L": float(np.sqrt(_trapz(errL2, dt))),
        "err_l": float(np.sqrt(_trapz(errl2, dt))),
        "p_norm_sq": _trapz(pn2, dt),
        "p_l1_scaled": xi * _trapz(pl1, dt),
        "max_p_final": float(full.p.max()) if len(full.p) else 0.0,
        "mass_defect": mass_defect,
    }


def qssa_convergence_study(base_config: SimConfig, xis, T: float,
                           mesh: Mesh, ops: FemOperators | None = None,
                           threads: int = 1) -> ConvergenceReport:
    """Run the full system for each release rate against the shared reduced
    trajectory and report space-time distances, arc norms, and fitted slopes.

    All runs share one mesh and one time step so discretisation error cancels
    in the comparisons.
    """
    xis = np.asarray(sorted(float(x) for x in xis))
    if len(xis) < 2 or np.any(np.diff(xis) <= 0):
        raise ValueError("need at least two strictly increasing release rates")
    if base_config.params.d_l != 0.0 or base_config.params.d_p != 0.0:
        raise UnsupportedConfigError("limit study requires zero surface diffusion")
    if ops is None:
        ops = assemble_operators(mesh, lumped=base_config.lumped_mass)

    config = replace(base_config, t_end=T)
    init = config.initial.expand(ops.dofmap)
    pstar = compute_pstar(mesh, init["p"], ops=ops)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda xi: _run_pair(config, mesh, ops, xi, pstar.values), xis))
    else:
        results = [_run_pair(config, mesh, ops, xi, pstar.values) for xi in xis]

    results.sort(key=lambda r: r["xi"])
    p_norms = np.array([r["p_norm_sq"] for r in results])
    err_L = np.array([r["err_L"] for r in results])
    if len(xis) >= 3 and np.all(p_norms > 0):
        slope_p = decay_fit(xis, p_norms).slope
    else:
        slope_p = np.nan
    if len(xis) >= 3 and np.all(err_L > 0):
        slope_e = decay_fit(xis, err_L).slope
    else:
        slope_e = np.nan
    return ConvergenceReport(
        xis=xis,
        errors_L=err_L,
        errors_l=np.array([r["err_l"] for r in results]),
        p_norms=p_norms,
        p_l1_scaled=np.array([r["p_l1_scaled"] for r in results]),
        slope_p_norms=float(slope_p),
        slope_errors_L=float(slope_e),
        mass_defects=np.array([r["mass_defect"] for r in results]),
    )
