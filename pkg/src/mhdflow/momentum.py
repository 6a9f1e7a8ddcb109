"""Implicit momentum step in velocity-lift form.

The velocity unknown is w = u - U_B, where U_B is the boundary-velocity
expression evaluated at cell centers. The boundary condition u = u_B is
imposed at boundary faces through a mirrored-ghost closure of the viscous
operator, so w carries homogeneous face data and second-order accuracy
survives at the boundary.

One step solves, per cell and component,

    |K| rho'/dt (w + U_B) + conv(F, u') + mu*visc(u')
        + (mu+lam)*graddiv(u') + pair(rho', u') = |K| rho u / dt + forces

where conv uses the exact mass fluxes F of the transported density
(upwinded velocities, inflow data velocity at inflow faces), visc is the
two-point flux form of the Laplacian, graddiv is the Galerkin square of
the face-averaged divergence, and pair is the face realization of the
regularizing cross term eps*grad(rho).grad(u). Using the same F as the
scalar step is what closes the kinetic-energy identity without remainder.

All tensor-valued structure is block-diagonal over components except the
grad-div coupling, so the 2n x 2n system is assembled from scalar pieces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import StepFailure
from .grid import Grid


@dataclass(frozen=True)
class PhysParams:
    """Adiabatic exponent and viscosity pair; 2*mu + lam must be positive."""

    gamma: float
    mu: float
    lam: float

    def __post_init__(self):
        bad = []
        if not self.gamma > 1:
            bad.append(f"gamma must exceed 1, got {self.gamma}")
        if not self.mu > 0:
            bad.append(f"mu must be positive, got {self.mu}")
        if not 2 * self.mu + self.lam > 0:
            bad.append(f"2*mu + lam must be positive, got {2 * self.mu + self.lam}")
        if bad:
            raise ValueError("; ".join(bad))


@dataclass(frozen=True)
class RegParams:
    """Regularization weights and iteration controls.

    eps      diffusion in the transport equations and the momentum cross term
    delta    weight of the joint-pressure barrier delta*(rho+b)^beta
    beta     barrier exponent, > 1 whenever delta > 0
    eps_init strength of the one-shot initial-data smoothing (0 = off)
    """

    eps: float
    delta: float
    beta: float = 4.0
    eps_init: float = 0.0
    picard_tol: float = 1e-11
    picard_max: int = 50
    tol_lin: float = 1e-11
    max_lin: int = 500

    def __post_init__(self):
        bad = []
        if self.eps < 0:
            bad.append(f"eps must be nonnegative, got {self.eps}")
        if self.delta < 0:
            bad.append(f"delta must be nonnegative, got {self.delta}")
        if self.delta > 0 and not self.beta > 1:
            bad.append(f"beta must exceed 1 when delta > 0, got {self.beta}")
        if self.eps_init < 0:
            bad.append(f"eps_init must be nonnegative, got {self.eps_init}")
        if not self.picard_tol > 0:
            bad.append("picard_tol must be positive")
        if self.picard_max < 1:
            bad.append("picard_max must be at least 1")
        if not self.tol_lin > 0:
            bad.append("tol_lin must be positive")
        if self.max_lin < 1:
            bad.append("max_lin must be at least 1")
        if bad:
            raise ValueError("; ".join(bad))


@dataclass(frozen=True)
class CheckTolerances:
    """Acceptance thresholds for the runtime verdicts (relative to scale)."""

    tol_energy: float = 1e-8
    tol_dom: float = 1e-10
    tol_mp: float = 1e-8
    tol_neg: float = 1e-12


def total_pressure(rho: np.ndarray, b: np.ndarray, phys: PhysParams,
                   reg: RegParams) -> np.ndarray:
    """rho^gamma + b^2/2 + delta*(rho+b)^beta."""
    rho = np.asarray(rho, dtype=float)
    b = np.asarray(b, dtype=float)
    p = np.power(rho, phys.gamma) + 0.5 * b * b
    if reg.delta > 0:
        p = p + reg.delta * np.power(rho + b, reg.beta)
    return p


def viscous_stress(grid: Grid, u: np.ndarray, phys: PhysParams) -> np.ndarray:
    """Pointwise Newtonian stress mu*(G + G^T) + lam*tr(G)*I, centered G."""
    from .fields import velocity_gradient

    G = velocity_gradient(grid, u)
    div = G[:, 0, 0] + G[:, 1, 1]
    S = phys.mu * (G + np.transpose(G, (0, 2, 1)))
    S[:, 0, 0] += phys.lam * div
    S[:, 1, 1] += phys.lam * div
    return S


class ViscousOperator:
    """Grid- and boundary-data-bound discrete viscous structure.

    Holds the two-point Laplacian with ghost closure, its boundary lift,
    the face-averaged divergence (homogeneous closure plus the boundary
    divergence carried by the data), and the Galerkin grad-div matrix.
    Everything here depends only on the grid and u_B, so one instance is
    shared by all steps of a run.

    Stacked component layout: a velocity (n, 2) maps to [u_x; u_y] of
    length 2n; the scalar blocks act identically on both halves.
    """

    def __init__(self, grid: Grid, ub_cells: np.ndarray, ub_faces: np.ndarray):
        self.grid = grid
        n = grid.n_cells
        self.ub_cells = np.asarray(ub_cells, dtype=float).reshape(n, 2)
        self.ub_faces = np.asarray(ub_faces, dtype=float).reshape(grid.n_boundary_faces, 2)

        if grid.tagged:
            bf_un_eff = grid.bf_un_eff
        else:
            bf_un_eff = np.einsum("fd,fd->f", self.ub_faces, grid.bf_normal)

        # two-point Laplacian: interior transmissibilities + ghost closure diag
        t_int = grid.if_area / grid.if_dist
        t_bnd = grid.bf_area / grid.bf_half
        rows = np.concatenate([grid.if_p, grid.if_p, grid.if_n, grid.if_n, grid.bf_cell])
        cols = np.concatenate([grid.if_p, grid.if_n, grid.if_n, grid.if_p, grid.bf_cell])
        vals = np.concatenate([t_int, -t_int, t_int, -t_int, t_bnd])
        self.lap = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        self.lift = np.zeros((n, 2))
        np.add.at(self.lift, grid.bf_cell, t_bnd[:, None] * self.ub_faces)

        # face-averaged divergence, homogeneous boundary closure
        half = grid.if_area / (2.0 * grid.cell_area)
        dr = np.concatenate([grid.if_p, grid.if_p, grid.if_n, grid.if_n])
        dc_cell = np.concatenate([grid.if_p, grid.if_n, grid.if_p, grid.if_n])
        dc = dc_cell + np.concatenate([grid.if_axis] * 4) * n
        dv = np.concatenate([half, half, -half, -half])
        self.div_op = sp.coo_matrix((dv, (dr, dc)), shape=(n, 2 * n)).tocsr()
        self.div_lift = np.zeros(n)
        np.add.at(self.div_lift, grid.bf_cell, grid.bf_area * bf_un_eff / grid.cell_area)

        self.graddiv = (grid.cell_area * (self.div_op.T @ self.div_op)).tocsr()
        self.div_ub = self.div_op @ self.ub_cells.T.ravel() + self.div_lift

        self._t_int = t_int
        self._t_bnd = t_bnd

    @classmethod
    def from_expression(cls, grid: Grid, u_B) -> "ViscousOperator":
        cells = np.asarray(u_B(grid.cell_centers[:, 0], grid.cell_centers[:, 1]), dtype=float)
        faces = np.asarray(u_B(grid.bf_mid[:, 0], grid.bf_mid[:, 1]), dtype=float)
        return cls(grid, cells.reshape(grid.n_cells, 2), faces.reshape(grid.n_boundary_faces, 2))

    def scheme_divergence(self, u_cells: np.ndarray) -> np.ndarray:
        """Face-flux divergence of a full velocity (boundary part from data)."""
        u = np.asarray(u_cells, dtype=float).reshape(self.grid.n_cells, 2)
        return self.div_op @ u.T.ravel() + self.div_lift

    def pressure_force(self, p: np.ndarray) -> np.ndarray:
        """(n, 2) cell force sum_K |K| p_K div_K(phi); high pressure pushes out."""
        f = self.grid.cell_area * (self.div_op.T @ np.asarray(p, dtype=float))
        return f.reshape(2, self.grid.n_cells).T

    def a_sym(self, u_cells: np.ndarray, phys: PhysParams) -> float:
        """Symmetric dissipation form of a full velocity against the data.

        mu * [sum_int (A/d)|du|^2 + sum_bnd (A/half)|u_c - g|^2]
          + (mu+lam) * sum_K |K| (div_K u)^2.
        Nonnegative whenever lam >= -mu.
        """
        g = self.grid
        u = np.asarray(u_cells, dtype=float).reshape(g.n_cells, 2)
        du = u[g.if_n] - u[g.if_p]
        dbnd = u[g.bf_cell] - self.ub_faces
        grad2 = float(np.sum(self._t_int * np.einsum("fd,fd->f", du, du)))
        grad2 += float(np.sum(self._t_bnd * np.einsum("fd,fd->f", dbnd, dbnd)))
        div = self.scheme_divergence(u)
        return phys.mu * grad2 + (phys.mu + phys.lam) * g.cell_area * float(np.sum(div * div))

    def a_data(self, u_cells: np.ndarray, phys: PhysParams) -> float:
        """Same bilinear form paired with the boundary lift U_B."""
        g = self.grid
        u = np.asarray(u_cells, dtype=float).reshape(g.n_cells, 2)
        du = u[g.if_n] - u[g.if_p]
        dub = self.ub_cells[g.if_n] - self.ub_cells[g.if_p]
        dbnd = u[g.bf_cell] - self.ub_faces
        dbnd_ub = self.ub_cells[g.bf_cell] - self.ub_faces
        cross = float(np.sum(self._t_int * np.einsum("fd,fd->f", du, dub)))
        cross += float(np.sum(self._t_bnd * np.einsum("fd,fd->f", dbnd, dbnd_ub)))
        div = self.scheme_divergence(u)
        return phys.mu * cross + (phys.mu + phys.lam) * g.cell_area * float(np.sum(div * self.div_ub))


@dataclass
class MomentumStep:
    """Inputs of one velocity solve.

    rho_new, b_new come from the scalar step advanced with the current
    velocity iterate; F_int/F_bnd are that step's exact mass fluxes.
    pressure defaults to total_pressure(rho_new, b_new).
    """

    rho_new: np.ndarray
    rho_old: np.ndarray
    b_new: np.ndarray
    u_old: np.ndarray
    F_int: np.ndarray
    F_bnd: np.ndarray
    dt: float
    phys: PhysParams
    reg: RegParams
    source: np.ndarray | None = None
    pressure: np.ndarray | None = None


def solve_momentum(visc: ViscousOperator, step: MomentumStep):
    """Solve one implicit momentum step; returns (u_new, info).

    info carries the relative linear residual ("linear_residual") and the
    homogeneous unknown ("v_new") for budget assembly.
    """
    g = visc.grid
    n = g.n_cells
    dt = step.dt
    phys, reg = step.phys, step.reg

    rho_new = np.asarray(step.rho_new, dtype=float)
    rho_old = np.asarray(step.rho_old, dtype=float)
    u_old = np.asarray(step.u_old, dtype=float).reshape(n, 2)
    F_int = np.asarray(step.F_int, dtype=float)
    F_bnd = np.asarray(step.F_bnd, dtype=float)

    if step.pressure is None:
        pressure = total_pressure(rho_new, step.b_new, phys, reg)
    else:
        pressure = np.asarray(step.pressure, dtype=float)

    inflow = np.flatnonzero(F_bnd < 0.0)
    outflow = np.flatnonzero(F_bnd > 0.0)
    rows, cols, vals = kernels.convection_matrix_coo(
        F_int, g.if_p, g.if_n, g.bf_cell[outflow], F_bnd[outflow])
    conv = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    mass = sp.diags(g.cell_area * rho_new / dt)
    scalar_block = mass + conv + phys.mu * visc.lap
    pair = None
    if reg.eps > 0:
        q = (reg.eps * g.if_area / g.if_dist) * (rho_new[g.if_n] - rho_new[g.if_p])
        pr, pc, pv = kernels.pair_matrix_coo(q, g.if_p, g.if_n)
        pair = sp.coo_matrix((pv, (pr, pc)), shape=(n, n)).tocsr()
        scalar_block = scalar_block + pair

    system = sp.block_diag((scalar_block, scalar_block), format="csr")
    if phys.mu + phys.lam != 0.0:
        system = system + (phys.mu + phys.lam) * visc.graddiv

    # right-hand side: old momentum minus every operator applied to the lift
    ub = visc.ub_cells
    rhs = (g.cell_area / dt) * (rho_old[:, None] * u_old - rho_new[:, None] * ub)
    rhs -= conv @ ub
    if inflow.size:
        np.add.at(rhs, g.bf_cell[inflow],
                  -F_bnd[inflow, None] * visc.ub_faces[inflow])
    rhs -= phys.mu * (visc.lap @ ub - visc.lift)
    if pair is not None:
        rhs -= pair @ ub
    rhs += visc.pressure_force(pressure)
    if step.source is not None:
        rhs += g.cell_area * np.asarray(step.source, dtype=float).reshape(n, 2)

    rhs_stacked = rhs.T.ravel().copy()
    if phys.mu + phys.lam != 0.0:
        rhs_stacked -= (phys.mu + phys.lam) * g.cell_area * (
            visc.div_op.T @ visc.div_ub)

    w = spla.splu(system.tocsc()).solve(rhs_stacked)
    res = system @ w - rhs_stacked
    scale = max(float(np.abs(rhs_stacked).max(initial=0.0)), 1e-300)
    rel = float(np.abs(res).max(initial=0.0)) / scale
    if not np.isfinite(w).all() or rel > reg.tol_lin:
        raise StepFailure("momentum linear solve failed",
                          diagnostics={"relative_residual": rel, "dt": dt})

    v_new = w.reshape(2, n).T
    return v_new + ub, {"linear_residual": rel, "v_new": v_new}
