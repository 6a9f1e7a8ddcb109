"""Energy accounting and a-posteriori diagnostics.

The budget here mirrors, line by line, what the implicit step actually
does: every term is assembled from the same face fluxes and matrices the
solvers applied, so the step identity

    LHS - RHS = -(numerical dissipation) + pressure leak

holds to linear-solver round-off, where the numerical dissipation
collects the (nonnegative) time-jump and upwind Bregman terms and the
leak is the pressure-divergence mismatch of the final fixed-point
iterate, of the order of the iteration tolerance. The physical energy
inequality LHS <= RHS then holds with no calibration.

Weak residuals, the ratio map zeta = b/rho, the relative (modulated)
energy, and an exponential-envelope fit complete the verdict toolbox.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import boundary_trace, divergence, gradient, velocity_gradient
from .grid import Grid
from .momentum import PhysParams, RegParams, ViscousOperator, total_pressure, viscous_stress
from .transport import PhiFunction, TransportOperator, phi_half_square, phi_power


def pressure_potential(rho, b, phys: PhysParams, reg: RegParams) -> np.ndarray:
    """Potential whose conjugate is the total pressure.

    H(rho) + b^2/2 + delta*(rho+b)^beta/(beta-1) with H(z) = z^gamma/(gamma-1).
    """
    rho = np.asarray(rho, dtype=float)
    b = np.asarray(b, dtype=float)
    val = np.power(rho, phys.gamma) / (phys.gamma - 1.0) + 0.5 * b * b
    if reg.delta > 0:
        val = val + reg.delta * np.power(rho + b, reg.beta) / (reg.beta - 1.0)
    return val


def energy(grid: Grid, rho, b, u, ub_cells, phys: PhysParams, reg: RegParams) -> float:
    """Total energy: kinetic part relative to the boundary lift, plus potential."""
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(u, dtype=float).reshape(grid.n_cells, 2) - \
        np.asarray(ub_cells, dtype=float).reshape(grid.n_cells, 2)
    kin = 0.5 * rho * np.einsum("cd,cd->c", v, v)
    return grid.cell_area * float(np.sum(kin + pressure_potential(rho, b, phys, reg)))


def convexity_gap(a, r, gamma: float):
    """Bregman gap of z^gamma/(gamma-1) between a and the reference r; >= 0."""
    a = np.asarray(a, dtype=float)
    r = np.asarray(r, dtype=float)
    c = 1.0 / (gamma - 1.0)
    return c * (np.power(a, gamma) - np.power(r, gamma)) - \
        c * gamma * np.power(r, gamma - 1.0) * (a - r)


@dataclass
class EnergyReport:
    """One step of the energy ledger.

    All lines are integrated over the step (already multiplied by dt).
    `lhs` collects the new energy plus every dissipative and boundary
    outflow line; `rhs` collects the work of the boundary data. The
    defect `residual = lhs - rhs` equals leak - numerical_dissipation
    exactly, so residual <= tol certifies the energy inequality.
    """

    e_old: float
    e_new: float
    lhs: float
    rhs: float
    residual: float
    dissipation: float
    numerical_dissipation: float
    leak: float
    lines: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return max(abs(self.e_old), abs(self.e_new), self.dissipation, 1.0)

    def passed(self, tol: float) -> bool:
        return self.residual <= tol * self.scale

    def exactness_defect(self) -> float:
        """|residual + numerical_dissipation - leak|, should be round-off."""
        return abs(self.residual + self.numerical_dissipation - self.leak)


def energy_budget(visc: ViscousOperator, op: TransportOperator,
                  phys: PhysParams, reg: RegParams,
                  rho_old, b_old, u_old, rho_new, b_new, u_new, u_guess,
                  rho_B, b_B, pressure, dt: float,
                  mom_source=None) -> EnergyReport:
    """Exact discrete energy budget of one committed step.

    `op` must be the transport operator actually used (built at u_guess),
    and `pressure` the total pressure fed to the momentum solve.
    """
    g = visc.grid
    n = g.n_cells
    rho_old = np.asarray(rho_old, dtype=float)
    rho_new = np.asarray(rho_new, dtype=float)
    b_old = np.asarray(b_old, dtype=float)
    b_new = np.asarray(b_new, dtype=float)
    u_old = np.asarray(u_old, dtype=float).reshape(n, 2)
    u_new = np.asarray(u_new, dtype=float).reshape(n, 2)
    u_guess = np.asarray(u_guess, dtype=float).reshape(n, 2)
    ub = visc.ub_cells
    v_old = u_old - ub
    v_new = u_new - ub

    e_old = energy(g, rho_old, b_old, u_old, ub, phys, reg)
    e_new = energy(g, rho_new, b_new, u_new, ub, phys, reg)

    parts = [op.entropy_lines(rho_old, rho_new, rho_B, phi_power(phys.gamma)),
             op.entropy_lines(b_old, b_new, b_B, phi_half_square())]
    if reg.delta > 0:
        parts.append(op.entropy_lines(
            rho_old + b_old, rho_new + b_new,
            np.asarray(rho_B, dtype=float) + np.asarray(b_B, dtype=float),
            phi_power(reg.beta, scale=reg.delta)))

    def tot(key):
        return sum(p[key] for p in parts)

    F_int, F_bnd = op.fluxes(rho_new, rho_B)
    inflow = np.flatnonzero(F_bnd < 0.0)
    outflow = np.flatnonzero(F_bnd > 0.0)

    dv = v_new[g.if_n] - v_new[g.if_p]
    kin_jump = float(np.sum(0.5 * np.abs(F_int) * np.einsum("fd,fd->f", dv, dv)))
    vc_out = v_new[g.bf_cell[outflow]]
    kin_jump += float(np.sum(0.5 * F_bnd[outflow] * np.einsum("fd,fd->f", vc_out, vc_out)))
    vc_in = v_new[g.bf_cell[inflow]]
    kin_jump += float(np.sum(0.5 * (-F_bnd[inflow]) * np.einsum("fd,fd->f", vc_in, vc_in)))

    # F >= 0: upwind = P, only the N row sees (U_P - U_N); F < 0: only the P row
    conv_shift = float(np.sum(np.where(
        F_int >= 0.0,
        -F_int * np.einsum("fd,fd->f", ub[g.if_p] - ub[g.if_n], v_new[g.if_n]),
        F_int * np.einsum("fd,fd->f", ub[g.if_n] - ub[g.if_p], v_new[g.if_p]))))
    if inflow.size:
        gin = visc.ub_faces[inflow]
        conv_shift += float(np.sum(F_bnd[inflow] * np.einsum(
            "fd,fd->f", gin - ub[g.bf_cell[inflow]], v_new[g.bf_cell[inflow]])))

    tb_kin = 0.5 * g.cell_area * float(
        np.sum(rho_old * np.einsum("cd,cd->c", v_new - v_old, v_new - v_old)))

    dissipation = dt * visc.a_sym(u_new, phys)
    forcing = dt * visc.a_data(u_new, phys)

    cross_pair = 0.0
    if reg.eps > 0:
        q = (reg.eps * g.if_area / g.if_dist) * (rho_new[g.if_n] - rho_new[g.if_p])
        du = u_new[g.if_n] - u_new[g.if_p]
        vbar = 0.5 * (v_new[g.if_p] + v_new[g.if_n])
        cross_pair = dt * float(np.sum(q * np.einsum("fd,fd->f", du, vbar)))

    pressure = np.asarray(pressure, dtype=float)
    press_divub = dt * g.cell_area * float(np.sum(pressure * visc.div_ub))
    dvg = (v_new - (u_guess - ub)).T.ravel()
    leak = dt * g.cell_area * float(np.sum(pressure * (visc.div_op @ dvg)))

    source_work = 0.0
    if mom_source is not None:
        source_work = dt * g.cell_area * float(np.sum(
            np.asarray(mom_source, dtype=float).reshape(n, 2) * v_new))

    lines = {
        "energy_old": e_old,
        "energy_new": e_new,
        "dissipation": dissipation,
        "diffusion": dt * tot("diffusion_dissipation"),
        "inflow_gap": dt * tot("inflow_gap"),
        "outflow_flux": dt * tot("outflow_flux"),
        "cross_pair": cross_pair,
        "convection_shift": dt * conv_shift,
        "forcing": forcing,
        "pressure_boundary_work": -press_divub,
        "inflow_data": -dt * tot("inflow_data"),
        "source_work": source_work,
        "leak": leak,
        "time_jump_kinetic": tb_kin,
        "time_jump_potential": tot("time_bregman"),
        "upwind_kinetic": dt * kin_jump,
        "upwind_potential": dt * tot("upwind_dissipation"),
        "transport_solve_defect": tot("residual"),
    }

    lhs = (e_new - e_old + lines["dissipation"] + lines["diffusion"]
           + lines["inflow_gap"] + lines["outflow_flux"]
           + lines["cross_pair"] + lines["convection_shift"])
    rhs = (lines["forcing"] + lines["pressure_boundary_work"]
           + lines["inflow_data"] + lines["source_work"])
    numdiss = (tb_kin + lines["time_jump_potential"]
               + lines["upwind_kinetic"] + lines["upwind_potential"])

    return EnergyReport(
        e_old=e_old, e_new=e_new, lhs=lhs, rhs=rhs, residual=lhs - rhs,
        dissipation=dissipation, numerical_dissipation=numdiss, leak=leak,
        lines=lines)


def weak_residual_scalar(grid: Grid, times, c_states, u_states, c_B,
                         eps: float, phi, grad_phi) -> float:
    """Weak-form residual of a transported scalar against a C^1 test function.

    phi(x, y) -> float array, grad_phi(x, y) -> (..., 2). Cell-centered
    quadrature, adjacent-cell boundary traces, implicit-endpoint time rule.
    """
    times = np.asarray(times, dtype=float)
    xc, yc = grid.cell_centers[:, 0], grid.cell_centers[:, 1]
    phi_c = np.asarray(phi(xc, yc), dtype=float) * np.ones(grid.n_cells)
    gphi_c = np.asarray(grad_phi(xc, yc), dtype=float) * np.ones((grid.n_cells, 2))
    phi_f = np.asarray(phi(grid.bf_mid[:, 0], grid.bf_mid[:, 1]), dtype=float) \
        * np.ones(grid.n_boundary_faces)

    inflow = grid.inflow_faces
    outflow = grid.outflow_faces
    cb = np.asarray(c_B, dtype=float).reshape(grid.n_boundary_faces)

    total = 0.0
    for k in range(1, len(times)):
        dt = float(times[k] - times[k - 1])
        c_prev = np.asarray(c_states[k - 1], dtype=float)
        c = np.asarray(c_states[k], dtype=float)
        u = np.asarray(u_states[k], dtype=float).reshape(grid.n_cells, 2)
        total += grid.cell_area * float(np.sum((c - c_prev) * phi_c))
        total -= dt * grid.cell_area * float(
            np.sum(c * np.einsum("cd,cd->c", u, gphi_c)))
        if eps > 0:
            gc = gradient(grid, c)
            total += dt * eps * grid.cell_area * float(
                np.sum(np.einsum("cd,cd->c", gc, gphi_c)))
        tr = boundary_trace(grid, c)
        coef = grid.bf_area * grid.bf_un_eff
        total += dt * float(np.sum(coef[outflow] * phi_f[outflow] * tr[outflow]))
        total += dt * float(np.sum(coef[inflow] * phi_f[inflow] * cb[inflow]))
    return total


def weak_residual_momentum(grid: Grid, times, rho_states, b_states, u_states,
                           phys: PhysParams, reg: RegParams, phi, grad_phi) -> float:
    """Weak-form momentum residual against a compactly supported vector test.

    Rejects test functions that fail to vanish on the boundary (checked at
    face midpoints). Centered quadratures throughout; no boundary terms.
    """
    phi_f = np.asarray(phi(grid.bf_mid[:, 0], grid.bf_mid[:, 1]), dtype=float)
    xc, yc = grid.cell_centers[:, 0], grid.cell_centers[:, 1]
    phi_c = np.asarray(phi(xc, yc), dtype=float).reshape(grid.n_cells, 2)
    scale = max(float(np.abs(phi_c).max()), 1e-300)
    if float(np.abs(phi_f).max(initial=0.0)) > 1e-10 * scale:
        raise ValueError("test function must vanish on the boundary")
    gphi_c = np.asarray(grad_phi(xc, yc), dtype=float).reshape(grid.n_cells, 2, 2)
    div_phi = gphi_c[:, 0, 0] + gphi_c[:, 1, 1]

    times = np.asarray(times, dtype=float)
    area = grid.cell_area
    total = 0.0
    for k in range(1, len(times)):
        dt = float(times[k] - times[k - 1])
        rho_p = np.asarray(rho_states[k - 1], dtype=float)
        rho = np.asarray(rho_states[k], dtype=float)
        b = np.asarray(b_states[k], dtype=float)
        u_p = np.asarray(u_states[k - 1], dtype=float).reshape(grid.n_cells, 2)
        u = np.asarray(u_states[k], dtype=float).reshape(grid.n_cells, 2)

        total += area * float(np.sum(
            (rho[:, None] * u - rho_p[:, None] * u_p) * phi_c))
        flux = rho[:, None, None] * u[:, :, None] * u[:, None, :]
        total -= dt * area * float(np.sum(flux * gphi_c))
        total -= dt * area * float(np.sum(
            total_pressure(rho, b, phys, reg) * div_phi))
        S = viscous_stress(grid, u, phys)
        total += dt * area * float(np.sum(S * gphi_c))
        if reg.eps > 0:
            gr = gradient(grid, rho)
            G = velocity_gradient(grid, u)
            conv = np.einsum("cj,cij->ci", gr, G)
            total += dt * reg.eps * area * float(np.sum(conv * phi_c))
    return total


def zeta(rho, b, c_star: float, c_star_upper: float, vacuum_tol: float = 0.0):
    """Amplitude ratio b/rho, pinned to the admissible midpoint on vacuum."""
    rho = np.asarray(rho, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (c_star + c_star_upper)
    out = np.full_like(rho, mid)
    np.divide(b, rho, out=out, where=rho > vacuum_tol)
    return out


def zeta_gap(grid: Grid, rho, b, zeta_ref, c_star: float, c_star_upper: float,
             vacuum_tol: float = 0.0) -> float:
    """Density-weighted squared distance of b/rho from a reference ratio."""
    z = zeta(rho, b, c_star, c_star_upper, vacuum_tol)
    dev = z - np.asarray(zeta_ref, dtype=float)
    return grid.cell_area * float(np.sum(np.asarray(rho, dtype=float) * dev * dev))


def zeta_gap_outflow(grid: Grid, rho, b, zeta_ref, c_star: float,
                     c_star_upper: float, vacuum_tol: float = 0.0) -> float:
    """Outflow-flux-weighted squared ratio deviation (trace values)."""
    out = grid.outflow_faces
    if out.size == 0:
        return 0.0
    tr_r = boundary_trace(grid, np.asarray(rho, dtype=float))[out]
    tr_b = boundary_trace(grid, np.asarray(b, dtype=float))[out]
    z = zeta(tr_r, tr_b, c_star, c_star_upper, vacuum_tol)
    dev = z - np.asarray(zeta_ref, dtype=float) * np.ones_like(z)
    w = grid.bf_area[out] * grid.bf_un_eff[out]
    return float(np.sum(w * tr_r * dev * dev))


@dataclass
class RelativeEnergyReport:
    """Three-part modulated energy distance between two states."""

    kinetic_gap: float
    pressure_gap: float
    magnetic_gap: float

    @property
    def value(self) -> float:
        return self.kinetic_gap + self.pressure_gap + self.magnetic_gap


def relative_energy(grid: Grid, rho1, u1, b1, rho2, u2, b2,
                    gamma: float) -> RelativeEnergyReport:
    """E(state1 | state2): kinetic + compressive Bregman + magnetic gaps.

    The kinetic gap is weighted by the first state's density, so it stays
    finite and meaningful on vacuum regions of state 1.
    """
    rho1 = np.asarray(rho1, dtype=float)
    du = np.asarray(u1, dtype=float).reshape(grid.n_cells, 2) \
        - np.asarray(u2, dtype=float).reshape(grid.n_cells, 2)
    kin = 0.5 * grid.cell_area * float(
        np.sum(rho1 * np.einsum("cd,cd->c", du, du)))
    press = grid.cell_area * float(np.sum(convexity_gap(rho1, rho2, gamma)))
    db = np.asarray(b1, dtype=float) - np.asarray(b2, dtype=float)
    mag = 0.5 * grid.cell_area * float(np.sum(db * db))
    return RelativeEnergyReport(kinetic_gap=kin, pressure_gap=press, magnetic_gap=mag)


@dataclass
class GronwallFit:
    """Exponential envelope E(t) <= (E(0) + slack) * exp(rate * t)."""

    rate: float
    initial: float
    slack: float
    ok: bool
    worst_excess: float


def gronwall_fit(times, values, slack: float = 0.0) -> GronwallFit:
    """Least-squares exponential rate and envelope verdict for a series.

    The rate minimizes sum_k (log E_k - log E_0 - C t_k)^2 over C on the
    floored series; the verdict then checks the envelope pointwise.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape or times.size == 0:
        raise ValueError("times and values must be equal-length, nonempty")
    t0 = times - times[0]
    floor = 1e-300 + 1e-16 * float(values.max(initial=0.0))
    logs = np.log(np.maximum(values, floor))
    denom = float(np.sum(t0 * t0))
    rate = 0.0 if denom == 0.0 else float(np.sum(t0 * (logs - logs[0])) / denom)

    e0 = float(values[0])
    bound = (e0 + slack) * np.exp(rate * t0)
    tol = 1e-9 * max(abs(e0) + slack, float(np.abs(values).max()), 1.0)
    excess = float(np.max(values - bound))
    return GronwallFit(rate=rate, initial=e0, slack=slack,
                       ok=bool(excess <= tol), worst_excess=excess)
