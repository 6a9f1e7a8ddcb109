"""Coupled time stepper: transport + momentum through a fixed-point loop.

Each step freezes the velocity, advances density and magnetic amplitude
implicitly with that velocity (one factorization, two solves), forms the
total pressure, and solves the implicit momentum system driven by the
exact mass fluxes of the scalar step. The loop repeats with the new
velocity until successive iterates agree to picard_tol; the committed
step then satisfies the discrete energy budget identically, whatever the
iteration count, because every budget term is assembled from the same
frozen-velocity operators.

Steps that fail (stalled iteration, solver breakdown, negative values)
are retried with a halved dt a bounded number of times before the run
aborts with the failure attached.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import EnergyReport, energy, energy_budget
from .errors import SolverFailure, StepFailure
from .fields import ScalarField, VectorField, boundary_scalar
from .grid import Grid, classify_boundary
from .momentum import (CheckTolerances, MomentumStep, PhysParams, RegParams,
                       ViscousOperator, solve_momentum, total_pressure)
from .transport import (DominationReport, TransportOperator, domination_check,
                        mollify)


@dataclass
class State:
    """Cell-averaged unknowns at one time."""

    time: float
    rho: ScalarField
    b: ScalarField
    u: VectorField

    def copy(self) -> "State":
        return State(self.time, self.rho.copy(), self.b.copy(), self.u.copy())


@dataclass
class StepReport:
    """Everything recorded about one committed step."""

    time: float
    dt: float
    picard_iters: int
    picard_gap: float
    energy: EnergyReport
    mass_rho_defect: float
    mass_b_defect: float
    min_rho: float
    max_rho: float
    min_b: float
    max_b: float
    divu_norm: float
    linear_residual: float
    domination: DominationReport | None = None


@dataclass
class Trajectory:
    """Stored states (every out_every steps plus endpoints) and all reports."""

    grid: Grid
    times: list[float] = field(default_factory=list)
    states: list[State] = field(default_factory=list)
    reports: list[StepReport] = field(default_factory=list)

    @property
    def final(self) -> State:
        return self.states[-1]

    def state_arrays(self, name: str) -> list[np.ndarray]:
        if name == "u":
            return [s.u.values for s in self.states]
        return [getattr(s, name).values for s in self.states]


class SimulationProblem:
    """Grid, boundary data, and parameters bound together for a run.

    The grid is tagged here if it is not already; the viscous structure
    and the boundary-face data arrays are precomputed once. c_star and
    c_star_upper enable the per-step domination report when given.
    """

    def __init__(self, grid: Grid, u_B, rho_B, b_B, phys: PhysParams,
                 reg: RegParams, tols: CheckTolerances | None = None,
                 c_star: float | None = None, c_star_upper: float | None = None):
        if not grid.tagged:
            grid = classify_boundary(grid, u_B)
        self.grid = grid
        self.u_B = u_B
        self.phys = phys
        self.reg = reg
        self.tols = tols or CheckTolerances()
        self.c_star = c_star
        self.c_star_upper = c_star_upper
        self.visc = ViscousOperator.from_expression(grid, u_B)
        self.rho_B = boundary_scalar(grid, rho_B)
        self.b_B = boundary_scalar(grid, b_B)

    def initial_state(self, rho0, b0, u0, time: float = 0.0) -> State:
        """Assemble (and, when eps_init > 0, smooth) the initial state."""
        g = self.grid
        rho = rho0.values if isinstance(rho0, ScalarField) else \
            np.asarray(rho0(g.cell_centers[:, 0], g.cell_centers[:, 1]), dtype=float)
        b = b0.values if isinstance(b0, ScalarField) else \
            np.asarray(b0(g.cell_centers[:, 0], g.cell_centers[:, 1]), dtype=float)
        if isinstance(u0, VectorField):
            u = u0.values
        else:
            u = np.asarray(u0(g.cell_centers[:, 0], g.cell_centers[:, 1]), dtype=float)
        rho = rho * np.ones(g.n_cells)
        b = b * np.ones(g.n_cells)
        u = (u * np.ones((g.n_cells, 2))).reshape(g.n_cells, 2)
        if self.reg.eps_init > 0:
            rho = mollify(g, rho, self.reg.eps_init)
            b = mollify(g, b, self.reg.eps_init)
            u = np.column_stack([mollify(g, u[:, 0], self.reg.eps_init),
                                 mollify(g, u[:, 1], self.reg.eps_init)])
        return State(time, ScalarField(g, rho), ScalarField(g, b), VectorField(g, u))

    def energy_of(self, state: State) -> float:
        return energy(self.grid, state.rho.values, state.b.values,
                      state.u.values, self.visc.ub_cells, self.phys, self.reg)


def _advance_scalars(problem: SimulationProblem, state: State, u_guess, dt):
    """Transport rho and b with the frozen velocity; validity checks inline."""
    reg = problem.reg
    op = TransportOperator.from_velocity(problem.grid, u_guess, reg.eps, dt)
    out = []
    for c_old, c_B, label in ((state.rho.values, problem.rho_B, "rho"),
                              (state.b.values, problem.b_B, "b")):
        c_new = op.advance(c_old, c_B)
        rel = op.residual(c_old, c_new, c_B)
        if not np.isfinite(c_new).all() or rel > reg.tol_lin:
            raise StepFailure(f"transport solve for {label} failed",
                              diagnostics={"relative_residual": rel, "dt": dt})
        scale = max(float(np.abs(c_new).max(initial=0.0)), 1.0)
        if float(c_new.min(initial=0.0)) < -problem.tols.tol_neg * scale:
            raise StepFailure(f"{label} went negative",
                              diagnostics={"min": float(c_new.min()), "dt": dt})
        out.append(c_new)
    return op, out[0], out[1]


def fixed_point_map(problem: SimulationProblem, state: State, u_guess, dt: float):
    """One application of the frozen-velocity map.

    Returns (rho_new, b_new, u_new, op, pressure, minfo); `op` is the
    transport operator of this application and carries its exact fluxes.
    """
    if not np.isfinite(u_guess).all():
        raise StepFailure("velocity iterate is not finite", diagnostics={"dt": dt})
    try:
        op, rho_new, b_new = _advance_scalars(problem, state, u_guess, dt)
        pressure = total_pressure(rho_new, b_new, problem.phys, problem.reg)
        F_int, F_bnd = op.fluxes(rho_new, problem.rho_B)
        step = MomentumStep(
            rho_new=rho_new, rho_old=state.rho.values, b_new=b_new,
            u_old=state.u.values, F_int=F_int, F_bnd=F_bnd, dt=dt,
            phys=problem.phys, reg=problem.reg, pressure=pressure)
        u_new, minfo = solve_momentum(problem.visc, step)
    except StepFailure:
        raise
    except (RuntimeError, FloatingPointError, ValueError) as exc:
        # a singular or overflowed factorization is a step fault, not a bug
        raise StepFailure(f"linear solve broke down: {exc}",
                          diagnostics={"dt": dt}) from exc
    return rho_new, b_new, u_new, op, pressure, minfo


def advance_timestep(problem: SimulationProblem, state: State, dt: float):
    """Advance one step of size dt; returns (new_state, StepReport).

    Raises StepFailure if the fixed-point iteration does not close within
    picard_max sweeps (the caller may halve dt and retry).
    """
    reg = problem.reg
    u_guess = state.u.values.copy()
    gap = np.inf
    for it in range(1, reg.picard_max + 1):
        rho_new, b_new, u_new, op, pressure, minfo = fixed_point_map(
            problem, state, u_guess, dt)
        gap = float(np.abs(u_new - u_guess).max())
        if gap <= reg.picard_tol * (1.0 + float(np.abs(u_guess).max())):
            break
        u_guess = u_new
    else:
        raise StepFailure("velocity iteration stalled",
                          diagnostics={"iterations": reg.picard_max,
                                       "gap": gap, "dt": dt})

    budget = energy_budget(
        problem.visc, op, problem.phys, problem.reg,
        state.rho.values, state.b.values, state.u.values,
        rho_new, b_new, u_new, u_guess,
        problem.rho_B, problem.b_B, pressure, dt)

    g = problem.grid
    new_state = State(state.time + dt, ScalarField(g, rho_new),
                      ScalarField(g, b_new), VectorField(g, u_new))
    dom = None
    if problem.c_star is not None and problem.c_star_upper is not None:
        dom = domination_check(new_state.rho, new_state.b,
                               problem.c_star, problem.c_star_upper)
    report = StepReport(
        time=new_state.time, dt=dt, picard_iters=it, picard_gap=gap,
        energy=budget,
        mass_rho_defect=op.mass_ledger(state.rho.values, rho_new, problem.rho_B),
        mass_b_defect=op.mass_ledger(state.b.values, b_new, problem.b_B),
        min_rho=float(rho_new.min()), max_rho=float(rho_new.max()),
        min_b=float(b_new.min()), max_b=float(b_new.max()),
        divu_norm=float(np.abs(op.divu).max()),
        linear_residual=minfo["linear_residual"],
        domination=dom)
    return new_state, report


def run_simulation(problem: SimulationProblem, state0: State, T: float,
                   dt: float, out_every: int = 1,
                   max_halvings: int = 6) -> Trajectory:
    """March from state0 to time state0.time + T; collect states and reports."""
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    if out_every < 1:
        raise ValueError("out_every must be at least 1")

    t_end = state0.time + T
    traj = Trajectory(grid=problem.grid)
    traj.times.append(state0.time)
    traj.states.append(state0.copy())

    state = state0
    k = 0
    eps_t = 1e-12 * max(1.0, abs(t_end))
    while state.time < t_end - eps_t:
        dt_step = min(dt, t_end - state.time)
        halvings = 0
        while True:
            try:
                state, report = advance_timestep(problem, state, dt_step)
                break
            except StepFailure as exc:
                halvings += 1
                if halvings > max_halvings:
                    raise SolverFailure(
                        f"step at t={state.time:.6g} failed after "
                        f"{max_halvings} halvings: {exc}",
                        time=state.time, cause=exc) from exc
                dt_step *= 0.5
        k += 1
        traj.reports.append(report)
        if k % out_every == 0 or state.time >= t_end - eps_t:
            traj.times.append(state.time)
            traj.states.append(state.copy())
    return traj


def continuation(problems, state0: State, T: float, dt: float,
                 out_every: int = 1, max_halvings: int = 6) -> list[Trajectory]:
    """Run a parameter ladder over one shared time window and initial state.

    All problems must share the grid. Typical use: a descending sequence
    of regularization strengths, whose trajectories are then compared
    pairwise at matching times.
    """
    problems = list(problems)
    if not problems:
        raise ValueError("need at least one problem")
    for p in problems[1:]:
        if p.grid.nx != problems[0].grid.nx or p.grid.ny != problems[0].grid.ny:
            raise ValueError("continuation problems must share the grid")
    return [run_simulation(p, state0, T, dt, out_every=out_every,
                           max_halvings=max_halvings) for p in problems]
