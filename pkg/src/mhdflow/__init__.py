"""Viscous compressible flow with a transported magnetic amplitude.

Finite-volume solver on rectangular inflow-outflow domains: implicit
upwind transport for density and magnetic amplitude, an implicit
velocity-lift momentum step, and a frozen-velocity fixed-point coupling.
Every structural estimate of the scheme (min/max bounds, two-sided
domination, mass ledgers, the per-step energy budget, renormalized
identities, relative-energy stability) is exposed as a checkable report.
"""

from .config import Config, load_config
from .diagnostics import (EnergyReport, GronwallFit, RelativeEnergyReport,
                          convexity_gap, energy, energy_budget, gronwall_fit,
                          relative_energy, weak_residual_momentum,
                          weak_residual_scalar, zeta, zeta_gap)
from .errors import ConfigError, SolverFailure, StepFailure
from .expressions import parse_scalar, parse_vector
from .fields import ScalarField, VectorField
from .grid import Grid, build_grid, classify_boundary, refine
from .io import (load_checkpoint, read_fields, save_checkpoint,
                 save_trajectory, write_fields)
from .momentum import (CheckTolerances, MomentumStep, PhysParams, RegParams,
                       ViscousOperator, solve_momentum, total_pressure,
                       viscous_stress)
from .solver import (SimulationProblem, State, StepReport, Trajectory,
                     advance_timestep, continuation, fixed_point_map,
                     run_simulation)
from .transport import (DominationReport, MaxPrincipleReport, PhiFunction,
                        TransportOperator, TransportProblem, advance_scalar,
                        check_max_principle, domination_check,
                        face_normal_velocity, mollify, phi_half_square,
                        phi_linear, phi_power, phi_square,
                        renormalized_residual, scheme_divergence_of)

__version__ = "0.1.0"

__all__ = [
    "Config", "load_config",
    "EnergyReport", "GronwallFit", "RelativeEnergyReport",
    "convexity_gap", "energy", "energy_budget", "gronwall_fit",
    "relative_energy", "weak_residual_momentum", "weak_residual_scalar",
    "zeta", "zeta_gap",
    "ConfigError", "SolverFailure", "StepFailure",
    "parse_scalar", "parse_vector",
    "ScalarField", "VectorField",
    "Grid", "build_grid", "classify_boundary", "refine",
    "load_checkpoint", "read_fields", "save_checkpoint", "save_trajectory",
    "write_fields",
    "CheckTolerances", "MomentumStep", "PhysParams", "RegParams",
    "ViscousOperator", "solve_momentum", "total_pressure", "viscous_stress",
    "SimulationProblem", "State", "StepReport", "Trajectory",
    "advance_timestep", "continuation", "fixed_point_map", "run_simulation",
    "DominationReport", "MaxPrincipleReport", "PhiFunction",
    "TransportOperator", "TransportProblem", "advance_scalar",
    "check_max_principle", "domination_check", "face_normal_velocity",
    "mollify", "phi_half_square", "phi_linear", "phi_power", "phi_square",
    "renormalized_residual", "scheme_divergence_of",
    "__version__",
]
