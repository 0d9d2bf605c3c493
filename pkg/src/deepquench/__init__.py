"""Optimal control of Allen-Cahn systems with dynamic boundary conditions in the deep-quench limit."""

from .adjoint import AdjointPair, CostData, LambdaPair, compute_lambda, solve_adjoint
from .config import RunConfig, validate_config
from .errors import DomainError, GridError, NumericError, SolverError, ValidationError
from .fields import ControlBounds, ControlPair, InitialData, StatePair, Trajectory, control_inner, control_norm
from .grid import StripGrid, TimeGrid
from .optimize import (
    OptimizationResult,
    OptimizerOptions,
    evaluate_adapted_cost,
    evaluate_cost,
    optimize_P_alpha,
    project_control,
    reduced_gradient,
    vi_residual,
)
from .potentials import PotentialSet, QuenchConfig
from .quench import (
    QuenchPath,
    QuenchSchedule,
    check_complementarity,
    check_concentration,
    check_projection_formula,
    monitor_xi_convergence,
    run_continuation,
)
from .sensitivity import LinearizedPair, solve_linearized
from .state import (
    SolverOptions,
    StateModel,
    energy_diagnostics,
    solve_state_alpha,
    solve_state_obstacle,
    truncate_initial_data,
    weak_form_residual,
)

__version__ = "0.1.0"
