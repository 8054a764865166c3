"""Robust domains of attraction and Lyapunov value functions on grids."""

from .expressions import EvalDomainError, ExprError, ParseError, evaluate, parse
from .oracle import (
    BudgetError,
    Counterexample,
    SynthesisError,
    ValueBounds,
    falsify_quasistability,
    kruzhkov_value,
    maximal_cost,
    min_value,
    synthesize_epsilon_optimal,
)
from .regions import (
    DoaMask,
    contour2d,
    extract_doa,
    load_mask,
    region_distance,
    save_contours,
    save_mask,
)
from .solver import (
    SolverSettings,
    interpolate,
    inverse_transform,
    kruzhkov_transform,
    solve_hjbe,
    solve_zubov,
)
from .systems import (
    ConfigError,
    ControlSpace,
    Grid,
    Growth,
    OutsideDomainError,
    SystemDef,
    Ules,
    ValidationError,
    ValueField,
    builtin,
    closed_form_value,
    load_field,
    load_system,
    save_field,
)
from .trajectories import (
    ControlSchedule,
    RelaxedSchedule,
    TrajectoryError,
    TrajectoryRecord,
    chatter,
    integrate,
    save_trajectory,
)
from .verify import (
    VerificationReport,
    check_boundary_blowup,
    check_lyapunov_decrease,
    lipschitz_probe,
    residual_stats,
    sandwich_check,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "ConfigError",
    "ControlSchedule",
    "ControlSpace",
    "Counterexample",
    "DoaMask",
    "EvalDomainError",
    "ExprError",
    "Grid",
    "Growth",
    "OutsideDomainError",
    "ParseError",
    "RelaxedSchedule",
    "SolverSettings",
    "SynthesisError",
    "SystemDef",
    "TrajectoryError",
    "TrajectoryRecord",
    "Ules",
    "ValidationError",
    "ValueBounds",
    "ValueField",
    "VerificationReport",
    "builtin",
    "chatter",
    "check_boundary_blowup",
    "check_lyapunov_decrease",
    "closed_form_value",
    "contour2d",
    "evaluate",
    "extract_doa",
    "falsify_quasistability",
    "integrate",
    "interpolate",
    "inverse_transform",
    "kruzhkov_transform",
    "kruzhkov_value",
    "lipschitz_probe",
    "load_field",
    "load_mask",
    "load_system",
    "maximal_cost",
    "min_value",
    "parse",
    "region_distance",
    "residual_stats",
    "sandwich_check",
    "save_contours",
    "save_field",
    "save_mask",
    "save_trajectory",
    "solve_hjbe",
    "solve_zubov",
    "synthesize_epsilon_optimal",
    "__version__",
]
