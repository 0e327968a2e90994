"""Estimation of nonlinear panel models with individual fixed effects and
simulation-based correction of the incidental-parameter bias."""

from .families import DomainError, Family, get_family
from .fe import (
    FEFit,
    FitError,
    FitOptions,
    FitTrace,
    SeparationError,
    SingularHessianError,
    concentrate_alpha,
    fit_fe,
    profiled_loglik,
)
from .indirect import (
    IndirectFit,
    SolverOptions,
    average_simulated_estimate,
    inflated_standard_errors,
    simulate_outcomes,
    simulate_panel,
    solve_indirect,
)
from .jackknife import JackknifeFit, half_panel, leave_one_out
from .montecarlo import (
    CalibratedTruth,
    Design,
    MCResult,
    MethodSummary,
    calibrate,
    calibrated_design,
    coverage_interval,
    generate_varying_t,
    result_rows,
    run_design,
    simulate_observed,
)
from .neymanscott import (
    VarianceDesign,
    VarianceExperiment,
    indirect_variance,
    run_variance_experiment,
    within_variance,
)
from .panel import (
    PanelData,
    PanelDataError,
    PanelSchema,
    build_panel,
    load_panel,
    save_panel,
    with_outcomes,
)
from .shocks import ShockStore, draw_shocks, replication_rng, replication_seed

__version__ = "0.1.0"

__all__ = [
    "CalibratedTruth",
    "Design",
    "DomainError",
    "FEFit",
    "Family",
    "FitError",
    "FitOptions",
    "FitTrace",
    "IndirectFit",
    "JackknifeFit",
    "MCResult",
    "MethodSummary",
    "PanelData",
    "PanelDataError",
    "PanelSchema",
    "SeparationError",
    "ShockStore",
    "SingularHessianError",
    "SolverOptions",
    "VarianceDesign",
    "VarianceExperiment",
    "average_simulated_estimate",
    "build_panel",
    "calibrate",
    "calibrated_design",
    "concentrate_alpha",
    "coverage_interval",
    "draw_shocks",
    "fit_fe",
    "generate_varying_t",
    "get_family",
    "half_panel",
    "indirect_variance",
    "inflated_standard_errors",
    "leave_one_out",
    "load_panel",
    "profiled_loglik",
    "replication_rng",
    "replication_seed",
    "result_rows",
    "run_design",
    "run_variance_experiment",
    "save_panel",
    "simulate_observed",
    "simulate_outcomes",
    "simulate_panel",
    "solve_indirect",
    "with_outcomes",
    "within_variance",
    "__version__",
]
