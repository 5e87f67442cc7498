"""Randomized time-step Runge-Kutta integration and experiment toolkit.

The package couples explicit and geometric Runge-Kutta steppers with
randomized step-size draws, an additive-noise reference scheme, ensemble
Monte Carlo drivers, convergence-order studies, and Bayesian inversion
over ODE initial conditions.  The ``rtsrk`` console script exposes the
experiment runners; this namespace re-exports the library API.
"""

from .problems import (
    FD_JACOBIAN_STEP,
    PROBLEM_NAMES,
    FirstIntegral,
    HamiltonianStructure,
    OdeSystem,
    eval_energy,
    eval_integral,
    fd_jacobian,
    make_problem,
)
from .steppers import (
    STEPPER_NAMES,
    TABLEAUS,
    ButcherTableau,
    ChebyshevRkc,
    ExplicitRungeKutta,
    ImplicitMidpoint,
    NewtonConfig,
    NonConvergenceError,
    StormerVerlet,
    make_stepper,
    spectral_radius,
    step_embedded_euler_heun,
)
from .randsteps import (
    DIST_NAMES,
    RngStream,
    StepDistribution,
    ValidationReport,
    analytic_moments,
    derive_seed,
    validate_assumption1,
)
from .integrate import (
    SCHEME_NAMES,
    DivergenceError,
    Trajectory,
    integrate_additive_noise,
    integrate_deterministic,
    integrate_rts_rk,
    run_batch,
)
from .ensembles import (
    Ensemble,
    estimator_mse,
    mc_functional,
    ms_error,
    run_ensemble,
    std_indicator,
    weak_error,
)
from .analysis import (
    ConvergenceStudy,
    EstimatorComparison,
    MseStudy,
    SeriesReport,
    error_estimator_comparison,
    fit_order,
    hamiltonian_error_longtime,
    integral_drift,
    log_sample_indices,
    plateau_level,
    reference_solution,
    split_slopes,
    study_estimator_mse,
    study_mean_square,
    study_weak,
)
from .bayes import (
    Chain,
    GaussianPrior,
    InverseProblem,
    LimitLaw,
    PosteriorDensity,
    build_henon_heiles_inverse_problem,
    build_linear_inverse_problem,
    forward,
    hellinger,
    linear_analytic_posterior,
    linear_limit_sigma_zero,
    pmmh,
    potential,
    rwmh,
)

__version__ = "0.1.0"

__all__ = [
    "FD_JACOBIAN_STEP",
    "PROBLEM_NAMES",
    "FirstIntegral",
    "HamiltonianStructure",
    "OdeSystem",
    "eval_energy",
    "eval_integral",
    "fd_jacobian",
    "make_problem",
    "STEPPER_NAMES",
    "TABLEAUS",
    "ButcherTableau",
    "ChebyshevRkc",
    "ExplicitRungeKutta",
    "ImplicitMidpoint",
    "NewtonConfig",
    "NonConvergenceError",
    "StormerVerlet",
    "make_stepper",
    "spectral_radius",
    "step_embedded_euler_heun",
    "DIST_NAMES",
    "RngStream",
    "StepDistribution",
    "ValidationReport",
    "analytic_moments",
    "derive_seed",
    "validate_assumption1",
    "SCHEME_NAMES",
    "DivergenceError",
    "Trajectory",
    "integrate_additive_noise",
    "integrate_deterministic",
    "integrate_rts_rk",
    "run_batch",
    "Ensemble",
    "estimator_mse",
    "mc_functional",
    "ms_error",
    "run_ensemble",
    "std_indicator",
    "weak_error",
    "ConvergenceStudy",
    "EstimatorComparison",
    "MseStudy",
    "SeriesReport",
    "error_estimator_comparison",
    "fit_order",
    "hamiltonian_error_longtime",
    "integral_drift",
    "log_sample_indices",
    "plateau_level",
    "reference_solution",
    "split_slopes",
    "study_estimator_mse",
    "study_mean_square",
    "study_weak",
    "Chain",
    "GaussianPrior",
    "InverseProblem",
    "LimitLaw",
    "PosteriorDensity",
    "build_henon_heiles_inverse_problem",
    "build_linear_inverse_problem",
    "forward",
    "hellinger",
    "linear_analytic_posterior",
    "linear_limit_sigma_zero",
    "pmmh",
    "potential",
    "rwmh",
    "__version__",
]
