"""Stochastic Lotka-Volterra dynamics with Brownian and jump noise.

The package bundles a positivity-preserving jump-diffusion integrator (with
an optional compiled core and a bit-identical pure-Python fallback), exact
evaluation of the Ito generator on the standard Lyapunov functions, and the
Monte Carlo estimators used to verify moment bounds, growth exponents, and
exponential-martingale tail inequalities on concrete models.
"""

from .backend import HAVE_COMPILED, backend_name, pack_model
from .ensemble import EnsembleSummary, PathStatus
from .lyapunov import (
    ConditionReport,
    GeneratorValue,
    JumpMoments,
    LeadingOrderFit,
    check_conditions,
    eval_Ji,
    eval_Lprod,
    eval_LU,
    eval_LV,
    eval_Q,
    fit_leading_order,
    jump_moment_integrals,
)
from .model import (
    ConfigError,
    ConstantJump,
    CustomJump,
    JumpKernel,
    KernelAdmissibilityError,
    Model,
    PolynomialJump,
    ProbeGrid,
    ValidationReport,
    load_model,
    model_from_dict,
    scenario,
    scenario_names,
    validate_model,
)
from .simulate import (
    IntegrandSpec,
    JumpEvent,
    MartingaleSpec,
    Path,
    PathConfig,
    RngStream,
    apply_jump,
    next_jump,
    simulate_ensemble,
    simulate_path,
    step_diffusion_log,
)
from .stats import (
    ExponentSummary,
    MartingaleTestResult,
    MomentCurve,
    PositivityReport,
    estimate_moment,
    martingale_exceedance_test,
    pathwise_growth_exponent,
    positivity_report,
    sample_lyapunov_exponent,
    time_avg_moment,
    write_exponents_csv,
    write_martingale_csv,
    write_moments_csv,
    write_statuses_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConditionReport",
    "ConstantJump",
    "CustomJump",
    "EnsembleSummary",
    "ExponentSummary",
    "GeneratorValue",
    "HAVE_COMPILED",
    "IntegrandSpec",
    "JumpEvent",
    "JumpKernel",
    "JumpMoments",
    "KernelAdmissibilityError",
    "LeadingOrderFit",
    "MartingaleSpec",
    "MartingaleTestResult",
    "Model",
    "MomentCurve",
    "Path",
    "PathConfig",
    "PathStatus",
    "PolynomialJump",
    "PositivityReport",
    "ProbeGrid",
    "RngStream",
    "ValidationReport",
    "apply_jump",
    "backend_name",
    "check_conditions",
    "estimate_moment",
    "eval_Ji",
    "eval_LU",
    "eval_LV",
    "eval_Lprod",
    "eval_Q",
    "fit_leading_order",
    "jump_moment_integrals",
    "load_model",
    "martingale_exceedance_test",
    "model_from_dict",
    "next_jump",
    "pack_model",
    "pathwise_growth_exponent",
    "positivity_report",
    "sample_lyapunov_exponent",
    "scenario",
    "scenario_names",
    "simulate_ensemble",
    "simulate_path",
    "step_diffusion_log",
    "time_avg_moment",
    "validate_model",
    "write_exponents_csv",
    "write_martingale_csv",
    "write_moments_csv",
    "write_statuses_csv",
]
