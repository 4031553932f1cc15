"""
Monte Carlo studies

Convergence of u_ε - u - Z_ε, the error-splitting inequality and the
noise-strength regimes, assembled from the solver, analysis and renorm
modules.
"""

from .convergence import (
    ConvergenceResult,
    SampleTask,
    c_zero_for,
    resolve_c_zero,
    run_convergence_study,
    run_sample,
)
from .records import (
    ProbabilityEstimate,
    RunRecord,
    error_rate,
    estimate_probability,
    summarize,
)
from .regimes import RegimeSummary, default_schedules, regime_scan
from .theorem import EpsVerdict, TheoremReport, theorem_inequality_check

__all__ = [
    "ConvergenceResult",
    "EpsVerdict",
    "ProbabilityEstimate",
    "RegimeSummary",
    "RunRecord",
    "SampleTask",
    "TheoremReport",
    "c_zero_for",
    "default_schedules",
    "error_rate",
    "estimate_probability",
    "regime_scan",
    "resolve_c_zero",
    "run_convergence_study",
    "run_sample",
    "summarize",
    "theorem_inequality_check",
]
