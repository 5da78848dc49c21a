"""Local polynomial estimation of time-varying covariate effects in panel count data."""

from ._core import (
    AnalysisResult,
    CensoringMode,
    CurveEstimate,
    EstimationError,
    GridSummary,
    KernelFamily,
    KernelMoments,
    KernelSpec,
    LocalFit,
    PanelDataset,
    SimulationConfig,
    SimulationTruth,
    StepFunction,
    StudyConfig,
    StudyReport,
    Subject,
    ValidationError,
    Violation,
    analyze,
    baseline_at,
    baseline_step,
    builtin_setting,
    emit_csv,
    estimate_curve,
    fit_at,
    generate,
    hessian,
    ingest_csv,
    ingest_csv_file,
    kernel_value,
    loglik,
    make_grid,
    mix64,
    moments,
    moments_by_quadrature,
    normal_quantile,
    optimal_bandwidth,
    pooled_visit_times,
    require_valid,
    run_cli,
    run_study,
    score,
    validate,
)

__all__ = [
    "AnalysisResult",
    "CensoringMode",
    "CurveEstimate",
    "EstimationError",
    "GridSummary",
    "KernelFamily",
    "KernelMoments",
    "KernelSpec",
    "LocalFit",
    "PanelDataset",
    "SimulationConfig",
    "SimulationTruth",
    "StepFunction",
    "StudyConfig",
    "StudyReport",
    "Subject",
    "ValidationError",
    "Violation",
    "analyze",
    "baseline_at",
    "baseline_step",
    "builtin_setting",
    "emit_csv",
    "estimate_curve",
    "fit_at",
    "generate",
    "hessian",
    "ingest_csv",
    "ingest_csv_file",
    "kernel_value",
    "loglik",
    "make_grid",
    "mix64",
    "moments",
    "moments_by_quadrature",
    "normal_quantile",
    "optimal_bandwidth",
    "pooled_visit_times",
    "require_valid",
    "run_cli",
    "run_study",
    "score",
    "validate",
]

__version__ = "0.1.0"
