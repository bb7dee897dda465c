"""
Accuracy metrics and covariate-shift simulation studies
"""
from .metrics import DEFAULT_ALPHA, MetricsReport, composite_score, compute_metrics
from .simulation_study import (
    SimulationResult,
    compare_ratio_estimators,
    read_results_csv,
    run_oob_study,
    run_simulation_study,
    run_univariate_study,
    summarize_oob_study,
    write_results_csv,
)

__all__ = [
    'DEFAULT_ALPHA',
    'MetricsReport',
    'composite_score',
    'compute_metrics',
    'SimulationResult',
    'compare_ratio_estimators',
    'read_results_csv',
    'run_oob_study',
    'run_simulation_study',
    'run_univariate_study',
    'summarize_oob_study',
    'write_results_csv',
]
