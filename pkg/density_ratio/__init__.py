"""
Density-ratio estimation and importance-weight regularization
"""
from .effective_sample import (
    SmoothingTargetWarning,
    effective_sample_size,
    solve_smoothing_exponent,
    regularize_weights,
)
from .ulsif import (
    UlsifModel,
    DEFAULT_RIDGE_GRID,
    gaussian_kernel,
    default_bandwidth_grid,
    ulsif_fit,
    ulsif_predict,
)
from .classifier_ratio import (
    ClassifierRatioConfig,
    ClassifierRatioEstimator,
    classifier_ratio_fit,
    odds_ratio,
)

__all__ = [
    'SmoothingTargetWarning',
    'effective_sample_size',
    'solve_smoothing_exponent',
    'regularize_weights',
    'UlsifModel',
    'DEFAULT_RIDGE_GRID',
    'gaussian_kernel',
    'default_bandwidth_grid',
    'ulsif_fit',
    'ulsif_predict',
    'ClassifierRatioConfig',
    'ClassifierRatioEstimator',
    'classifier_ratio_fit',
    'odds_ratio',
]
