"""
Synthetic covariate-shift generators
"""
from .shift_models import (
    RESPONSE_MODELS,
    ShiftBenchmarkSpec,
    dirichlet_alpha,
    response_mean,
    generate_dirichlet_shift,
    univariate_signal,
    univariate_oracle_ratio,
    generate_univariate_shift,
    gaussian_ratio_true,
    generate_gaussian_ratio_pair,
)

__all__ = [
    'RESPONSE_MODELS',
    'ShiftBenchmarkSpec',
    'dirichlet_alpha',
    'response_mean',
    'generate_dirichlet_shift',
    'univariate_signal',
    'univariate_oracle_ratio',
    'generate_univariate_shift',
    'gaussian_ratio_true',
    'generate_gaussian_ratio_pair',
]
