"""
Missing-covariate imputation with quantile forests
"""
from .quantile_imputer import (
    ImputationPlan,
    DEFAULT_IMPUTATION_CONTROLS,
    make_imputation_plan,
    impute,
    conditional_mean_impute,
    imputation_report,
)

__all__ = [
    'ImputationPlan',
    'DEFAULT_IMPUTATION_CONTROLS',
    'make_imputation_plan',
    'impute',
    'conditional_mean_impute',
    'imputation_report',
]
