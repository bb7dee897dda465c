"""
Weighted regression trees and the locally optimized random forest
"""
from .controls import ForestControls
from .tree import (
    SplitCandidate,
    WeightedTree,
    ZeroWeightNodeWarning,
    split_gain,
    grow_weighted_tree,
)
from .forest import (
    WeightedForest,
    fit_forest,
    predict_mean,
    forest_weights,
    forest_weight_matrix,
    conditional_quantile,
    predict_quantiles,
    conditional_quantiles_at,
    weighted_quantile,
)
from .oob import OobResult, oob_predictions, oob_error, tune_by_oob, weighted_mean_squared_error
from .persistence import ForestJsonStore, save_forest, load_forest

__all__ = [
    'ForestControls',
    'SplitCandidate',
    'WeightedTree',
    'ZeroWeightNodeWarning',
    'split_gain',
    'grow_weighted_tree',
    'WeightedForest',
    'fit_forest',
    'predict_mean',
    'forest_weights',
    'forest_weight_matrix',
    'conditional_quantile',
    'predict_quantiles',
    'conditional_quantiles_at',
    'weighted_quantile',
    'OobResult',
    'oob_predictions',
    'oob_error',
    'tune_by_oob',
    'weighted_mean_squared_error',
    'ForestJsonStore',
    'save_forest',
    'load_forest',
]
