"""
Locally optimized random forest

B weighted trees, each grown on its own resample of the training rows with
the resampled importance weights. Mean predictions average the weighted leaf
means; the leaf co-residence weights r_i(x) define a weighted conditional CDF
from which quantiles are read.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from input_parsers.errors import ConfigurationError, DomainError
from input_parsers.models import Dataset

from .controls import ForestControls
from .tree import WeightedTree, grow_tree_arrays

logger = logging.getLogger(__name__)

# Cumulative weight within this distance of p counts as reaching p
QUANTILE_TOL = 1e-12
# Query rows per block in the dense r-matrix paths
QUERY_BLOCK = 512


@dataclass(eq=False)
class WeightedForest:
    """A fitted forest; prediction never mutates it"""
    trees: List[WeightedTree]
    controls: ForestControls
    response: np.ndarray
    training_weights: np.ndarray
    feature_names: List[str]

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_rows(self) -> int:
        return int(self.response.shape[0])

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict_mean(self, np.asarray(X, dtype=np.float64).reshape(-1, self.n_features))

    def quantiles(self, X: np.ndarray, levels: Sequence[float]) -> Dict[float, np.ndarray]:
        return predict_quantiles(self, X, levels)


def tree_seeds(seed: int, n_trees: int) -> List[int]:
    """One 64-bit seed per tree spawned from the master seed"""
    children = np.random.SeedSequence(seed).spawn(n_trees)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def resolve_weights(weights, n_rows: int) -> np.ndarray:
    """Plain weight vector from None (uniform), an array or an ImportanceWeights record"""
    if weights is None:
        return np.ones(n_rows, dtype=np.float64)
    w = np.asarray(getattr(weights, 'effective', weights), dtype=np.float64)
    if w.shape != (n_rows,):
        raise ConfigurationError(f"expected {n_rows} weights, got shape {w.shape}")
    if not np.isfinite(w).all() or (w < 0).any():
        raise DomainError("weights must be finite and nonnegative")
    if not w.sum() > 0:
        raise DomainError("weights are all zero")
    return w


def fit_forest(dataset: Dataset, weights=None, controls: Optional[ForestControls] = None,
               n_jobs: int = 1) -> WeightedForest:
    """
    Fit a locally optimized random forest

    Args:
        dataset: Training data with a response and no missing cells
        weights: Importance weights (array or ImportanceWeights); None means uniform
        controls: Forest controls; defaults to ForestControls()
        n_jobs: joblib worker count; results do not depend on it

    Returns:
        WeightedForest
    """
    controls = controls or ForestControls()
    y = dataset.require_response()
    if dataset.has_missing:
        raise DomainError(
            f"dataset has missing cells in columns {dataset.missing_columns}; impute first"
        )
    w = resolve_weights(weights, dataset.n_rows)
    controls.resolve_mtry(dataset.n_features)

    seeds = tree_seeds(controls.seed, controls.n_trees)
    trees = Parallel(n_jobs=n_jobs)(
        delayed(grow_tree_arrays)(dataset.features, y, w, controls, s) for s in seeds
    )
    logger.info(
        "Fitted forest: %d trees, n=%d, p=%d, mean leaves per tree %.1f",
        len(trees), dataset.n_rows, dataset.n_features,
        float(np.mean([t.n_leaves for t in trees])),
    )
    return WeightedForest(
        trees=list(trees),
        controls=controls,
        response=np.asarray(y, dtype=np.float64).copy(),
        training_weights=w.copy(),
        feature_names=list(dataset.feature_names),
    )


def _query_matrix(forest: WeightedForest, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise DomainError(
            f"query has {X.shape[-1]} features, forest was trained on {forest.n_features}"
        )
    if not np.isfinite(X).all():
        raise DomainError("query features must be finite")
    return X


def predict_mean(forest: WeightedForest, x) -> Union[float, np.ndarray]:
    """Average of the trees' weighted leaf means; a float for a single p-vector"""
    X = _query_matrix(forest, x)
    total = np.zeros(X.shape[0], dtype=np.float64)
    for tree in forest.trees:
        total += tree.predict(X)
    result = total / forest.n_trees
    return float(result[0]) if np.ndim(x) == 1 else result


def forest_weight_matrix(forest: WeightedForest, X) -> np.ndarray:
    """q x n matrix of r_i(x): each row is nonnegative and sums to 1"""
    X = _query_matrix(forest, X)
    R = np.zeros((X.shape[0], forest.n_rows), dtype=np.float64)
    for tree in forest.trees:
        leaves = tree.apply(X)
        for leaf in np.unique(leaves):
            queries = np.flatnonzero(leaves == leaf)
            rows, t = tree.leaf_distribution(int(leaf))
            R[np.ix_(queries, rows)] += t
    return R / forest.n_trees


def forest_weights(forest: WeightedForest, x) -> np.ndarray:
    """r_i(x) over the n training rows for one query point"""
    return forest_weight_matrix(forest, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]


def _check_level(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile level must be in (0, 1), got {p}")
    return p


def _quantiles_from_matrix(R: np.ndarray, response: np.ndarray, levels: Sequence[float]) -> Dict[float, np.ndarray]:
    order = np.argsort(response, kind='stable')
    sorted_y = response[order]
    cumulative = np.cumsum(R[:, order], axis=1)
    out = {}
    for p in levels:
        reached = cumulative >= p - QUANTILE_TOL
        idx = np.where(reached.any(axis=1), reached.argmax(axis=1), sorted_y.shape[0] - 1)
        out[p] = sorted_y[idx]
    return out


def weighted_quantile(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    """Smallest value whose cumulative weight (values ascending) reaches p"""
    p = _check_level(p)
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64).reshape(1, -1)
    return float(_quantiles_from_matrix(weights, values, [p])[p][0])


def conditional_quantile(forest: WeightedForest, x, p: float) -> float:
    """Weighted conditional p-quantile of Y at one query point"""
    p = _check_level(p)
    return weighted_quantile(forest.response, forest_weights(forest, x), p)


def predict_quantiles(forest: WeightedForest, X, levels: Sequence[float]) -> Dict[float, np.ndarray]:
    """
    Conditional quantiles for many query points

    Args:
        forest: Fitted forest
        X: q x p query matrix
        levels: Quantile levels in (0, 1)

    Returns:
        Dict mapping each level to a length-q array
    """
    levels = [_check_level(p) for p in levels]
    X = _query_matrix(forest, X)
    out = {p: np.empty(X.shape[0], dtype=np.float64) for p in levels}
    for start in range(0, X.shape[0], QUERY_BLOCK):
        block = slice(start, start + QUERY_BLOCK)
        R = forest_weight_matrix(forest, X[block])
        for p, values in _quantiles_from_matrix(R, forest.response, levels).items():
            out[p][block] = values
    return out


def conditional_quantiles_at(forest: WeightedForest, X, probabilities) -> np.ndarray:
    """Row i's conditional quantile at its own level probabilities[i]"""
    X = _query_matrix(forest, X)
    probabilities = np.asarray(probabilities, dtype=np.float64).reshape(-1)
    if probabilities.shape[0] != X.shape[0]:
        raise DomainError("one probability per query row is required")
    if ((probabilities <= 0) | (probabilities >= 1)).any():
        raise DomainError("probabilities must lie in (0, 1)")

    order = np.argsort(forest.response, kind='stable')
    sorted_y = forest.response[order]
    out = np.empty(X.shape[0], dtype=np.float64)
    for start in range(0, X.shape[0], QUERY_BLOCK):
        block = slice(start, start + QUERY_BLOCK)
        cumulative = np.cumsum(forest_weight_matrix(forest, X[block])[:, order], axis=1)
        reached = cumulative >= (probabilities[block] - QUANTILE_TOL)[:, None]
        idx = np.where(reached.any(axis=1), reached.argmax(axis=1), sorted_y.shape[0] - 1)
        out[block] = sorted_y[idx]
    return out
