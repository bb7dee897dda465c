"""
Out-of-bag error, uniform and importance-weighted, and OOB-driven mtry tuning
"""
import logging
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from input_parsers.errors import ConfigurationError, DomainError
from input_parsers.models import Dataset

from .controls import ForestControls
from .forest import WeightedForest, fit_forest, resolve_weights

logger = logging.getLogger(__name__)

OOB_MODES = ('uniform', 'weighted')


@dataclass(frozen=True)
class OobResult:
    value: float
    mode: str
    rows_used: int
    rows_skipped: int

    def to_dict(self) -> dict:
        return asdict(self)


def oob_predictions(forest: WeightedForest, dataset: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-row out-of-bag predictions

    Args:
        forest: Forest fitted on `dataset`
        dataset: The training data, rows in fitting order

    Returns:
        (predictions, counts): predictions average the trees whose resample
        excluded the row (NaN where no tree did); counts are those B_i
    """
    if dataset.n_rows != forest.n_rows or dataset.n_features != forest.n_features:
        raise DomainError("dataset does not match the forest's training data shape")
    X = dataset.features
    sums = np.zeros(dataset.n_rows, dtype=np.float64)
    counts = np.zeros(dataset.n_rows, dtype=np.int64)
    for tree in forest.trees:
        out_of_bag = np.ones(dataset.n_rows, dtype=bool)
        out_of_bag[tree.resample_indices] = False
        rows = np.flatnonzero(out_of_bag)
        if rows.size:
            sums[rows] += tree.predict(X[rows])
            counts[rows] += 1
    with np.errstate(invalid='ignore', divide='ignore'):
        predictions = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return predictions, counts


def weighted_mean_squared_error(residuals: np.ndarray, weights: np.ndarray) -> float:
    """sum(w r^2) / sum(w)"""
    residuals = np.asarray(residuals, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    total = weights.sum()
    if not total > 0:
        raise DomainError("weights of the out-of-bag rows sum to zero")
    return float(np.dot(weights, residuals ** 2) / total)


def oob_error(forest: WeightedForest, dataset: Dataset, mode: str = 'uniform',
              weights=None) -> OobResult:
    """
    Out-of-bag mean squared error

    Args:
        forest: Forest fitted on `dataset`
        dataset: Training data with response
        mode: 'uniform' or 'weighted'
        weights: Row weights for weighted mode; defaults to the forest's training weights

    Returns:
        OobResult; rows never out of bag are skipped and excluded from the normalizer
    """
    if mode not in OOB_MODES:
        raise ConfigurationError(f"mode must be one of {OOB_MODES}, got '{mode}'")
    y = dataset.require_response()
    predictions, counts = oob_predictions(forest, dataset)
    used = counts > 0
    if not used.any():
        raise DomainError("every row is in-bag in every tree; no out-of-bag estimate exists")

    if mode == 'uniform':
        w = np.ones(dataset.n_rows, dtype=np.float64)
    elif weights is None:
        w = forest.training_weights
    else:
        w = resolve_weights(weights, dataset.n_rows)

    value = weighted_mean_squared_error(y[used] - predictions[used], w[used])
    skipped = int((~used).sum())
    if skipped:
        logger.info("OOB error skipped %d row(s) that were in-bag in every tree", skipped)
    return OobResult(value=value, mode=mode, rows_used=int(used.sum()), rows_skipped=skipped)


def tune_by_oob(dataset: Dataset, weights, mtry_grid: Sequence[int],
                controls_base: Optional[ForestControls] = None,
                n_jobs: int = 1) -> Tuple[ForestControls, pd.DataFrame]:
    """
    Choose mtry by weighted out-of-bag error

    Returns:
        (best controls, table with columns mtry, oob_weighted, oob_uniform, rows_skipped);
        ties go to the smaller mtry
    """
    grid = sorted(set(int(m) for m in mtry_grid))
    if not grid:
        raise ConfigurationError("mtry_grid is empty")
    controls_base = controls_base or ForestControls()
    w = resolve_weights(weights, dataset.n_rows)

    records = []
    for mtry in grid:
        controls = controls_base.with_changes(mtry=mtry)
        forest = fit_forest(dataset, w, controls, n_jobs=n_jobs)
        weighted = oob_error(forest, dataset, mode='weighted', weights=w)
        uniform = oob_error(forest, dataset, mode='uniform')
        records.append({
            'mtry': mtry,
            'oob_weighted': weighted.value,
            'oob_uniform': uniform.value,
            'rows_skipped': weighted.rows_skipped,
        })
        logger.debug("mtry=%d: weighted OOB %.6g, uniform OOB %.6g", mtry, weighted.value, uniform.value)

    table = pd.DataFrame.from_records(records, columns=['mtry', 'oob_weighted', 'oob_uniform', 'rows_skipped'])
    best_mtry = int(table.loc[table['oob_weighted'].idxmin(), 'mtry'])
    logger.info("Selected mtry=%d by weighted OOB", best_mtry)
    return controls_base.with_changes(mtry=best_mtry), table
