"""
Quantile-forest imputation of missing covariates

Columns with gaps are visited in a seeded random order. For each one a
forest is fitted on the rows where it is observed, with the originally
complete columns as predictors, and every missing cell receives the
conditional U-quantile for a fresh U ~ Uniform(0, 1). Drawing from the
conditional distribution (rather than plugging in its mean) preserves the
column's spread.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from forest.controls import ForestControls
from forest.forest import WeightedForest, conditional_quantiles_at, fit_forest, predict_mean
from input_parsers.errors import ConfigurationError, DomainError
from input_parsers.models import Dataset

logger = logging.getLogger(__name__)

DEFAULT_IMPUTATION_CONTROLS = ForestControls(n_trees=100)
# U draws are kept off 0 and 1 so the quantile level stays in the open interval
U_CLIP = 1e-12


@dataclass(frozen=True)
class ImputationPlan:
    """Processing order, predictors and seeds of one imputation run

    missing_columns: columns with gaps, in processing order
    predictor_columns: the columns that were fully observed at the start
    column_seeds: forest seed per entry of missing_columns
    draw_seed: seed of the uniform draws
    """
    missing_columns: Tuple[int, ...]
    predictor_columns: Tuple[int, ...]
    controls: ForestControls
    seed: int
    column_seeds: Tuple[int, ...] = field(default=())
    draw_seed: int = 0
    use_imputed_predictors: bool = False
    column_names: Tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        names = self.column_names
        return {
            'seed': self.seed,
            'order': [names[j] if names else j for j in self.missing_columns],
            'predictors': [names[j] if names else j for j in self.predictor_columns],
            'use_imputed_predictors': self.use_imputed_predictors,
            'controls': self.controls.to_dict(),
        }


def _seed_int(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def make_imputation_plan(dataset: Dataset, controls: Optional[ForestControls] = None,
                         seed: int = 0, use_imputed_predictors: bool = False) -> ImputationPlan:
    """
    Build the imputation plan for a dataset

    Args:
        dataset: Data with a missingness mask
        controls: Forest controls for the per-column forests
        seed: Master seed; split into order, draw and per-column forest streams
        use_imputed_predictors: Also use columns imputed earlier in the order as predictors

    Returns:
        ImputationPlan
    """
    controls = controls or DEFAULT_IMPUTATION_CONTROLS
    missing = dataset.missing_columns
    complete = dataset.complete_columns
    if missing and not complete:
        raise ConfigurationError("every column has missing cells; at least one complete predictor column is required")

    children = np.random.SeedSequence(seed).spawn(2 + len(missing))
    order = np.random.default_rng(children[0]).permutation(missing) if missing else np.array([], dtype=int)
    plan = ImputationPlan(
        missing_columns=tuple(int(j) for j in order),
        predictor_columns=tuple(complete),
        controls=controls,
        seed=seed,
        column_seeds=tuple(_seed_int(s) for s in children[2:]),
        draw_seed=_seed_int(children[1]),
        use_imputed_predictors=use_imputed_predictors,
        column_names=tuple(dataset.feature_names),
    )
    logger.debug("Imputation order: %s", [dataset.feature_names[j] for j in plan.missing_columns])
    return plan


def _column_controls(plan: ImputationPlan, n_predictors: int, seed: int) -> ForestControls:
    mtry = plan.controls.mtry
    if mtry is not None and mtry > n_predictors:
        mtry = n_predictors
    return plan.controls.with_changes(mtry=mtry, seed=seed)


def _impute_columns(dataset: Dataset, plan: ImputationPlan,
                    fill: Callable[[WeightedForest, np.ndarray, np.random.Generator], np.ndarray],
                    n_jobs: int) -> Dataset:
    if not dataset.has_missing:
        return dataset
    if set(plan.missing_columns) != set(dataset.missing_columns):
        raise ConfigurationError("imputation plan does not match the dataset's missing columns")
    if not plan.predictor_columns:
        raise ConfigurationError("no complete predictor columns")

    X = dataset.features.copy()
    mask = dataset.missing_mask.copy()
    rng = np.random.default_rng(plan.draw_seed)
    predictors: List[int] = list(plan.predictor_columns)

    for j, column_seed in zip(plan.missing_columns, plan.column_seeds):
        name = dataset.feature_names[j]
        observed = ~dataset.missing_mask[:, j]
        n_observed = int(observed.sum())
        if n_observed == 0:
            raise DomainError(f"column '{name}' has no observed values to learn from")
        if n_observed < plan.controls.nodesize:
            raise DomainError(
                f"column '{name}' has {n_observed} observed values, fewer than nodesize={plan.controls.nodesize}"
            )

        train = Dataset(
            features=X[np.ix_(observed, predictors)],
            feature_names=[dataset.feature_names[k] for k in predictors],
            response=X[observed, j],
            response_name=name,
        )
        forest = fit_forest(train, None, _column_controls(plan, len(predictors), column_seed), n_jobs=n_jobs)
        rows = np.flatnonzero(~observed)
        X[rows, j] = fill(forest, X[np.ix_(rows, predictors)], rng)
        mask[:, j] = False
        if plan.use_imputed_predictors:
            predictors.append(j)
        logger.info("Imputed %d cell(s) in column '%s'", rows.size, name)

    return dataset.with_features(X, mask)


def _quantile_draw(forest: WeightedForest, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = np.clip(rng.uniform(size=X.shape[0]), U_CLIP, 1.0 - U_CLIP)
    return conditional_quantiles_at(forest, X, u)


def _conditional_mean(forest: WeightedForest, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return predict_mean(forest, X)


def impute(dataset: Dataset, plan: ImputationPlan, n_jobs: int = 1) -> Dataset:
    """
    Fill missing covariates with conditional-quantile draws

    Returns:
        A new Dataset with no missing cells; observed cells are untouched.
        A dataset without gaps is returned as is.
    """
    return _impute_columns(dataset, plan, _quantile_draw, n_jobs)


def conditional_mean_impute(dataset: Dataset, plan: ImputationPlan, n_jobs: int = 1) -> Dataset:
    """Baseline filling every gap with the forest's conditional mean"""
    return _impute_columns(dataset, plan, _conditional_mean, n_jobs)


def imputation_report(dataset: Dataset, plan: ImputationPlan) -> dict:
    """Per-column missing counts and the plan, for the sidecar JSON"""
    return {
        'rows': dataset.n_rows,
        'missing_by_column': dataset.missing_counts(),
        'plan': plan.to_dict(),
    }
