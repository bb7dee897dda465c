"""
Density ratio by probabilistic classification

Training rows are labelled Z=0 and test rows Z=1. A forest regressing Z on x
estimates pi(x) = P(Z=1 | x); the ratio follows from the odds,
w = (pi + delta) / (1 - pi + delta). Training-row probabilities are
out-of-bag so the forest does not score rows it memorised.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from forest.controls import ForestControls
from forest.forest import WeightedForest, fit_forest, predict_mean
from forest.oob import oob_predictions
from input_parsers.errors import ConfigurationError, DomainError
from input_parsers.models import Dataset, default_feature_names

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassifierRatioConfig:
    """delta stabilises the odds; the rest are the probability forest's controls"""
    delta: float = 1e-2
    n_trees: int = 500
    mtry: Optional[int] = None
    nodesize: int = 10
    sample_fraction: float = 0.6
    with_replacement: bool = False

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigurationError(f"delta must be > 0, got {self.delta}")

    def forest_controls(self, seed: int) -> ForestControls:
        return ForestControls(
            n_trees=self.n_trees,
            mtry=self.mtry,
            nodesize=self.nodesize,
            sample_fraction=self.sample_fraction,
            with_replacement=self.with_replacement,
            seed=seed,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def odds_ratio(probability, delta: float) -> np.ndarray:
    """(pi + delta) / (1 - pi + delta)"""
    if delta < 0:
        raise ConfigurationError(f"delta must be >= 0, got {delta}")
    pi = np.asarray(probability, dtype=np.float64)
    if ((pi < 0) | (pi > 1)).any():
        raise DomainError("probabilities must lie in [0, 1]")
    return (pi + delta) / (1.0 - pi + delta)


class ClassifierRatioEstimator:
    """Forest-based test-vs-train classifier turned into a ratio estimator"""

    def __init__(self, config: Optional[ClassifierRatioConfig] = None, seed: int = 0, n_jobs: int = 1):
        self.config = config or ClassifierRatioConfig()
        self.seed = seed
        self.n_jobs = n_jobs
        self.forest_: Optional[WeightedForest] = None
        self.training_probabilities_: Optional[np.ndarray] = None

    def fit(self, train_X, test_X) -> "ClassifierRatioEstimator":
        train_X = np.asarray(train_X, dtype=np.float64)
        test_X = np.asarray(test_X, dtype=np.float64)
        if train_X.ndim == 1:
            train_X = train_X.reshape(-1, 1)
        if test_X.ndim == 1:
            test_X = test_X.reshape(-1, 1)
        if train_X.shape[0] == 0 or test_X.shape[0] == 0:
            raise ConfigurationError("both the training and the test sample must be nonempty")
        if train_X.shape[1] != test_X.shape[1]:
            raise DomainError("training and test samples have different feature counts")

        n = train_X.shape[0]
        stacked = Dataset(
            features=np.vstack([train_X, test_X]),
            feature_names=default_feature_names(train_X.shape[1]),
            response=np.concatenate([np.zeros(n), np.ones(test_X.shape[0])]),
            response_name='z',
        )
        self.forest_ = fit_forest(stacked, None, self.config.forest_controls(self.seed), n_jobs=self.n_jobs)

        oob, counts = oob_predictions(self.forest_, stacked)
        probabilities = oob[:n]
        never_out = counts[:n] == 0
        if never_out.any():
            probabilities[never_out] = predict_mean(self.forest_, train_X[never_out])
        self.training_probabilities_ = probabilities
        logger.info("Classifier ratio fitted: n=%d train, m=%d test, mean P(test)=%.3f",
                    n, test_X.shape[0], float(probabilities.mean()))
        return self

    def probability(self, X) -> np.ndarray:
        if self.forest_ is None:
            raise ConfigurationError("estimator is not fitted")
        X = np.asarray(X, dtype=np.float64)
        return predict_mean(self.forest_, X.reshape(-1, self.forest_.n_features))

    def ratio(self, X) -> np.ndarray:
        return odds_ratio(self.probability(X), self.config.delta)

    @property
    def training_ratios_(self) -> np.ndarray:
        return odds_ratio(self.training_probabilities_, self.config.delta)


def classifier_ratio_fit(train_X, test_X, config: Optional[ClassifierRatioConfig] = None,
                         seed: int = 0, n_jobs: int = 1) -> np.ndarray:
    """Ratio estimates at the training rows, strictly positive for delta > 0"""
    estimator = ClassifierRatioEstimator(config, seed=seed, n_jobs=n_jobs).fit(train_X, test_X)
    return estimator.training_ratios_
