"""
Synthetic covariate-shift designs

Dirichlet benchmark: columns 1-6 Dirichlet(alpha), alpha = lambda^[1..6] for
training and lambda^[6..1] for testing; columns 7-31 iid Uniform(0, 1);
response from one of five regression models plus Gaussian noise.

Univariate design: X ~ N(-4, 3.5^2) for training and N(3.5, 1.5^2) for
testing, Y | X ~ N(phi(X), noise variance).
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from input_parsers.errors import ConfigurationError
from input_parsers.models import Dataset, default_feature_names

logger = logging.getLogger(__name__)

N_DIRICHLET = 6
N_UNIFORM = 25
ROLE_CODES = {'train': 0, 'test': 1}

TRAIN_LOC, TRAIN_SCALE = -4.0, 3.5
TEST_LOC, TEST_SCALE = 3.5, 1.5


def _model_1(X: np.ndarray) -> np.ndarray:
    return 5.0 * X[:, 0]


def _model_2(X: np.ndarray) -> np.ndarray:
    return 5.0 * np.sin(np.pi * X[:, 0])


def _model_3(X: np.ndarray) -> np.ndarray:
    # Friedman's MARS benchmark
    return (10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
            + 20.0 * (X[:, 2] - 0.5) ** 2
            + 10.0 * X[:, 3]
            + 5.0 * X[:, 4])


def _model_4(X: np.ndarray) -> np.ndarray:
    return 5.0 * np.exp(2.0 * np.sqrt(X[:, 0] * X[:, 1]) + X[:, 5])


def _model_5(X: np.ndarray) -> np.ndarray:
    return 5.0 * np.sum(X[:, :5] ** 2, axis=1)


RESPONSE_MODELS: Dict[int, Callable[[np.ndarray], np.ndarray]] = {
    1: _model_1,
    2: _model_2,
    3: _model_3,
    4: _model_4,
    5: _model_5,
}


def response_mean(model_id: int, X: np.ndarray) -> np.ndarray:
    """Noise-free conditional mean E[Y | X] of a benchmark model"""
    if model_id not in RESPONSE_MODELS:
        raise ConfigurationError(f"model_id must be one of {sorted(RESPONSE_MODELS)}, got {model_id}")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return RESPONSE_MODELS[model_id](X)


@dataclass(frozen=True)
class ShiftBenchmarkSpec:
    """Parameters of one Dirichlet-shift draw"""
    lambda_shift: float
    n_train: int = 1000
    n_test: int = 200
    model_id: int = 1
    noise_sd: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.lambda_shift > 0:
            raise ConfigurationError(f"lambda_shift must be > 0, got {self.lambda_shift}")
        if self.model_id not in RESPONSE_MODELS:
            raise ConfigurationError(f"model_id must be in 1..5, got {self.model_id}")
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigurationError("n_train and n_test must be positive")
        if self.noise_sd < 0:
            raise ConfigurationError(f"noise_sd must be >= 0, got {self.noise_sd}")

    def alpha(self, role: str) -> np.ndarray:
        return dirichlet_alpha(self.lambda_shift, role)

    def to_dict(self) -> dict:
        return {
            'lambda_shift': self.lambda_shift,
            'n_train': self.n_train,
            'n_test': self.n_test,
            'model_id': self.model_id,
            'noise_sd': self.noise_sd,
            'seed': self.seed,
        }


def dirichlet_alpha(lambda_shift: float, role: str) -> np.ndarray:
    """lambda^[1..6] for the training role, lambda^[6..1] for the test role"""
    if role not in ROLE_CODES:
        raise ConfigurationError(f"role must be 'train' or 'test', got '{role}'")
    powers = np.arange(1, N_DIRICHLET + 1, dtype=np.float64)
    if role == 'test':
        powers = powers[::-1]
    return np.power(float(lambda_shift), powers)


def generate_dirichlet_shift(spec: ShiftBenchmarkSpec, role: str) -> Dataset:
    """
    Draw the training or test sample of the Dirichlet benchmark

    Args:
        spec: Benchmark parameters
        role: 'train' or 'test'

    Returns:
        Dataset with 31 features (x1..x31) and response y
    """
    alpha = dirichlet_alpha(spec.lambda_shift, role)
    n = spec.n_train if role == 'train' else spec.n_test
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(ROLE_CODES[role],)))

    shifted = rng.dirichlet(alpha, size=n)
    uniform = rng.uniform(0.0, 1.0, size=(n, N_UNIFORM))
    X = np.hstack([shifted, uniform])
    y = response_mean(spec.model_id, X) + rng.normal(0.0, spec.noise_sd, size=n)

    logger.debug("Generated %s sample: n=%d, alpha=%s", role, n, np.round(alpha, 4).tolist())
    return Dataset(
        features=X,
        feature_names=default_feature_names(X.shape[1]),
        response=y,
        response_name='y',
    )


def univariate_signal(x: np.ndarray) -> np.ndarray:
    """phi(x) = max{logistic(x) sin(x), logistic(-x) sin(-x)}"""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(expit(x) * np.sin(x), expit(-x) * np.sin(-x))


def univariate_oracle_ratio(x: np.ndarray) -> np.ndarray:
    """Test/train density ratio of the univariate design, up to a constant"""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return np.exp(
        norm.logpdf((x - TEST_LOC) / TEST_SCALE) - norm.logpdf((x - TRAIN_LOC) / TRAIN_SCALE)
    )


def generate_univariate_shift(
    n_train: int,
    n_test: int,
    seed: int,
    noise_variance: float = 0.5,
) -> Tuple[Dataset, Dataset, Callable[[np.ndarray], np.ndarray]]:
    """
    Draw the one-dimensional covariate-shift example

    Args:
        n_train: Training sample size
        n_test: Test sample size
        seed: Master seed
        noise_variance: Variance of Y around phi(X)

    Returns:
        (train, test, oracle_ratio)
    """
    if n_train < 1 or n_test < 1:
        raise ConfigurationError("n_train and n_test must be >= 1")
    if noise_variance < 0:
        raise ConfigurationError(f"noise_variance must be >= 0, got {noise_variance}")

    train_seq, test_seq = np.random.SeedSequence(seed).spawn(2)
    noise_sd = float(np.sqrt(noise_variance))

    samples = []
    for seq, loc, scale, n in ((train_seq, TRAIN_LOC, TRAIN_SCALE, n_train),
                               (test_seq, TEST_LOC, TEST_SCALE, n_test)):
        rng = np.random.default_rng(seq)
        x = rng.normal(loc, scale, size=n)
        y = univariate_signal(x) + rng.normal(0.0, noise_sd, size=n)
        samples.append(Dataset(features=x.reshape(-1, 1), feature_names=['x1'],
                               response=y, response_name='y'))
    return samples[0], samples[1], univariate_oracle_ratio


# Two-Gaussian ratio comparison: train N(0, 2.5^2), test N(0.5, 0.95^2)
RATIO_TRAIN_LOC, RATIO_TRAIN_SCALE = 0.0, 2.5
RATIO_TEST_LOC, RATIO_TEST_SCALE = 0.5, 0.95


def gaussian_ratio_true(x: np.ndarray) -> np.ndarray:
    """Exact density ratio of the two-Gaussian comparison"""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return np.exp(
        norm.logpdf(x, RATIO_TEST_LOC, RATIO_TEST_SCALE)
        - norm.logpdf(x, RATIO_TRAIN_LOC, RATIO_TRAIN_SCALE)
    )


def generate_gaussian_ratio_pair(n: int, m: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Training (n x 1) and test (m x 1) covariates of the two-Gaussian comparison"""
    train_seq, test_seq = np.random.SeedSequence(seed).spawn(2)
    train_X = np.random.default_rng(train_seq).normal(RATIO_TRAIN_LOC, RATIO_TRAIN_SCALE, size=(n, 1))
    test_X = np.random.default_rng(test_seq).normal(RATIO_TEST_LOC, RATIO_TEST_SCALE, size=(m, 1))
    return train_X, test_X
