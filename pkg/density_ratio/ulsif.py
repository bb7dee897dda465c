"""
Unconstrained least-squares importance fitting (uLSIF)

The ratio p_test(x) / p_train(x) is modelled as a linear combination of
Gaussian kernels centred on test points,

    w(x) = max(0, sum_k alpha_k exp(-||x - c_k||^2 / (2 sigma^2)))

with alpha solving the ridge system (H + lambda I) alpha = h, where
H = K_train' K_train / n and h = mean of K_test over test rows. Bandwidth and
ridge are selected by the closed-form leave-one-out score.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import linalg
from scipy.spatial.distance import cdist, pdist

from input_parsers.errors import ConfigurationError, DomainError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_RIDGE_GRID = tuple(np.logspace(-3, 1, 5))
DEFAULT_MAX_CENTROIDS = 100
N_BANDWIDTHS = 10
# Rows pooled when computing the bandwidth percentiles
BANDWIDTH_POOL = 500


@dataclass(frozen=True, eq=False)
class UlsifModel:
    """Fitted uLSIF ratio model; immutable and safe to share between threads"""
    centroids: np.ndarray
    coefficients: np.ndarray
    bandwidth: float
    ridge: float
    selection: Optional[pd.DataFrame] = None

    def __post_init__(self):
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            raise ConfigurationError("uLSIF model needs at least one centroid")
        if self.coefficients.shape != (self.centroids.shape[0],):
            raise ConfigurationError("one coefficient per centroid is required")
        if not self.bandwidth > 0:
            raise ConfigurationError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.ridge < 0:
            raise ConfigurationError(f"ridge must be >= 0, got {self.ridge}")

    @property
    def n_centroids(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.centroids.shape[1])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return ulsif_predict(self, X)

    def to_dict(self) -> dict:
        return {
            'n_centroids': self.n_centroids,
            'bandwidth': float(self.bandwidth),
            'ridge': float(self.ridge),
        }


def gaussian_kernel(X: np.ndarray, centroids: np.ndarray, bandwidth: float) -> np.ndarray:
    """exp(-||x - c||^2 / (2 sigma^2)) for every row/centroid pair"""
    return np.exp(-cdist(X, centroids, 'sqeuclidean') / (2.0 * bandwidth ** 2))


def _as_matrix(X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ConfigurationError(f"{name} must be a non-empty 2-D matrix")
    if not np.isfinite(X).all():
        raise DomainError(f"{name} must be finite")
    return X


def default_bandwidth_grid(train_X: np.ndarray, test_X: np.ndarray,
                           rng: Optional[np.random.Generator] = None,
                           n_values: int = N_BANDWIDTHS) -> np.ndarray:
    """Log-spaced bandwidths between the 10th and 90th percentiles of pairwise distances"""
    rng = rng or np.random.default_rng(0)
    pool = np.vstack([train_X, test_X])
    if pool.shape[0] > BANDWIDTH_POOL:
        pool = pool[rng.choice(pool.shape[0], size=BANDWIDTH_POOL, replace=False)]
    distances = pdist(pool)
    distances = distances[distances > 0]
    if distances.size == 0:
        return np.array([1.0])
    low, high = np.percentile(distances, [10, 90])
    if not high > low:
        return np.array([float(low)])
    return np.geomspace(low, high, n_values)


def _fit_coefficients(K_train: np.ndarray, K_test: np.ndarray, ridge: float) -> np.ndarray:
    n = K_train.shape[0]
    H = K_train.T @ K_train / n
    h = K_test.mean(axis=0)
    try:
        alpha = linalg.solve(H + ridge * np.eye(H.shape[0]), h, assume_a='sym')
    except linalg.LinAlgError as e:
        raise NumericalError(f"uLSIF system is singular (ridge={ridge:g})") from e
    if not np.isfinite(alpha).all():
        raise NumericalError(f"uLSIF system produced non-finite coefficients (ridge={ridge:g})")
    return alpha


def _loocv_scores(K_train: np.ndarray, K_test: np.ndarray, ridges: Sequence[float],
                  rows_train: np.ndarray, rows_test: np.ndarray) -> np.ndarray:
    """Closed-form leave-one-out scores, one per ridge value

    Pairs of held-out points (one train, one test) are removed together; the
    score is the uLSIF objective mean(w_train^2) / 2 - mean(w_test) on them.
    """
    n, b = K_train.shape
    m = K_test.shape[0]
    H = K_train.T @ K_train / n
    h = K_test.mean(axis=0)
    X_de = K_train[rows_train].T
    X_nu = K_test[rows_test].T

    scores = np.full(len(ridges), np.inf)
    for i, ridge in enumerate(ridges):
        B = H + np.eye(b) * ridge * (n - 1) / n
        try:
            B_inv_X = linalg.solve(B, X_de, assume_a='sym')
            B_inv_h = linalg.solve(B, h, assume_a='sym')
            B_inv_nu = linalg.solve(B, X_nu, assume_a='sym')
        except linalg.LinAlgError:
            logger.debug("Singular LOOCV system at ridge=%g; skipped", ridge)
            continue
        denom = n - np.sum(X_de * B_inv_X, axis=0)
        B0 = B_inv_h[:, None] + B_inv_X * ((h @ B_inv_X) / denom)[None, :]
        B1 = B_inv_nu + B_inv_X * (np.sum(X_nu * B_inv_X, axis=0) / denom)[None, :]
        B2 = np.maximum(0.0, (n - 1) * (m * B0 - B1) / (n * (m - 1)))
        w_de = np.sum(X_de * B2, axis=0)
        w_nu = np.sum(X_nu * B2, axis=0)
        score = np.mean(w_de ** 2) / 2.0 - np.mean(w_nu)
        if np.isfinite(score):
            scores[i] = score
    return scores


def _score_bandwidth(train_X, test_X, centroids, bandwidth, ridges, rows_train, rows_test):
    K_train = gaussian_kernel(train_X, centroids, bandwidth)
    K_test = gaussian_kernel(test_X, centroids, bandwidth)
    return _loocv_scores(K_train, K_test, ridges, rows_train, rows_test)


def _select(bandwidths: np.ndarray, ridges: np.ndarray, scores: np.ndarray) -> Tuple[int, int]:
    """Minimum score; ties go to the smaller bandwidth, then the larger ridge"""
    best, best_ij = np.inf, None
    for i in np.argsort(bandwidths, kind='stable'):
        for j in sorted(range(len(ridges)), key=lambda k: -ridges[k]):
            if scores[i, j] < best:
                best, best_ij = scores[i, j], (i, j)
    if best_ij is None:
        raise NumericalError("every (bandwidth, ridge) pair gave a singular or non-finite LOOCV score")
    return best_ij


def ulsif_fit(train_X, test_X, bandwidth_grid: Optional[Sequence[float]] = None,
              ridge_grid: Optional[Sequence[float]] = None,
              max_centroids: int = DEFAULT_MAX_CENTROIDS, seed: int = 0,
              n_jobs: int = 1) -> UlsifModel:
    """
    Fit a uLSIF density-ratio model

    Args:
        train_X: n x p training covariates (denominator density)
        test_X: m x p test covariates (numerator density)
        bandwidth_grid: Candidate kernel widths; None uses the distance-percentile default
        ridge_grid: Candidate ridge penalties; None uses 1e-3 .. 1e1
        max_centroids: Cap on the number of test points used as kernel centres
        seed: Seed for centroid subsampling and the LOOCV hold-out order
        n_jobs: joblib workers over bandwidth values

    Returns:
        UlsifModel
    """
    train_X = _as_matrix(train_X, 'train_X')
    test_X = _as_matrix(test_X, 'test_X')
    if train_X.shape[1] != test_X.shape[1]:
        raise DomainError(
            f"train_X has {train_X.shape[1]} columns but test_X has {test_X.shape[1]}"
        )
    if max_centroids < 1:
        raise ConfigurationError(f"max_centroids must be >= 1, got {max_centroids}")

    centroid_seq, grid_seq, cv_seq = np.random.SeedSequence(seed).spawn(3)
    n, m = train_X.shape[0], test_X.shape[0]
    b = min(m, max_centroids)
    centroids = test_X[np.random.default_rng(centroid_seq).choice(m, size=b, replace=False)]

    if bandwidth_grid is None:
        bandwidths = default_bandwidth_grid(train_X, test_X, np.random.default_rng(grid_seq))
    else:
        bandwidths = np.asarray(bandwidth_grid, dtype=np.float64).reshape(-1)
    ridges = np.asarray(DEFAULT_RIDGE_GRID if ridge_grid is None else ridge_grid,
                        dtype=np.float64).reshape(-1)
    if bandwidths.size == 0 or ridges.size == 0:
        raise ConfigurationError("bandwidth_grid and ridge_grid must be nonempty")
    if (bandwidths <= 0).any() or (ridges < 0).any():
        raise ConfigurationError("bandwidths must be > 0 and ridges >= 0")

    selection = None
    if bandwidths.size == 1 and ridges.size == 1:
        bandwidth, ridge = float(bandwidths[0]), float(ridges[0])
    else:
        if n < 2 or m < 2:
            raise ConfigurationError("cross-validating the grids needs at least 2 train and 2 test rows")
        n_held = min(n, m)
        cv_rng = np.random.default_rng(cv_seq)
        rows_train = cv_rng.permutation(n)[:n_held]
        rows_test = cv_rng.permutation(m)[:n_held]
        scores = Parallel(n_jobs=n_jobs)(
            delayed(_score_bandwidth)(train_X, test_X, centroids, s, ridges, rows_train, rows_test)
            for s in bandwidths
        )
        scores = np.vstack(scores)
        i, j = _select(bandwidths, ridges, scores)
        bandwidth, ridge = float(bandwidths[i]), float(ridges[j])
        selection = pd.DataFrame({
            'bandwidth': np.repeat(bandwidths, ridges.size),
            'ridge': np.tile(ridges, bandwidths.size),
            'loocv_score': scores.reshape(-1),
        })

    alpha = _fit_coefficients(gaussian_kernel(train_X, centroids, bandwidth),
                              gaussian_kernel(test_X, centroids, bandwidth), ridge)
    logger.info("uLSIF fitted: %d centroids, bandwidth=%.4g, ridge=%.4g", b, bandwidth, ridge)
    return UlsifModel(centroids=centroids, coefficients=alpha, bandwidth=bandwidth,
                      ridge=ridge, selection=selection)


def ulsif_predict(model: UlsifModel, X) -> np.ndarray:
    """Clamped ratio estimates max(0, K alpha) for the rows of X"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if model.n_features == 1 else X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DomainError(f"expected {model.n_features} columns, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise DomainError("X must be finite")
    return np.maximum(0.0, gaussian_kernel(X, model.centroids, model.bandwidth) @ model.coefficients)
