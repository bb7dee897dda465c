"""
Effective sample size and weight smoothing

Raw ratio weights are shrunk by raising them to a power lambda in (0, 1]. The
exponent is chosen so that the effective sample size of w^lambda equals a
target n0; n_eff(w^lambda) decreases in lambda, so the root is bracketed
between a tiny lambda (n_eff near the count of positive weights) and 1.
"""
import logging
import warnings
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from input_parsers.errors import ConfigurationError, DomainError
from input_parsers.models import ImportanceWeights

logger = logging.getLogger(__name__)

LAMBDA_FLOOR = 1e-9
BISECTION_MAXITER = 200
GRID_STEP = 1e-3
RESIDUAL_TOL = 1e-6


class SmoothingTargetWarning(UserWarning):
    """No exponent in (0, 1] reaches the requested effective sample size"""


def _check_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ConfigurationError("weights must be a non-empty 1-D array")
    if not np.isfinite(w).all() or (w < 0).any():
        raise DomainError("weights must be finite and nonnegative")
    if not (w > 0).any():
        raise DomainError("weights are all zero; effective sample size is undefined")
    return w


def effective_sample_size(weights) -> float:
    """(sum w)^2 / sum w^2, which lies in [1, n]"""
    w = _check_weights(weights)
    scaled = w / w.max()
    n_eff = scaled.sum() ** 2 / np.dot(scaled, scaled)
    return float(np.clip(n_eff, 1.0, w.size))


def _powered_n_eff(log_w: np.ndarray, lam: float) -> float:
    # log_w holds the logs of the positive weights shifted so the max is 0
    powered = np.exp(lam * log_w)
    return float(powered.sum() ** 2 / np.dot(powered, powered))


def _grid_search(log_w: np.ndarray, n0: float) -> float:
    grid = np.arange(GRID_STEP, 1.0 + GRID_STEP / 2, GRID_STEP)
    residuals = np.array([abs(_powered_n_eff(log_w, lam) - n0) for lam in grid])
    return float(grid[residuals.argmin()])


def _solve_exponent(w: np.ndarray, n0: float) -> Tuple[float, bool]:
    n = w.size
    if not 1.0 < n0 < n:
        raise ConfigurationError(f"n0 must be in (1, {n}), got {n0}")
    if effective_sample_size(w) >= n0 - 1e-12 * n:
        return 1.0, True

    positive = w[w > 0]
    log_w = np.log(positive)
    log_w -= log_w.max()

    def excess(lam: float) -> float:
        return _powered_n_eff(log_w, lam) - n0

    if excess(LAMBDA_FLOOR) < 0:
        warnings.warn(
            f"target n_eff={n0:.4g} exceeds what smoothing can reach "
            f"({positive.size} positive weights); using lambda={LAMBDA_FLOOR:g}",
            SmoothingTargetWarning,
            stacklevel=3,
        )
        logger.warning("Smoothing target n0=%.4g unreachable; returning boundary exponent", n0)
        return LAMBDA_FLOOR, False

    lam = optimize.bisect(excess, LAMBDA_FLOOR, 1.0, xtol=1e-14, maxiter=BISECTION_MAXITER,
                          disp=False)
    if abs(excess(lam)) > RESIDUAL_TOL * n:
        # n_eff was not monotone on this vector
        lam = _grid_search(log_w, n0)
        logger.warning("Bisection residual too large; grid search chose lambda=%.3f", lam)
    logger.debug("Smoothing exponent %.6g reaches n_eff=%.4f (target %.4f)",
                 lam, _powered_n_eff(log_w, lam), n0)
    return float(lam), True


def solve_smoothing_exponent(weights, n0: float) -> float:
    """
    Exponent lambda with n_eff(w^lambda) = n0

    Args:
        weights: Nonnegative raw weights, not all zero
        n0: Target effective sample size in (1, n)

    Returns:
        1.0 when n_eff(w) already reaches n0; otherwise the root in (0, 1).
        When no exponent reaches n0 the lower boundary is returned and a
        SmoothingTargetWarning is issued.
    """
    lam, _ = _solve_exponent(_check_weights(weights), n0)
    return lam


def regularize_weights(raw, n0: Optional[float] = None,
                       n0_fraction: Optional[float] = None) -> ImportanceWeights:
    """
    Smooth raw ratio weights to a target effective sample size

    Args:
        raw: Nonnegative raw weights
        n0: Target effective sample size
        n0_fraction: Target as a fraction of n (used when n0 is None)

    Returns:
        ImportanceWeights
    """
    w = _check_weights(raw)
    if n0 is None:
        if n0_fraction is None:
            raise ConfigurationError("give n0 or n0_fraction")
        if not 0.0 < n0_fraction < 1.0:
            raise ConfigurationError(f"n0_fraction must be in (0, 1), got {n0_fraction}")
        n0 = n0_fraction * w.size

    lam, reached = _solve_exponent(w, n0)
    effective = np.power(w, lam) if lam < 1.0 else w.copy()
    n_eff = effective_sample_size(effective)
    logger.info("Regularized weights: lambda=%.4f, n_eff=%.1f of n=%d", lam, n_eff, w.size)
    return ImportanceWeights(raw=w, smoothing_exponent=lam, effective=effective,
                             n_eff=n_eff, target_reached=reached)
