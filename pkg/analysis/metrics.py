"""
Point and interval accuracy metrics with the composite score

score = (1/MAE + 1/RMSE + 4/width) * coverage / (1 - alpha)
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from input_parsers.errors import ConfigurationError, DomainError

DEFAULT_ALPHA = 0.1


def composite_score(mae: float, rmse: float, coverage: float, interval_width: float,
                    alpha_level: float = DEFAULT_ALPHA) -> float:
    """Score from its four components; +inf when MAE, RMSE or width is zero"""
    if not 0.0 < alpha_level < 1.0:
        raise ConfigurationError(f"alpha_level must be in (0, 1), got {alpha_level}")
    if mae == 0 or rmse == 0 or interval_width == 0:
        return math.inf
    return (1.0 / mae + 1.0 / rmse + 4.0 / interval_width) * coverage / (1.0 - alpha_level)


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    mae: float
    coverage: float
    interval_width: float
    score: float
    alpha_level: float = DEFAULT_ALPHA

    @classmethod
    def from_components(cls, rmse: float, mae: float, coverage: float, interval_width: float,
                        alpha_level: float = DEFAULT_ALPHA) -> "MetricsReport":
        return cls(
            rmse=float(rmse),
            mae=float(mae),
            coverage=float(coverage),
            interval_width=float(interval_width),
            score=composite_score(mae, rmse, coverage, interval_width, alpha_level),
            alpha_level=float(alpha_level),
        )

    @property
    def score_is_infinite(self) -> bool:
        return math.isinf(self.score)

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(y_true, y_pred_mean, interval_lo, interval_hi,
                    alpha_level: float = DEFAULT_ALPHA) -> MetricsReport:
    """
    RMSE, MAE, interval coverage and width, and the composite score

    Args:
        y_true: Observed responses
        y_pred_mean: Mean predictions
        interval_lo: Lower interval bounds
        interval_hi: Upper interval bounds, elementwise >= interval_lo
        alpha_level: Lower quantile level of the interval; the score divides by 1 - alpha

    Returns:
        MetricsReport
    """
    arrays = [np.asarray(a, dtype=np.float64).reshape(-1)
              for a in (y_true, y_pred_mean, interval_lo, interval_hi)]
    y, mean, lo, hi = arrays
    if len({a.shape[0] for a in arrays}) != 1 or y.shape[0] == 0:
        raise ConfigurationError("y_true, predictions and interval bounds must have equal nonzero length")
    if (lo > hi).any():
        raise DomainError("interval_lo exceeds interval_hi for some rows")

    residual = y - mean
    return MetricsReport.from_components(
        rmse=float(np.sqrt(np.mean(residual ** 2))),
        mae=float(np.mean(np.abs(residual))),
        coverage=float(np.mean((y >= lo) & (y <= hi))),
        interval_width=float(np.mean(hi - lo)),
        alpha_level=alpha_level,
    )
