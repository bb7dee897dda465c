"""
Data models shared by the parsers, generators and forests
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigurationError, DomainError


def default_feature_names(n_features: int) -> List[str]:
    """x1, x2, ... naming used by the generators and by unnamed arrays"""
    return [f"x{j + 1}" for j in range(n_features)]


@dataclass(eq=False)
class Dataset:
    """Feature matrix with an optional response and a missingness mask

    Missing cells hold NaN in `features`; `missing_mask` is authoritative and
    every NaN must be flagged in it.
    """
    features: np.ndarray
    feature_names: List[str] = field(default_factory=list)
    response: Optional[np.ndarray] = None
    missing_mask: Optional[np.ndarray] = None
    response_name: Optional[str] = None
    source_file: Optional[str] = None

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise ConfigurationError(
                f"features must be a non-empty 2-D matrix, got shape {features.shape}"
            )
        n, p = features.shape

        if self.missing_mask is None:
            mask = np.isnan(features)
        else:
            mask = np.array(self.missing_mask, dtype=bool)
            if mask.shape != features.shape:
                raise ConfigurationError(
                    f"missing_mask shape {mask.shape} does not match features {features.shape}"
                )
            unflagged = np.isnan(features) & ~mask
            if unflagged.any():
                i, j = np.argwhere(unflagged)[0]
                raise DomainError(f"NaN at row {i + 1}, column {j + 1} is not flagged as missing")
        features[mask] = np.nan
        if np.isinf(features).any():
            raise DomainError("features must be finite")

        names = list(self.feature_names) if self.feature_names else default_feature_names(p)
        if len(names) != p:
            raise ConfigurationError(f"expected {p} feature names, got {len(names)}")

        response = None
        if self.response is not None:
            response = np.array(self.response, dtype=np.float64).reshape(-1)
            if response.shape[0] != n:
                raise ConfigurationError(
                    f"response length {response.shape[0]} does not match {n} rows"
                )
            if not np.isfinite(response).all():
                raise DomainError("response must be finite; missing responses are not supported")

        self.features = features
        self.missing_mask = mask
        self.feature_names = names
        self.response = response
        if response is not None and self.response_name is None:
            self.response_name = "y"

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def has_response(self) -> bool:
        return self.response is not None

    @property
    def has_missing(self) -> bool:
        return bool(self.missing_mask.any())

    @property
    def missing_columns(self) -> List[int]:
        """Indices of columns with at least one missing cell"""
        return [int(j) for j in np.flatnonzero(self.missing_mask.any(axis=0))]

    @property
    def complete_columns(self) -> List[int]:
        """Indices of fully observed columns"""
        return [int(j) for j in np.flatnonzero(~self.missing_mask.any(axis=0))]

    def missing_counts(self) -> dict:
        """Missing cell count per column name (columns without gaps omitted)"""
        counts = self.missing_mask.sum(axis=0)
        return {self.feature_names[j]: int(counts[j]) for j in self.missing_columns}

    def require_response(self) -> np.ndarray:
        if self.response is None:
            raise ConfigurationError("dataset has no response column")
        return self.response

    def select_features(self, names: Sequence[str]) -> "Dataset":
        """Dataset restricted to the named feature columns, in the given order"""
        lookup = {name: j for j, name in enumerate(self.feature_names)}
        missing = [name for name in names if name not in lookup]
        if missing:
            raise ConfigurationError(f"columns not found: {', '.join(missing)}")
        idx = [lookup[name] for name in names]
        return Dataset(
            features=self.features[:, idx],
            feature_names=list(names),
            response=self.response,
            missing_mask=self.missing_mask[:, idx],
            response_name=self.response_name,
            source_file=self.source_file,
        )

    def with_features(self, features: np.ndarray, missing_mask: Optional[np.ndarray] = None) -> "Dataset":
        """Copy carrying new feature values and the same names and response"""
        return Dataset(
            features=features,
            feature_names=list(self.feature_names),
            response=self.response,
            missing_mask=missing_mask,
            response_name=self.response_name,
            source_file=self.source_file,
        )

    def to_frame(self) -> pd.DataFrame:
        """DataFrame with feature columns followed by the response column"""
        frame = pd.DataFrame(self.features, columns=self.feature_names)
        if self.response is not None:
            frame[self.response_name] = self.response
        return frame

    def to_dict(self) -> dict:
        """Summary of the dataset (shape, names, missingness)"""
        return {
            'source_file': self.source_file,
            'rows': self.n_rows,
            'features': self.n_features,
            'feature_names': list(self.feature_names),
            'response_name': self.response_name if self.has_response else None,
            'missing_cells': int(self.missing_mask.sum()),
            'missing_by_column': self.missing_counts(),
        }


@dataclass(eq=False)
class ImportanceWeights:
    """Raw density-ratio weights and their smoothed version w^lambda

    raw: nonnegative ratio estimates, one per training row
    smoothing_exponent: lambda in (0, 1] applied as effective = raw ** lambda
    effective: the weights the forest is fitted with
    n_eff: effective sample size of `effective`
    target_reached: False when the requested n_eff was out of reach
    """
    raw: np.ndarray
    smoothing_exponent: float
    effective: np.ndarray
    n_eff: float
    target_reached: bool = True

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.float64)
        self.effective = np.asarray(self.effective, dtype=np.float64)
        if self.raw.ndim != 1 or self.effective.shape != self.raw.shape:
            raise ConfigurationError("raw and effective weights must be 1-D and of equal length")
        if not np.isfinite(self.raw).all() or (self.raw < 0).any():
            raise DomainError("raw weights must be finite and nonnegative")
        if not 0.0 < self.smoothing_exponent <= 1.0:
            raise DomainError(f"smoothing exponent must be in (0, 1], got {self.smoothing_exponent}")

    def __len__(self) -> int:
        return int(self.raw.shape[0])

    def to_dict(self) -> dict:
        return {
            'n': len(self),
            'smoothing_exponent': float(self.smoothing_exponent),
            'n_eff': float(self.n_eff),
            'target_reached': bool(self.target_reached),
        }
