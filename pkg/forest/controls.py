"""
Forest control parameters
"""
import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

from input_parsers.errors import ConfigurationError


@dataclass(frozen=True)
class ForestControls:
    """Controls of a locally optimized random forest

    n_trees: number of trees (B)
    mtry: features eligible per split; None means ceil(p / 3)
    nodesize: minimum rows in a terminal node (raw rows, not weight mass)
    max_terminal_nodes: cap on leaves per tree (m_n); None means unlimited
    sample_fraction: per-tree resample size as a fraction of n (k_n / n)
    with_replacement: draw the resample with replacement
    seed: master seed; per-tree seeds are spawned from it
    """
    n_trees: int = 500
    mtry: Optional[int] = None
    nodesize: int = 5
    max_terminal_nodes: Optional[int] = None
    sample_fraction: float = 0.6
    with_replacement: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigurationError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigurationError(f"mtry must be >= 1, got {self.mtry}")
        if self.nodesize < 1:
            raise ConfigurationError(f"nodesize must be >= 1, got {self.nodesize}")
        if self.max_terminal_nodes is not None and self.max_terminal_nodes < 1:
            raise ConfigurationError(
                f"max_terminal_nodes must be >= 1, got {self.max_terminal_nodes}"
            )
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ConfigurationError(
                f"sample_fraction must be in (0, 1], got {self.sample_fraction}"
            )

    def resolve_mtry(self, n_features: int) -> int:
        """Effective mtry for p features"""
        mtry = self.mtry if self.mtry is not None else max(1, math.ceil(n_features / 3))
        if mtry > n_features:
            raise ConfigurationError(f"mtry={mtry} exceeds the {n_features} available features")
        return mtry

    def resample_size(self, n_rows: int) -> int:
        """k_n = ceil(sample_fraction * n), at least 1"""
        # Guard against 0.6 * 1000 landing a hair above 600
        return max(1, math.ceil(self.sample_fraction * n_rows - 1e-9))

    def with_changes(self, **changes) -> "ForestControls":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ForestControls":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)
