"""
Weighted regression tree

Splits and leaf predictions are computed under the within-node weighted
empirical measure: each row in a node carries mass w_i / sum_node(w). The
split gain is the weighted variance of the node minus the mass-weighted
variances of the two children. Growth is breadth-first over a depth-indexed
frontier and stops at max_terminal_nodes leaves or when no admissible split
remains.
"""
import logging
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from input_parsers.errors import ConfigurationError, DomainError
from input_parsers.models import Dataset

from .controls import ForestControls

logger = logging.getLogger(__name__)

LEAF = -1
# Gains at or below this fraction of the node variance count as zero
RELATIVE_GAIN_TOL = 1e-12


class ZeroWeightNodeWarning(UserWarning):
    """A node's resampled weights summed to zero; uniform weights were used in it"""


@dataclass(frozen=True)
class SplitCandidate:
    """Feature j, threshold z and the gain of splitting at x_j < z"""
    feature_index: int
    threshold: float
    gain: float


def split_gain(features: np.ndarray, response: np.ndarray, weights: np.ndarray,
               node_rows: np.ndarray, feature: int, threshold: float,
               nodesize: int = 1) -> Optional[float]:
    """
    Weighted variance reduction of one candidate split

    Args:
        features: n x p feature matrix
        response: length-n response
        weights: length-n nonnegative weights
        node_rows: row indices in the node (repeats allowed)
        feature: column index j
        threshold: rows with x_j < threshold go left
        nodesize: minimum rows per child

    Returns:
        The gain, or None when the candidate is inadmissible (a child has
        fewer than nodesize rows or zero total weight)
    """
    rows = np.asarray(node_rows, dtype=np.intp)
    x = np.asarray(features, dtype=np.float64)[rows, feature]
    y = np.asarray(response, dtype=np.float64)[rows]
    w = np.asarray(weights, dtype=np.float64)[rows]

    left = x < threshold
    if left.sum() < nodesize or (~left).sum() < nodesize:
        return None
    w_left, w_right = w[left].sum(), w[~left].sum()
    if not (w_left > 0 and w_right > 0):
        return None

    w_total = w_left + w_right
    centered = y - np.dot(w, y) / w_total
    s_left = np.dot(w[left], centered[left])
    s_right = np.dot(w[~left], centered[~left])
    s_total = s_left + s_right
    return float((s_left ** 2 / w_left + s_right ** 2 / w_right - s_total ** 2 / w_total) / w_total)


@dataclass(eq=False)
class WeightedTree:
    """A fitted weighted tree stored as flat node arrays

    Internal nodes route x to `left[node]` when x[feature[node]] < threshold[node],
    else to `right[node]`; leaves have left == right == -1. `value` holds the
    weighted node mean. Leaf payloads map a leaf id to the training rows that
    reached it (unique dataset indices) and their summed resampled weights.
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    leaf_rows: Dict[int, np.ndarray]
    leaf_weights: Dict[int, np.ndarray]
    resample_indices: np.ndarray
    randomization_seed: int
    fallback_nodes: int = 0
    depth: np.ndarray = field(default=None)

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_rows)

    def is_leaf(self, node: int) -> bool:
        return self.left[node] == LEAF

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id reached by each row of X"""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = np.flatnonzero(self.left[node] != LEAF)
        while active.size:
            current = node[active]
            go_left = X[active, self.feature[current]] < self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.left[node[active]] != LEAF]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Weighted leaf means T_w(x)"""
        return self.value[self.apply(X)]

    def leaf_distribution(self, leaf: int) -> Tuple[np.ndarray, np.ndarray]:
        """Rows of a leaf and their normalized weights t_i (summing to 1)"""
        weights = self.leaf_weights[leaf]
        return self.leaf_rows[leaf], weights / weights.sum()


def draw_resample(n_rows: int, controls: ForestControls, rng: np.random.Generator) -> np.ndarray:
    """k_n row indices, with or without replacement"""
    size = controls.resample_size(n_rows)
    return rng.choice(n_rows, size=size, replace=controls.with_replacement)


class _TreeGrower:
    """Breadth-first growth of one weighted tree on a resample"""

    def __init__(self, X: np.ndarray, y: np.ndarray, w: np.ndarray, mtry: int,
                 nodesize: int, max_terminal_nodes: Optional[int], rng: np.random.Generator):
        self.X = X
        self.y = y
        self.w = w
        self.mtry = mtry
        self.nodesize = nodesize
        self.max_terminal_nodes = max_terminal_nodes
        self.rng = rng
        self.fallback_nodes = 0

        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[float] = []
        self.depth: List[int] = []
        self.members: List[np.ndarray] = []

    def _node_weights(self, members: np.ndarray) -> np.ndarray:
        w = self.w[members]
        total = w.sum()
        if not (np.isfinite(total) and total > 0):
            # The weighted measure is undefined here
            self.fallback_nodes += 1
            return np.ones_like(w)
        return w

    def _add_node(self, members: np.ndarray, depth: int) -> int:
        w = self._node_weights(members)
        self.feature.append(LEAF)
        self.threshold.append(np.nan)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(float(np.dot(w, self.y[members]) / w.sum()))
        self.depth.append(depth)
        self.members.append(members)
        return len(self.feature) - 1

    def best_split(self, members: np.ndarray) -> Optional[SplitCandidate]:
        """Highest-gain admissible split over a random subset of mtry features

        Ties go to the smallest feature index, then the smallest threshold.
        """
        k = members.shape[0]
        if k < 2 * self.nodesize:
            return None

        w = self._node_weights(members)
        y = self.y[members]
        w_total = w.sum()
        centered = y - np.dot(w, y) / w_total
        node_var = np.dot(w, centered ** 2) / w_total
        if not node_var > 0:
            return None

        p = self.X.shape[1]
        feats = np.sort(self.rng.choice(p, size=self.mtry, replace=False))
        Xs = self.X[np.ix_(members, feats)]
        order = np.argsort(Xs, axis=0, kind='stable')
        xs = np.take_along_axis(Xs, order, axis=0)
        ws = w[order]
        wy = ws * centered[order]

        # Prefix sums give the left child of a split after sorted position i,
        # reversed suffix sums give the right child
        w_left = np.cumsum(ws, axis=0)[:-1]
        s_left = np.cumsum(wy, axis=0)[:-1]
        w_right = np.cumsum(ws[::-1], axis=0)[::-1][1:]
        s_right = np.cumsum(wy[::-1], axis=0)[::-1][1:]
        s_total = s_left + s_right
        n_left = np.arange(1, k)[:, None]

        valid = (
            (xs[1:] > xs[:-1])
            & (n_left >= self.nodesize)
            & (k - n_left >= self.nodesize)
            & (w_left > 0)
            & (w_right > 0)
        )
        with np.errstate(divide='ignore', invalid='ignore'):
            gain = (s_left ** 2 / w_left + s_right ** 2 / w_right - s_total ** 2 / w_total) / w_total
        gain = np.where(valid, gain, -np.inf)

        best = gain.max()
        if not best > RELATIVE_GAIN_TOL * node_var:
            return None
        ties = np.argwhere(gain == best)
        col = ties[:, 1].min()
        pos = ties[ties[:, 1] == col, 0].min()

        lo, hi = xs[pos, col], xs[pos + 1, col]
        threshold = 0.5 * (lo + hi)
        if not threshold < hi:
            # Adjacent floats: no value strictly between, x < hi splits the same way
            threshold = hi
        return SplitCandidate(feature_index=int(feats[col]), threshold=float(threshold), gain=float(best))

    def grow(self, members: np.ndarray) -> None:
        """Depth-indexed frontier: split the first node at the current depth until
        the leaf budget is spent or no frontier node can be split"""
        frontiers = [deque([self._add_node(members, 0)])]
        n_terminal = 1
        depth = 0
        while self.max_terminal_nodes is None or n_terminal < self.max_terminal_nodes:
            if not frontiers[depth]:
                if depth + 1 >= len(frontiers):
                    break
                depth += 1
                continue

            node = frontiers[depth].popleft()
            split = self.best_split(self.members[node])
            if split is None:
                continue

            node_members = self.members[node]
            goes_left = self.X[node_members, split.feature_index] < split.threshold
            left = self._add_node(node_members[goes_left], depth + 1)
            right = self._add_node(node_members[~goes_left], depth + 1)
            self.feature[node] = split.feature_index
            self.threshold[node] = split.threshold
            self.left[node] = left
            self.right[node] = right
            if len(frontiers) == depth + 1:
                frontiers.append(deque())
            frontiers[depth + 1].extend((left, right))
            n_terminal += 1

    def leaf_payloads(self, resample: np.ndarray) -> Tuple[Dict[int, np.ndarray], Dict[int, np.ndarray]]:
        """Unique dataset rows per leaf with their resampled weights summed over copies"""
        rows: Dict[int, np.ndarray] = {}
        weights: Dict[int, np.ndarray] = {}
        for node, members in enumerate(self.members):
            if self.left[node] != LEAF:
                continue
            w = self.w[members]
            if not (np.isfinite(w.sum()) and w.sum() > 0):
                w = np.ones_like(w)
            unique_rows, inverse = np.unique(resample[members], return_inverse=True)
            rows[node] = unique_rows
            weights[node] = np.bincount(inverse, weights=w, minlength=unique_rows.shape[0])
        return rows, weights


def _check_tree_inputs(features: np.ndarray, response: np.ndarray, weights: np.ndarray):
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ConfigurationError("features must be a non-empty 2-D matrix")
    if y.shape != (X.shape[0],) or w.shape != (X.shape[0],):
        raise ConfigurationError("response and weights must align with the feature rows")
    if not np.isfinite(X).all():
        raise DomainError("features must be finite; impute missing values first")
    if not np.isfinite(w).all() or (w < 0).any():
        raise DomainError("weights must be finite and nonnegative")
    return X, y, w


def grow_tree_arrays(features: np.ndarray, response: np.ndarray, weights: np.ndarray,
                     controls: ForestControls, seed: int) -> WeightedTree:
    """Grow one tree from arrays; the seed drives the resample and feature subsets"""
    X, y, w = _check_tree_inputs(features, response, weights)
    mtry = controls.resolve_mtry(X.shape[1])
    rng = np.random.default_rng(seed)

    resample = draw_resample(X.shape[0], controls, rng)
    if resample.size == 0:
        raise ConfigurationError("empty resample")
    grower = _TreeGrower(X[resample], y[resample], w[resample], mtry,
                         controls.nodesize, controls.max_terminal_nodes, rng)
    grower.grow(np.arange(resample.shape[0]))
    leaf_rows, leaf_weights = grower.leaf_payloads(resample)

    if grower.fallback_nodes:
        warnings.warn(
            f"{grower.fallback_nodes} node(s) had zero total weight; uniform weights used there",
            ZeroWeightNodeWarning,
        )
        logger.warning("Tree seed %d: %d zero-weight node(s) fell back to uniform weights",
                       seed, grower.fallback_nodes)

    return WeightedTree(
        feature=np.asarray(grower.feature, dtype=np.intp),
        threshold=np.asarray(grower.threshold, dtype=np.float64),
        left=np.asarray(grower.left, dtype=np.intp),
        right=np.asarray(grower.right, dtype=np.intp),
        value=np.asarray(grower.value, dtype=np.float64),
        leaf_rows=leaf_rows,
        leaf_weights=leaf_weights,
        resample_indices=np.asarray(resample, dtype=np.intp),
        randomization_seed=int(seed),
        fallback_nodes=grower.fallback_nodes,
        depth=np.asarray(grower.depth, dtype=np.intp),
    )


def grow_weighted_tree(dataset: Dataset, weights: np.ndarray, controls: ForestControls,
                       seed: int) -> WeightedTree:
    """
    Grow one weighted regression tree

    Args:
        dataset: Training data with a response and no missing cells
        weights: Per-row nonnegative weights aligned with the dataset
        controls: Forest controls (mtry, nodesize, max_terminal_nodes, resampling)
        seed: Randomization seed for the resample and per-node feature subsets

    Returns:
        WeightedTree
    """
    return grow_tree_arrays(dataset.features, dataset.require_response(), weights, controls, seed)
