"""
Tests for the weighted split criterion and tree growth
"""
from collections import deque

import numpy as np
import pytest

from forest.controls import ForestControls
from forest.tree import (
    LEAF,
    ZeroWeightNodeWarning,
    grow_tree_arrays,
    grow_weighted_tree,
    split_gain,
)
from input_parsers.errors import ConfigurationError, DomainError
from input_parsers.models import Dataset

STEP_X = np.array([[1.0], [2.0], [3.0], [4.0]])
STEP_Y = np.array([0.0, 0.0, 10.0, 10.0])


class TestSplitGain:

    def test_pure_children(self):
        assert split_gain(STEP_X, STEP_Y, np.ones(4), np.arange(4), 0, 2.5) == pytest.approx(25.0)

    def test_uneven_split(self):
        gain = split_gain(STEP_X, STEP_Y, np.ones(4), np.arange(4), 0, 1.5)
        assert gain == pytest.approx(25.0 - 50.0 / 3.0)

    def test_weight_scale_cancels(self):
        w = np.array([0.3, 1.2, 2.0, 0.5])
        base = split_gain(STEP_X, STEP_Y, w, np.arange(4), 0, 2.5)
        assert split_gain(STEP_X, STEP_Y, 7.0 * w, np.arange(4), 0, 2.5) == pytest.approx(base)

    def test_weights_move_the_node_mean(self):
        # mass (1, 1, 1, 3): parent mean 40/6, children pure
        w = np.array([1.0, 1.0, 1.0, 3.0])
        mean = 40.0 / 6.0
        expected = (2 * mean ** 2 + 4 * (10 - mean) ** 2) / 6.0
        assert split_gain(STEP_X, STEP_Y, w, np.arange(4), 0, 2.5) == pytest.approx(expected)

    def test_inadmissible_candidates(self):
        rows = np.arange(4)
        assert split_gain(STEP_X, STEP_Y, np.ones(4), rows, 0, 1.5, nodesize=2) is None
        assert split_gain(STEP_X, STEP_Y, np.ones(4), rows, 0, 0.5) is None
        assert split_gain(STEP_X, STEP_Y, np.array([0.0, 0.0, 1.0, 1.0]), rows, 0, 2.5) is None


def _full_controls(**changes):
    base = ForestControls(n_trees=1, nodesize=1, sample_fraction=1.0, seed=0)
    return base.with_changes(**changes)


class TestGrowth:

    def test_single_leaf_predicts_resample_mean(self):
        rng = np.random.default_rng(0)
        X, y = rng.normal(size=(40, 2)), rng.normal(size=40)
        w = rng.uniform(0.5, 2.0, size=40)
        tree = grow_tree_arrays(X, y, w, ForestControls(max_terminal_nodes=1), seed=3)
        rows = tree.resample_indices
        assert tree.n_leaves == 1
        assert tree.predict(X[:1])[0] == pytest.approx(np.dot(w[rows], y[rows]) / w[rows].sum())

    def test_weighted_leaf_mean(self):
        tree = grow_tree_arrays(np.array([[0.0], [1.0]]), np.array([2.0, 4.0]), np.array([1.0, 3.0]),
                                _full_controls(nodesize=5), seed=0)
        assert tree.predict(np.array([[0.5]]))[0] == pytest.approx(3.5)

    def test_step_function_is_learned(self):
        tree = grow_tree_arrays(STEP_X, STEP_Y, np.ones(4), _full_controls(), seed=0)
        assert tree.feature[0] == 0
        assert tree.threshold[0] == pytest.approx(2.5)
        np.testing.assert_allclose(tree.predict(STEP_X), STEP_Y)

    def test_leaves_cover_resample_and_respect_nodesize(self, regression_data):
        controls = ForestControls(nodesize=6, seed=0)
        tree = grow_weighted_tree(regression_data, np.ones(regression_data.n_rows), controls, seed=5)
        covered = np.concatenate([tree.leaf_rows[leaf] for leaf in tree.leaf_rows])
        assert np.array_equal(np.sort(covered), np.sort(tree.resample_indices))
        for leaf, weights in tree.leaf_weights.items():
            assert weights.sum() >= 6
            assert tree.is_leaf(leaf)

    def test_leaf_distribution_is_normalized(self, regression_data):
        w = np.random.default_rng(1).uniform(0.1, 3.0, size=regression_data.n_rows)
        tree = grow_weighted_tree(regression_data, w, ForestControls(nodesize=10), seed=2)
        for leaf in tree.leaf_rows:
            rows, t = tree.leaf_distribution(leaf)
            assert rows.shape == t.shape
            assert t.sum() == pytest.approx(1.0)
            assert tree.value[leaf] == pytest.approx(np.dot(t, regression_data.response[rows]))

    def test_leaf_cap(self, regression_data):
        controls = ForestControls(nodesize=1, max_terminal_nodes=4)
        tree = grow_weighted_tree(regression_data, np.ones(regression_data.n_rows), controls, seed=1)
        assert tree.n_leaves == 4
        assert tree.depth.max() == 2

    def test_same_seed_same_tree(self, regression_data):
        w = np.random.default_rng(4).uniform(size=regression_data.n_rows)
        a = grow_weighted_tree(regression_data, w, ForestControls(), seed=9)
        b = grow_weighted_tree(regression_data, w, ForestControls(), seed=9)
        np.testing.assert_array_equal(a.feature, b.feature)
        np.testing.assert_array_equal(a.threshold, b.threshold)
        np.testing.assert_array_equal(a.value, b.value)

    def test_zero_weights_fall_back_to_uniform(self, regression_data):
        controls = ForestControls(nodesize=5)
        n = regression_data.n_rows
        with pytest.warns(ZeroWeightNodeWarning):
            zero = grow_weighted_tree(regression_data, np.zeros(n), controls, seed=4)
        uniform = grow_weighted_tree(regression_data, np.ones(n), controls, seed=4)
        assert zero.fallback_nodes > 0
        np.testing.assert_array_equal(zero.feature, uniform.feature)
        np.testing.assert_array_equal(zero.threshold, uniform.threshold)
        np.testing.assert_allclose(zero.value, uniform.value)

    def test_input_errors(self):
        with pytest.raises(ConfigurationError):
            grow_tree_arrays(np.zeros((3, 1)), np.zeros(2), np.ones(3), ForestControls(), seed=0)
        with pytest.raises(DomainError):
            grow_tree_arrays(np.zeros((3, 1)), np.zeros(3), np.array([1.0, -1.0, 1.0]),
                             ForestControls(), seed=0)
        with pytest.raises(DomainError):
            grow_weighted_tree(Dataset(features=np.array([[np.nan], [1.0]]), response=np.zeros(2)),
                               np.ones(2), ForestControls(), seed=0)


def _reference_cart(X, y, controls, seed):
    """Unweighted CART drawing randomness in the same order as the grower"""
    rng = np.random.default_rng(seed)
    n, p = X.shape
    mtry = controls.resolve_mtry(p)
    resample = rng.choice(n, size=controls.resample_size(n), replace=controls.with_replacement)
    Xr, yr = X[resample], y[resample]
    ones = np.ones(len(resample))

    feature, threshold, left, right, value, members = [], [], [], [], [], []

    def add(rows):
        feature.append(LEAF)
        threshold.append(np.nan)
        left.append(LEAF)
        right.append(LEAF)
        value.append(yr[rows].mean())
        members.append(rows)
        return len(feature) - 1

    queue = deque([add(np.arange(len(resample)))])
    while queue:
        node = queue.popleft()
        rows = members[node]
        if len(rows) < 2 * controls.nodesize:
            continue
        node_var = yr[rows].var()
        if not node_var > 0:
            continue
        best = None
        for f in np.sort(rng.choice(p, size=mtry, replace=False)):
            values = np.unique(Xr[rows, f])
            for lo, hi in zip(values[:-1], values[1:]):
                z = 0.5 * (lo + hi)
                gain = split_gain(Xr, yr, ones, rows, f, z, controls.nodesize)
                if gain is not None and (best is None or gain > best[0]):
                    best = (gain, f, z)
        if best is None or best[0] <= 1e-12 * node_var:
            continue
        _, f, z = best
        go_left = Xr[rows, f] < z
        feature[node], threshold[node] = f, z
        left[node] = add(rows[go_left])
        right[node] = add(rows[~go_left])
        queue.extend((left[node], right[node]))

    return np.array(feature), np.array(threshold), np.array(left), np.array(right)


@pytest.mark.parametrize('seed', [0, 1, 2])
def test_uniform_weights_match_reference_cart(seed):
    rng = np.random.default_rng(100 + seed)
    X = rng.uniform(size=(120, 3))
    y = np.sin(4 * X[:, 0]) + X[:, 1] ** 2 + rng.normal(0.0, 0.1, size=120)
    controls = ForestControls(mtry=2, nodesize=5, sample_fraction=0.7)

    tree = grow_tree_arrays(X, y, np.ones(120), controls, seed=seed)
    feature, threshold, left, right = _reference_cart(X, y, controls, seed)

    np.testing.assert_array_equal(tree.feature, feature)
    np.testing.assert_array_equal(tree.left, left)
    np.testing.assert_array_equal(tree.right, right)
    np.testing.assert_allclose(tree.threshold, threshold, rtol=0, atol=1e-12, equal_nan=True)
