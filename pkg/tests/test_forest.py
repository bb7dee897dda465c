"""
Tests for forest fitting, mean prediction and weighted quantiles
"""
import numpy as np
import pytest

from forest import (
    ForestControls,
    conditional_quantile,
    conditional_quantiles_at,
    fit_forest,
    forest_weight_matrix,
    forest_weights,
    predict_mean,
    predict_quantiles,
    weighted_quantile,
)
from forest.forest import tree_seeds
from input_parsers.errors import ConfigurationError, DomainError
from input_parsers.models import Dataset


@pytest.fixture
def query(regression_data):
    return np.random.default_rng(77).uniform(size=(25, regression_data.n_features))


def test_single_tree_forest_matches_its_tree(regression_data, query):
    forest = fit_forest(regression_data, controls=ForestControls(n_trees=1, seed=3))
    np.testing.assert_array_equal(predict_mean(forest, query), forest.trees[0].predict(query))


def test_worker_count_does_not_change_the_fit(regression_data, fast_controls, query):
    w = np.random.default_rng(0).uniform(0.2, 2.0, size=regression_data.n_rows)
    serial = fit_forest(regression_data, w, fast_controls, n_jobs=1)
    parallel = fit_forest(regression_data, w, fast_controls, n_jobs=2)
    np.testing.assert_array_equal(predict_mean(serial, query), predict_mean(parallel, query))


def test_tree_seeds_are_stable():
    assert tree_seeds(5, 3) == tree_seeds(5, 3)
    assert tree_seeds(5, 3) != tree_seeds(6, 3)
    assert len(set(tree_seeds(0, 50))) == 50


def test_weight_matrix_rows_are_distributions(regression_data, fast_controls, query):
    forest = fit_forest(regression_data, controls=fast_controls)
    R = forest_weight_matrix(forest, query)
    assert R.shape == (25, regression_data.n_rows)
    assert (R >= 0).all()
    np.testing.assert_allclose(R.sum(axis=1), 1.0)


def test_mean_is_weighted_average_of_responses(regression_data, fast_controls, query):
    w = np.random.default_rng(1).uniform(0.1, 5.0, size=regression_data.n_rows)
    forest = fit_forest(regression_data, w, fast_controls)
    R = forest_weight_matrix(forest, query)
    np.testing.assert_allclose(predict_mean(forest, query), R @ regression_data.response, rtol=1e-10)


def test_weight_matrix_identities_over_many_queries(regression_data, fast_controls):
    w = np.random.default_rng(4).uniform(0.1, 5.0, size=regression_data.n_rows)
    forest = fit_forest(regression_data, w, fast_controls)
    queries = np.random.default_rng(78).uniform(size=(1000, regression_data.n_features))
    R = forest_weight_matrix(forest, queries)
    np.testing.assert_allclose(R.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    np.testing.assert_allclose(predict_mean(forest, queries), R @ regression_data.response, rtol=0, atol=1e-10)

    levels = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95]
    bounds = predict_quantiles(forest, queries, levels)
    stacked = np.vstack([bounds[p] for p in levels])
    assert (np.diff(stacked, axis=0) >= 0).all()


def test_single_point_returns_float(regression_data, fast_controls, query):
    forest = fit_forest(regression_data, controls=fast_controls)
    value = predict_mean(forest, query[0])
    assert isinstance(value, float)
    assert value == pytest.approx(predict_mean(forest, query[:1])[0])
    np.testing.assert_array_equal(forest.predict(query), predict_mean(forest, query))


def test_mean_stays_within_response_range(regression_data, fast_controls, query):
    forest = fit_forest(regression_data, controls=fast_controls)
    preds = predict_mean(forest, query)
    y = regression_data.response
    assert ((preds >= y.min()) & (preds <= y.max())).all()


def test_leaf_weights_normalize_within_leaf():
    data = Dataset(features=np.array([[0.0], [1.0]]), response=np.array([2.0, 4.0]))
    controls = ForestControls(n_trees=1, nodesize=5, sample_fraction=1.0)
    forest = fit_forest(data, np.array([1.0, 3.0]), controls)
    np.testing.assert_allclose(forest_weights(forest, np.array([0.5])), [0.25, 0.75])
    assert predict_mean(forest, np.array([0.5])) == pytest.approx(3.5)


class TestWeightedQuantile:

    values = np.array([1.0, 2.0, 3.0])
    weights = np.array([0.2, 0.3, 0.5])

    def test_interior_level(self):
        assert weighted_quantile(self.values, self.weights, 0.4) == 2.0

    def test_boundary_is_inclusive(self):
        assert weighted_quantile(self.values, self.weights, 0.5) == 2.0

    def test_next_atom(self):
        assert weighted_quantile(self.values, self.weights, 0.51) == 3.0

    def test_unsorted_values(self):
        assert weighted_quantile(self.values[::-1], self.weights[::-1], 0.4) == 2.0

    @pytest.mark.parametrize('p', [0.0, 1.0, -0.1, 1.5])
    def test_level_outside_unit_interval(self, p):
        with pytest.raises(DomainError):
            weighted_quantile(self.values, self.weights, p)


class TestForestQuantiles:

    def test_quantiles_are_monotone_in_level(self, regression_data, fast_controls, query):
        forest = fit_forest(regression_data, controls=fast_controls)
        levels = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95]
        q = predict_quantiles(forest, query, levels)
        stacked = np.vstack([q[p] for p in levels])
        assert (np.diff(stacked, axis=0) >= 0).all()
        assert set(np.unique(stacked)) <= set(regression_data.response)

    def test_single_point_agrees_with_batch(self, regression_data, fast_controls, query):
        forest = fit_forest(regression_data, controls=fast_controls)
        batch = predict_quantiles(forest, query[:3], [0.3])[0.3]
        for i in range(3):
            assert conditional_quantile(forest, query[i], 0.3) == batch[i]

    def test_per_row_levels(self, regression_data, fast_controls, query):
        forest = fit_forest(regression_data, controls=fast_controls)
        levels = np.array([0.1, 0.5, 0.9])
        per_row = conditional_quantiles_at(forest, query[:3], levels)
        for i, p in enumerate(levels):
            assert per_row[i] == predict_quantiles(forest, query[i:i + 1], [p])[p][0]

    def test_per_row_levels_validated(self, regression_data, fast_controls, query):
        forest = fit_forest(regression_data, controls=fast_controls)
        with pytest.raises(DomainError):
            conditional_quantiles_at(forest, query[:2], [0.5])
        with pytest.raises(DomainError):
            conditional_quantiles_at(forest, query[:2], [0.5, 1.0])

    def test_invalid_level(self, regression_data, fast_controls, query):
        forest = fit_forest(regression_data, controls=fast_controls)
        with pytest.raises(DomainError):
            predict_quantiles(forest, query, [0.5, 1.0])


class TestWeightHandling:

    def test_weight_scale_does_not_matter(self, regression_data, fast_controls, query):
        w = np.random.default_rng(2).uniform(0.1, 3.0, size=regression_data.n_rows)
        a = fit_forest(regression_data, w, fast_controls)
        b = fit_forest(regression_data, 4.0 * w, fast_controls)
        np.testing.assert_allclose(predict_mean(a, query), predict_mean(b, query), rtol=1e-12)
        np.testing.assert_allclose(forest_weight_matrix(a, query), forest_weight_matrix(b, query),
                                   rtol=1e-12, atol=1e-15)

    def test_ones_equal_no_weights(self, regression_data, fast_controls, query):
        a = fit_forest(regression_data, None, fast_controls)
        b = fit_forest(regression_data, np.ones(regression_data.n_rows), fast_controls)
        np.testing.assert_array_equal(predict_mean(a, query), predict_mean(b, query))

    def test_weights_change_the_fit(self, regression_data, fast_controls, query):
        w = np.where(regression_data.features[:, 0] > 0.5, 10.0, 0.1)
        a = fit_forest(regression_data, None, fast_controls)
        b = fit_forest(regression_data, w, fast_controls)
        assert not np.allclose(predict_mean(a, query), predict_mean(b, query))

    def test_bad_weights(self, regression_data, fast_controls):
        n = regression_data.n_rows
        with pytest.raises(ConfigurationError):
            fit_forest(regression_data, np.ones(n - 1), fast_controls)
        with pytest.raises(DomainError):
            fit_forest(regression_data, -np.ones(n), fast_controls)
        with pytest.raises(DomainError):
            fit_forest(regression_data, np.zeros(n), fast_controls)


def test_missing_cells_must_be_imputed(fast_controls):
    data = Dataset(features=np.array([[1.0, np.nan], [2.0, 3.0]]), response=np.array([1.0, 2.0]))
    with pytest.raises(DomainError):
        fit_forest(data, controls=fast_controls)


def test_response_required(fast_controls):
    with pytest.raises(ConfigurationError):
        fit_forest(Dataset(features=np.zeros((4, 1))), controls=fast_controls)


def test_query_shape_checked(regression_data, fast_controls):
    forest = fit_forest(regression_data, controls=fast_controls)
    with pytest.raises(DomainError):
        predict_mean(forest, np.zeros((2, regression_data.n_features + 1)))
