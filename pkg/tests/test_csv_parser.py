"""
Tests for CSV datasets, weight files and prediction tables
"""
import numpy as np
import pandas as pd
import pytest

from input_parsers.csv_parser import (
    load_dataset,
    quantile_column_name,
    read_predictions,
    read_weights,
    write_dataset,
    write_predictions,
    write_weights,
)
from input_parsers.errors import ConfigurationError, DatasetParseError, DomainError
from input_parsers.models import Dataset, ImportanceWeights


def _write(tmp_path, text, name='data.csv'):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_missing_tokens_become_masked(tmp_path):
    path = _write(tmp_path, "x1,x2,y\n1,,3\n2,NA,4\n3,5,6\n")
    dataset = load_dataset(path, response_column='y')

    assert dataset.feature_names == ['x1', 'x2']
    np.testing.assert_array_equal(dataset.response, [3.0, 4.0, 6.0])
    np.testing.assert_array_equal(dataset.missing_mask[:, 1], [True, True, False])
    assert not dataset.missing_mask[:, 0].any()
    assert dataset.missing_columns == [1]
    assert dataset.complete_columns == [0]
    assert dataset.missing_counts() == {'x2': 2}


def test_response_column_matched_after_normalization(tmp_path):
    path = _write(tmp_path, "x1,Sales Total\n1,2\n3,4\n")
    dataset = load_dataset(path, response_column='sales_total')
    assert dataset.response_name == 'Sales Total'
    np.testing.assert_array_equal(dataset.response, [2.0, 4.0])


def test_non_numeric_cell_reports_row_and_column(tmp_path):
    path = _write(tmp_path, "x1,y\n1,2\nabc,3\n")
    with pytest.raises(DatasetParseError) as exc:
        load_dataset(path, response_column='y')
    assert exc.value.row == 2
    assert exc.value.column == 'x1'
    assert "row 2" in str(exc.value)


def test_row_with_extra_fields_is_reported(tmp_path):
    path = _write(tmp_path, "x1,x2,y\n1,2,3\n4,5,6,7\n")
    with pytest.raises(DatasetParseError) as exc:
        load_dataset(path, response_column='y')
    assert exc.value.row == 2


def test_absent_response_column(tmp_path):
    path = _write(tmp_path, "x1,x2\n1,2\n")
    with pytest.raises(ConfigurationError):
        load_dataset(path, response_column='y')


def test_missing_response_value_is_rejected(tmp_path):
    path = _write(tmp_path, "x1,y\n1,2\n3,\n")
    with pytest.raises(DatasetParseError) as exc:
        load_dataset(path, response_column='y')
    assert exc.value.row == 2


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_dataset('does/not/exist.csv')


def test_dataset_roundtrip_keeps_missing_cells(tmp_path):
    X = np.array([[1.0, np.nan], [2.5, 3.0]])
    original = Dataset(features=X, feature_names=['a', 'b'], response=np.array([1.0, 2.0]))
    path = write_dataset(original, tmp_path / 'out.csv')
    reloaded = load_dataset(path, response_column='y')

    np.testing.assert_array_equal(reloaded.missing_mask, original.missing_mask)
    np.testing.assert_array_equal(reloaded.features[~reloaded.missing_mask], [1.0, 2.5, 3.0])


def test_unflagged_nan_is_rejected():
    X = np.array([[1.0, np.nan]])
    with pytest.raises(DomainError):
        Dataset(features=X, missing_mask=np.zeros((1, 2), dtype=bool))


def test_weights_file(tmp_path):
    raw = np.array([0.5, 2.0, 0.0])
    smoothed = np.array([0.7, 1.4, 0.0])
    path = write_weights(tmp_path / 'w.csv', raw, smoothed)

    assert list(pd.read_csv(path).columns) == ['row', 'raw_weight', 'weight']
    np.testing.assert_array_equal(read_weights(path), smoothed)
    np.testing.assert_array_equal(read_weights(path, column='raw_weight'), raw)


def test_negative_weights_rejected(tmp_path):
    path = _write(tmp_path, "row,raw_weight,weight\n0,1,1\n1,1,-2\n", name='w.csv')
    with pytest.raises(DatasetParseError):
        read_weights(path)


def test_predictions_columns(tmp_path):
    quantiles = {0.9: np.array([3.0]), 0.1: np.array([1.0]), 0.5: np.array([2.0])}
    path = write_predictions(tmp_path / 'p.csv', np.array([2.1]), quantiles)
    assert list(pd.read_csv(path).columns) == ['mean', 'q0.1', 'q0.5', 'q0.9']
    assert quantile_column_name(0.25) == 'q0.25'


def test_importance_weights_record_validates():
    with pytest.raises(DomainError):
        ImportanceWeights(raw=np.array([1.0, -1.0]), smoothing_exponent=1.0,
                          effective=np.array([1.0, 1.0]), n_eff=2.0)
    with pytest.raises(DomainError):
        ImportanceWeights(raw=np.array([1.0, 1.0]), smoothing_exponent=0.0,
                          effective=np.array([1.0, 1.0]), n_eff=2.0)


def test_leading_extra_field_is_not_read_as_index(tmp_path):
    path = _write(tmp_path, "x1,y\n1,2,3\n4,5,6\n")
    with pytest.raises(DatasetParseError) as exc:
        load_dataset(path, response_column='y')
    assert exc.value.row == 1
    assert 'more fields than the header' in str(exc.value)


def test_weights_file_with_extra_field_is_rejected(tmp_path):
    path = _write(tmp_path, "row,raw_weight,weight\n0,1.0,1.0,9\n1,2.0,1.5,9\n", name='w.csv')
    with pytest.raises(DatasetParseError):
        read_weights(path)


def test_empty_weights_file(tmp_path):
    path = _write(tmp_path, "", name='w.csv')
    with pytest.raises(DatasetParseError, match='empty'):
        read_weights(path)


def test_read_predictions(tmp_path):
    path = write_predictions(tmp_path / 'p.csv', np.array([1.0, 2.0]),
                             {0.1: np.array([0.5, 1.5]), 0.9: np.array([1.5, 2.5])})
    columns = read_predictions(path, ['mean', 'q0.9'])
    assert set(columns) == {'mean', 'q0.9'}
    np.testing.assert_array_equal(columns['q0.9'], [1.5, 2.5])


def test_read_predictions_reports_bad_cell(tmp_path):
    path = _write(tmp_path, "mean,q0.1,q0.9\n1,0,2\n2,low,3\n", name='p.csv')
    with pytest.raises(DatasetParseError) as exc:
        read_predictions(path, ['mean', 'q0.1', 'q0.9'])
    assert exc.value.row == 2
    assert exc.value.column == 'q0.1'


def test_read_predictions_requires_columns(tmp_path):
    path = _write(tmp_path, "mean\n1\n", name='p.csv')
    with pytest.raises(ConfigurationError, match='q0.9'):
        read_predictions(path, ['mean', 'q0.9'])
    with pytest.raises(FileNotFoundError):
        read_predictions(tmp_path / 'absent.csv', ['mean'])
