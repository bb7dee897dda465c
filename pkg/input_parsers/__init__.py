"""
Input parsers and shared data models
CSV datasets, importance-weight files and prediction tables
"""
from .errors import (
    LocalForestError,
    ConfigurationError,
    DatasetParseError,
    DomainError,
    NumericalError,
)
from .models import Dataset, ImportanceWeights, default_feature_names
from .csv_parser import (
    CsvDatasetParser,
    load_dataset,
    write_dataset,
    read_csv_strict,
    read_weights,
    read_predictions,
    write_weights,
    write_predictions,
    quantile_column_name,
)

__all__ = [
    'LocalForestError',
    'ConfigurationError',
    'DatasetParseError',
    'DomainError',
    'NumericalError',
    'Dataset',
    'ImportanceWeights',
    'default_feature_names',
    'CsvDatasetParser',
    'load_dataset',
    'write_dataset',
    'read_csv_strict',
    'read_weights',
    'read_predictions',
    'write_weights',
    'write_predictions',
    'quantile_column_name',
]
