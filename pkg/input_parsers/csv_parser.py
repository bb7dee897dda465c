"""
CSV parser for datasets, importance-weight files and prediction tables
A header row is mandatory; empty and NA cells are read as missing
"""
import csv
import logging
import re
import warnings
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import ConfigurationError, DatasetParseError
from .models import Dataset

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

WEIGHT_COLUMNS = ('row', 'raw_weight', 'weight')

_FIELD_COUNT = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


def _first_long_row(path: Path) -> Optional[int]:
    """1-based data row holding more fields than the header"""
    with open(path, newline='') as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        for row, fields in enumerate(reader, start=1):
            if len(fields) > len(header):
                return row
    return None


def read_csv_strict(path: PathLike, **kwargs) -> pd.DataFrame:
    """
    pd.read_csv that never takes the first column as an index and raises
    DatasetParseError on ragged or empty files

    Args:
        path: CSV file with a header row
        **kwargs: Passed to pd.read_csv

    Returns:
        DataFrame with exactly the header's columns
    """
    path = Path(path)
    try:
        with warnings.catch_warnings():
            # pandas only warns when index_col=False drops extra trailing fields
            warnings.simplefilter('error', pd.errors.ParserWarning)
            return pd.read_csv(path, index_col=False, **kwargs)
    except pd.errors.ParserWarning as e:
        raise DatasetParseError(
            f"{path.name}: row has more fields than the header", row=_first_long_row(path)
        ) from e
    except pd.errors.ParserError as e:
        match = _FIELD_COUNT.search(str(e))
        if match:
            expected, line, saw = (int(g) for g in match.groups())
            raise DatasetParseError(
                f"{path.name}: expected {expected} fields, saw {saw}", row=line - 1
            ) from e
        raise DatasetParseError(f"malformed CSV {path.name}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise DatasetParseError(f"{path.name} is empty; a header row is required") from e


class CsvDatasetParser:
    """Parser turning a rectangular CSV file into a Dataset"""

    # Cell spellings read as missing (compared after strip + lower)
    NA_TOKENS = {'', 'na', 'n/a', 'nan', 'null', 'none'}

    def normalize_column_name(self, col: str) -> str:
        """Normalize column names for matching"""
        return re.sub(r'[_\s-]', '_', str(col).lower().strip())

    def find_column(self, columns: Sequence[str], name: str) -> Optional[str]:
        """Find a column by exact name, then by normalized name

        Args:
            columns: Header of the file
            name: Requested column name

        Returns:
            Matching header entry or None
        """
        if name in columns:
            return name
        normalized_cols = {self.normalize_column_name(col): col for col in columns}
        return normalized_cols.get(self.normalize_column_name(name))

    def _read_cells(self, file_path: Path) -> pd.DataFrame:
        return read_csv_strict(file_path, dtype=str, keep_default_na=False, na_filter=False)

    def _parse_column(self, cells: pd.Series, column: str):
        """Numeric values and missing flags for one column of raw cells"""
        # Short rows come back as NaN instead of strings
        short = cells.map(lambda v: not isinstance(v, str))
        if short.any():
            row = int(np.flatnonzero(short.to_numpy())[0]) + 1
            raise DatasetParseError("row has fewer fields than the header", row=row)

        stripped = cells.str.strip()
        missing = stripped.str.lower().isin(self.NA_TOKENS).to_numpy()
        values = pd.to_numeric(stripped.where(~missing), errors='coerce').to_numpy(dtype=np.float64)
        bad = ~missing & ~np.isfinite(values)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DatasetParseError(
                f"non-numeric value '{cells.iloc[row]}'", row=row + 1, column=column
            )
        return values, missing

    def parse_csv(self, file_path: PathLike, response_column: Optional[str] = None) -> Dataset:
        """
        Parse a CSV file into a Dataset

        Args:
            file_path: Path to the CSV file
            response_column: Optional name of the response column

        Returns:
            Dataset with every other column as a feature
        """
        file_path = Path(file_path)
        if not file_path.exists():
            raise FileNotFoundError(f"File not found: {file_path}")

        df = self._read_cells(file_path)
        if df.shape[0] < 1:
            raise DatasetParseError("no data rows after the header")

        response_col = None
        if response_column is not None:
            response_col = self.find_column(list(df.columns), response_column)
            if response_col is None:
                raise ConfigurationError(
                    f"response column '{response_column}' not found in {file_path.name}; "
                    f"columns: {', '.join(map(str, df.columns))}"
                )

        feature_cols = [col for col in df.columns if col != response_col]
        if not feature_cols:
            raise ConfigurationError(f"{file_path.name} has no feature columns")

        features = np.empty((df.shape[0], len(feature_cols)), dtype=np.float64)
        mask = np.zeros(features.shape, dtype=bool)
        for j, col in enumerate(feature_cols):
            features[:, j], mask[:, j] = self._parse_column(df[col], col)

        response = None
        if response_col is not None:
            response, response_missing = self._parse_column(df[response_col], response_col)
            if response_missing.any():
                row = int(np.flatnonzero(response_missing)[0]) + 1
                raise DatasetParseError("missing response value", row=row, column=response_col)

        dataset = Dataset(
            features=features,
            feature_names=[str(c) for c in feature_cols],
            response=response,
            missing_mask=mask,
            response_name=str(response_col) if response_col is not None else None,
            source_file=str(file_path),
        )
        logger.info(
            "Parsed %s: %d rows, %d features, %d missing cells",
            file_path, dataset.n_rows, dataset.n_features, int(mask.sum()),
        )
        return dataset


def load_dataset(path: PathLike, response_column: Optional[str] = None) -> Dataset:
    """Parse a CSV dataset (see CsvDatasetParser.parse_csv)"""
    return CsvDatasetParser().parse_csv(path, response_column=response_column)


def write_dataset(dataset: Dataset, path: PathLike) -> Path:
    """Write a Dataset back to CSV with the schema load_dataset reads"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset.to_frame().to_csv(path, index=False, na_rep='')
    return path


def write_weights(path: PathLike, raw: np.ndarray, regularized: np.ndarray) -> Path:
    """Weights file: row index, raw weight, regularized weight"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({
        'row': np.arange(len(raw)),
        'raw_weight': np.asarray(raw, dtype=np.float64),
        'weight': np.asarray(regularized, dtype=np.float64),
    })
    frame.to_csv(path, index=False)
    return path


def read_weights(path: PathLike, column: str = 'weight') -> np.ndarray:
    """Read one weight column from a weights file, ordered by row index"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    frame = read_csv_strict(path)
    absent = [c for c in ('row', column) if c not in frame.columns]
    if absent:
        raise ConfigurationError(f"weights file {path.name} lacks columns: {', '.join(absent)}")
    frame = frame.sort_values('row')
    if not np.array_equal(frame['row'].to_numpy(), np.arange(len(frame))):
        raise DatasetParseError(f"weights file {path.name} row indices must be 0..n-1")
    weights = pd.to_numeric(frame[column], errors='coerce').to_numpy(dtype=np.float64)
    if not np.isfinite(weights).all() or (weights < 0).any():
        raise DatasetParseError(f"weights in {path.name} must be finite and nonnegative", column=column)
    return weights


def quantile_column_name(level: float) -> str:
    """Column label for a quantile level, e.g. 0.1 -> 'q0.1'"""
    return f"q{level:g}"


def write_predictions(path: PathLike, mean: np.ndarray, quantiles: Dict[float, np.ndarray]) -> Path:
    """Predictions file: mean column followed by one column per quantile level"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({'mean': np.asarray(mean, dtype=np.float64)})
    for level in sorted(quantiles):
        frame[quantile_column_name(level)] = np.asarray(quantiles[level], dtype=np.float64)
    frame.to_csv(path, index=False)
    return path


def read_predictions(path: PathLike, columns: Sequence[str]) -> Dict[str, np.ndarray]:
    """
    Read numeric columns from a predictions file

    Args:
        path: File written by write_predictions
        columns: Columns to return

    Returns:
        Mapping of column name to float array
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    frame = read_csv_strict(path, dtype=str, keep_default_na=False, na_filter=False)
    absent = [c for c in columns if c not in frame.columns]
    if absent:
        raise ConfigurationError(f"predictions file {path.name} lacks columns: {', '.join(absent)}")

    out = {}
    for column in columns:
        cells = frame[column].map(lambda v: v.strip() if isinstance(v, str) else '')
        values = pd.to_numeric(cells, errors='coerce').to_numpy(dtype=np.float64)
        bad = ~np.isfinite(values)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DatasetParseError(
                f"non-numeric prediction '{cells.iloc[row]}'", row=row + 1, column=column
            )
        out[column] = values
    return out
