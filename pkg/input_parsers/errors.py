"""
Exceptions raised across the local forest packages
"""
from typing import Optional


class LocalForestError(Exception):
    """Base class for every error raised by this project"""


class ConfigurationError(LocalForestError, ValueError):
    """Invalid controls, grids, column names or other user-supplied settings"""


class DomainError(LocalForestError, ValueError):
    """Inputs outside the mathematical domain of an operation"""


class NumericalError(LocalForestError, ArithmeticError):
    """A linear system or numerical routine could not be solved"""


class DatasetParseError(LocalForestError, ValueError):
    """Malformed CSV input

    Attributes:
        row: 1-based data row (header excluded), when known
        column: column name, when known
    """

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")
        self.row = row
        self.column = column
