"""Exception hierarchy shared by every package in the toolkit."""
from typing import Optional


class CausalToolkitError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(CausalToolkitError, ValueError):
    """Raised when tensor shapes disagree or an axis is invalid."""


class DomainError(CausalToolkitError, ValueError):
    """Raised when an input lies outside the domain of a function."""


class ContractError(CausalToolkitError, ValueError):
    """Raised when a caller violates an operation's pre-condition."""


class InputError(CausalToolkitError, ValueError):
    """Raised for malformed numeric input such as NaN covariates."""


class DegenerateDataError(CausalToolkitError, ValueError):
    """Raised when the data cannot support an estimate (e.g. one treatment arm)."""


class ConfigError(CausalToolkitError, ValueError):
    """Raised for invalid experiment configuration."""


class ParseError(CausalToolkitError, ValueError):
    """Raised when a dataset file breaks the CSV contract."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        """Initialize the error.

        Args:
            message: Human readable description
            row: 1-based line number in the file (header is line 1)
            column: Offending column name
        """
        location = []
        if row is not None:
            location.append(f"line {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class OptimizerError(CausalToolkitError, ArithmeticError):
    """Raised when an optimizer receives a non-finite gradient."""

    def __init__(self, param_name: str, message: str = "non-finite gradient"):
        super().__init__(f"{message} for parameter '{param_name}'")
        self.param_name = param_name


class TrainingAbortedError(CausalToolkitError, ArithmeticError):
    """Raised when the training objective becomes non-finite."""

    def __init__(self, epoch: int, term: str, value: float = float("nan")):
        super().__init__(f"training aborted at epoch {epoch}: loss term '{term}' is {value}")
        self.epoch = epoch
        self.term = term
        self.value = value


class ConvergenceError(CausalToolkitError, ArithmeticError):
    """Raised when an iterative solver misses its tolerance."""
