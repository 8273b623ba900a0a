"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ``DataError`` -> 2, ``NumericError`` -> 3,
everything else (usage, bad specs) -> 1.
"""


class RedispatchError(Exception):
    """Base class for all package-specific errors."""


class DataError(RedispatchError):
    """A problem with input data (parsing, gaps, duplicates, coverage)."""


class ParseError(DataError):
    """Malformed input row; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateRowError(DataError):
    """Duplicate (timestamp, zone) or timestamp key in an input file."""


class GapError(DataError):
    """A run of missing values longer than the configured maximum."""


class BoundaryError(DataError):
    """Missing values at the start or end of a series, where no
    interpolation neighbours exist."""


class CompletenessError(DataError):
    """A required field is missing where the pipeline needs it present."""


class CoverageError(DataError):
    """Predictions or data do not cover a requested window."""


class SpecError(RedispatchError, ValueError):
    """An invalid or inconsistent specification (feature spec, scenario
    spec, tuner budgets, model/spec mismatch)."""


class ShapeError(SpecError):
    """Array dimensions incompatible with the model or operation."""


class NumericError(RedispatchError, ArithmeticError):
    """Non-finite values encountered during optimisation or a division
    that cannot be carried out."""


class DegenerateInputError(RedispatchError, ValueError):
    """Input that makes a statistic undefined (e.g. all-zero differences
    in a signed-rank test)."""


class SingularityError(NumericError):
    """Design matrix rank-deficient beyond repair after dropping
    collinear columns."""
