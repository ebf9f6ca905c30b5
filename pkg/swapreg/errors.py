"""Exception types raised by the swapreg toolkit.

Every error subclasses both SwapRegError and ValueError, so callers that only
know about ValueError keep working.
"""

from typing import Optional, Sequence


class SwapRegError(Exception):
    """Base class for all toolkit errors."""


class ZeroColumnError(SwapRegError, ValueError):
    """A design column has zero Euclidean norm and cannot be normalized."""

    def __init__(self, column: int):
        self.column = column
        super().__init__(f"Column {column} has zero norm")


class RankDeficientError(SwapRegError, ValueError):
    """The columns indexed by a support are (numerically) linearly dependent."""

    def __init__(self, support: Sequence[int], detail: str = ""):
        self.support = tuple(int(i) for i in support)
        message = f"Support {list(self.support)} is rank deficient"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class CombinatorialBlowupError(SwapRegError, ValueError):
    """An enumeration would exceed its configured guard."""

    def __init__(self, what: str, count: float, limit: float):
        self.what = what
        self.count = count
        self.limit = limit
        super().__init__(
            f"Enumerating {what} needs {count:.4g} evaluations (limit {limit:.4g})"
        )


class NotPositiveDefiniteError(SwapRegError, ValueError):
    """A requested covariance is not a positive definite matrix."""


class NonFiniteError(SwapRegError, ValueError):
    """Input arrays contain NaN or infinite values."""


class TooFewSamplesError(SwapRegError, ValueError):
    """Not enough rows for the requested operation (e.g. CV folds)."""


class DomainError(SwapRegError, ValueError):
    """A numeric argument lies outside the domain of a formula."""


class EmptyTrueSupportError(SwapRegError, ValueError):
    """TPR is undefined because the reference support is empty."""


class InsufficientClusterSizesError(SwapRegError, ValueError):
    """Too few clusters are large enough for the requested support recipe."""


class ConfigError(SwapRegError, ValueError):
    """The experiment configuration is invalid."""


class ParseError(SwapRegError, ValueError):
    """A matrix file could not be parsed.

    Attributes:
        row: 0-based data row of the offending cell (None if unknown)
        col: 0-based column of the offending cell (None if unknown)
    """

    def __init__(self, message: str, row: Optional[int] = None, col: Optional[int] = None):
        self.row = row
        self.col = col
        location = []
        if row is not None:
            location.append(f"row {row}")
        if col is not None:
            location.append(f"column {col}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class RaggedRowsError(ParseError):
    """Rows of the matrix file have differing numbers of fields."""


class NonNumericCellError(ParseError):
    """A cell of the matrix file is not a number."""


__all__ = [
    "SwapRegError",
    "ZeroColumnError",
    "RankDeficientError",
    "CombinatorialBlowupError",
    "NotPositiveDefiniteError",
    "NonFiniteError",
    "TooFewSamplesError",
    "DomainError",
    "EmptyTrueSupportError",
    "InsufficientClusterSizesError",
    "ConfigError",
    "ParseError",
    "RaggedRowsError",
    "NonNumericCellError",
]
