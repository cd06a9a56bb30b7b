"""Exception hierarchy shared by all embreduce modules."""

from __future__ import annotations


class EmbReduceError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(EmbReduceError, ValueError):
    """Input array is malformed (non-finite, not symmetric, wrong rank)."""


class ShapeError(EmbReduceError, ValueError):
    """Array dimensions do not match what a fitted model expects."""


class InvalidParameter(EmbReduceError, ValueError):
    """A hyperparameter lies outside its valid domain."""


class InsufficientData(EmbReduceError, ValueError):
    """Too few rows to compute the requested statistic."""


class InsufficientClassData(InsufficientData):
    """A class has too few samples (or is missing entirely)."""

    def __init__(self, message: str, label: int | None = None):
        super().__init__(message)
        self.label = label


class EmptySet(InsufficientData):
    """No usable rows remain after filtering (e.g. all embeddings zero)."""


class NumericalFailure(EmbReduceError, ArithmeticError):
    """An iterative routine failed to converge or produced non-finite values."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class NotPositiveDefinite(NumericalFailure):
    """Cholesky factorisation met a non-positive pivot."""

    def __init__(self, message: str, pivot: int):
        super().__init__(message)
        self.pivot = pivot


class ParseError(EmbReduceError, ValueError):
    """A CSV or JSON input could not be parsed."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class GenerationError(EmbReduceError, ValueError):
    """The synthetic generator cannot satisfy the requested configuration."""

    def __init__(self, message: str, achievable: tuple[float, float] | None = None):
        if achievable is not None:
            message = f"{message}; achievable range [{achievable[0]:.4f}, {achievable[1]:.4f})"
        super().__init__(message)
        self.achievable = achievable
