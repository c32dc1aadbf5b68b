"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations

import numpy as np


class LogitScaleError(Exception):
    """Base class for all errors raised by logitscale."""


class DimensionMismatch(LogitScaleError, ValueError):
    pass


class NotPositiveDefinite(LogitScaleError, np.linalg.LinAlgError):
    """A Cholesky pivot fell below the positivity threshold.

    Attributes
    ----------
    pivot_index : int
        Zero-based column at which the factorization broke down.
    pivot_value : float
        The offending (reduced) diagonal value.
    """

    def __init__(self, pivot_index: int, pivot_value: float, detail: str = ""):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        msg = f"matrix is not positive definite (pivot {pivot_index} = {pivot_value:.6g})"
        if detail:
            msg = f"{msg}; {detail}"
        super().__init__(msg)


class DegenerateResponse(LogitScaleError, ValueError):
    """The response has a single class, so the MLE does not exist."""


class LeverageAtOne(LogitScaleError, ValueError):
    def __init__(self, row: int, value: float):
        self.row = row
        self.value = value
        super().__init__(f"leverage h_ii = {value!r} at row {row} is not below 1")


class ZeroStandardError(LogitScaleError, ValueError):
    pass


class ZeroSigma(LogitScaleError, ValueError):
    pass


class OutOfRange(LogitScaleError, ValueError):
    pass


class InvalidConfig(LogitScaleError, ValueError):
    pass


class TooManyFailures(LogitScaleError, RuntimeError):
    pass


class ParseError(LogitScaleError, ValueError):
    """Malformed CSV input; carries the 1-based file line number."""

    def __init__(self, line: int, token: str, reason: str):
        self.line = line
        self.token = token
        super().__init__(f"line {line}: {reason} (got {token!r})")


class MissingColumn(LogitScaleError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0])


class EmptyDataset(LogitScaleError, ValueError):
    pass
