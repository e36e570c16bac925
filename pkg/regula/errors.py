"""Exception hierarchy.

Every error is also a ``ValueError`` so callers that only care about
"bad input" can keep catching that.
"""

from typing import Optional


class RegulaError(ValueError):
    """Base class for all regula errors."""


class InvalidVectorError(RegulaError):
    pass


class DimensionMismatchError(RegulaError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"Dimension mismatch: expected {expected}, got {got}.")
        self.expected = expected
        self.got = got


class OperatorError(RegulaError):
    pass


class DomainError(RegulaError):
    pass


class ScheduleError(RegulaError):
    """A step schedule left the open interval (kappa, 1) at some index."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class DivergenceNotWitnessedError(ScheduleError):
    pass


class PreconditionError(RegulaError):
    pass


class ConfigError(RegulaError):
    pass
