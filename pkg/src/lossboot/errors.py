"""Exception hierarchy.

Every error raised on purpose by the package derives from ``LossbootError``.
The CLI maps the three families below onto exit codes 2 (usage), 3 (data)
and 4 (numeric).
"""


class LossbootError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(LossbootError, ValueError):
    """An argument violates a documented precondition."""


class DataError(LossbootError, ValueError):
    """Input data is malformed (bad CSV, wrong labels, non-finite values)."""


class NumericError(LossbootError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy answer."""


class NotPositiveDefiniteError(NumericError):
    """Cholesky factorization met a non-positive pivot."""

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot})")


class SingularMatrixError(NumericError):
    """A matrix that must be inverted is singular or numerically so."""

    def __init__(self, name: str, message: str):
        self.name = name
        super().__init__(message)


class MaxIterationsError(NumericError):
    """The optimizer did not reach its gradient tolerance."""


class DivergenceError(NumericError):
    """The optimizer's iterate ran away or the minimizer is not isolated."""


class ReplicateError(NumericError):
    """A bootstrap replicate failed; carries the replicate index."""

    def __init__(self, replicate: int, cause: Exception):
        self.replicate = replicate
        self.cause = cause
        super().__init__(f"replicate {replicate} failed: {cause}")


class McmcInitError(NumericError):
    """The log posterior is not finite at the chain's starting point."""
