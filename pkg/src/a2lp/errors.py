"""Exception types shared across the package."""


class A2lpError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(A2lpError):
    """An embedding file could not be parsed (bad header, payload mismatch)."""


class ValidationError(A2lpError):
    """Input data violates a documented precondition."""


class GraphError(A2lpError):
    """Graph construction failed (k out of range, isolated vertex, ...)."""


class ConvergenceError(A2lpError):
    """An iterative or direct solve did not reach the required accuracy."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
