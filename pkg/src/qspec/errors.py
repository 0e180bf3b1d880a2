"""Exception hierarchy shared by every module."""


class QSpecError(Exception):
    """Base class for all errors raised by qspec."""


class StructuralError(QSpecError, ValueError):
    """Shapes or spaces do not match."""


class UnsupportedOperationError(QSpecError):
    """The operation needs structure the space or operator does not have."""


class DomainError(QSpecError, ValueError):
    """An argument lies outside the domain of a pairing or projection."""


class PreconditionError(QSpecError, ValueError):
    """A documented hypothesis of an operation is violated."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NonConvergenceError(QSpecError, ArithmeticError):
    """An iteration or approximation schedule failed to reach tolerance."""

    def __init__(self, message, point=None, residual=None, trace=None):
        super().__init__(message)
        self.point = point
        self.residual = residual
        self.trace = list(trace) if trace is not None else []


class BracketError(QSpecError, ValueError):
    """A Rayleigh value fell outside the spectral bracket in use."""


class NotRepresentableError(QSpecError, ValueError):
    """A form has no representation through the given quasi-product."""


class HypothesisError(QSpecError, ValueError):
    """A form violates the boundedness hypothesis of the representation."""


class ConfigError(QSpecError, ValueError):
    """A run configuration could not be parsed or validated."""
