"""Exception types raised across the package."""


class MpnschError(Exception):
    """Base class for all package errors."""


class DomainError(MpnschError, ValueError):
    """A singular potential was evaluated outside its domain."""


class UnsupportedPotential(MpnschError, TypeError):
    """The requested operation is not defined for this potential kind."""


class SizeMismatch(MpnschError, ValueError):
    """A field does not match the grid layout it was passed to."""


class MissingTrace(MpnschError, ValueError):
    """A trace-based wall closure was requested without trace values."""


class InfeasibleState(MpnschError, ValueError):
    """An obstacle-constrained state violates |phi| <= 1."""


class SolverError(MpnschError, RuntimeError):
    """Base class for iterative and direct solver failures.

    ``x`` holds the best iterate available when the failure happened and
    ``residual`` its residual norm (``nan`` if unknown).
    """

    def __init__(self, message, x=None, residual=float("nan")):
        super().__init__(message)
        self.x = x
        self.residual = residual


class Breakdown(SolverError):
    pass


class MaxIterExceeded(SolverError):
    pass


class LinearSolveFailed(SolverError):
    pass


class NewtonDiverged(SolverError):
    def __init__(self, message, x=None, residual=float("nan"), history=()):
        super().__init__(message, x, residual)
        self.history = list(history)


class PicardDiverged(SolverError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class PdasCycled(SolverError):
    pass


class EringenViolation(MpnschError, ValueError):
    pass


class ConfigError(MpnschError, ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(ConfigError):
    def __init__(self, key, constraint):
        super().__init__(f"{key}: {constraint}")
        self.key = key
        self.constraint = constraint
