class GdmError(Exception):
    """Base class for all errors raised by the package."""


class DataError(GdmError, ValueError):
    """Input data is malformed or unusable (bad file, single class, ...)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonConvergenceError(GdmError, RuntimeError):
    """The subproblem solver hit its iteration cap before meeting tolerance.

    The best iterate found so far is attached so callers can decide whether
    it is good enough.
    """

    def __init__(self, message, alpha=None, residual=None):
        super().__init__(message)
        self.alpha = alpha
        self.residual = residual
