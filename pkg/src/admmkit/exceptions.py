"""Exception types shared across the package."""


class AdmmKitError(Exception):
    """Base class for all errors raised by admmkit."""


class DimensionError(AdmmKitError, ValueError):
    """An input has the wrong shape or an out-of-range index."""


class NumericalError(AdmmKitError, ArithmeticError):
    """A numerical routine failed (factorization breakdown, non-psd matrix).

    ``detail`` carries routine-specific context, e.g. the pivot index at
    which a Cholesky factorization broke down.
    """

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


class ConfigError(AdmmKitError, ValueError):
    """An unsupported or inconsistent solver/problem configuration."""


class DegenerateProblemError(AdmmKitError, ValueError):
    """The problem has no usable curvature (all-zero data, no regularizer)."""


class ParseError(AdmmKitError, ValueError):
    """A text input failed to parse. ``line`` is the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TuningError(AdmmKitError, RuntimeError):
    """Stepsize tuning failed; ``grid`` lists the candidates that were tried."""

    def __init__(self, message, grid=()):
        super().__init__(message)
        self.grid = tuple(grid)
