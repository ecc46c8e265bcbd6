"""Exception hierarchy shared by the simulator modules."""


class CSDVSError(Exception):
    """Base class for all simulator errors."""

    exit_code = 1


class ConfigError(CSDVSError, ValueError):
    """Invalid parameters or geometry."""

    exit_code = 2


class FormatError(CSDVSError, ValueError):
    """Malformed input file (bad header, mixed dimensions, ...)."""

    exit_code = 3


class DataError(CSDVSError, ValueError):
    """Non-finite values reaching a model stage."""

    exit_code = 2


class SolverError(CSDVSError, RuntimeError):
    """Iterative surround solve failed to reach its tolerance."""

    exit_code = 4

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class FitError(CSDVSError, ValueError):
    """Response too small or too short to fit a space constant."""

    exit_code = 2
