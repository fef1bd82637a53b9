"""Exception hierarchy shared by every layer of the workbench."""


class WorkbenchError(Exception):
    """Base class for all workbench failures."""


class DimensionError(WorkbenchError, ValueError):
    """A matrix or Hilbert-space dimension is inconsistent or exceeds the cap."""


class PoleError(WorkbenchError, ZeroDivisionError):
    """An evaluation point coincides with a pole of a normalizing factor."""


class ConvergenceError(WorkbenchError, RuntimeError):
    """An iterative or dense eigen-solver failed; carries the offending residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class RankDeficiencyError(WorkbenchError, ValueError):
    def __init__(self, message: str, rank: int):
        super().__init__(message)
        self.rank = rank


class DegenerateError(WorkbenchError, ValueError):
    """Spectrum or parameter set is too degenerate for the requested construction."""


class UnsupportedConfigError(WorkbenchError, ValueError):
    pass


class ExtractionError(WorkbenchError, RuntimeError):
    """Q-polynomial extraction from a sampled eigenvalue failed its fit test."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
