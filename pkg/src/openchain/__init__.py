"""Numerical workbench for open spin-s chains with non-diagonal boundaries."""
from .boundary import BoundaryParams
from .errors import (
    ConvergenceError,
    DegenerateError,
    DimensionError,
    ExtractionError,
    PoleError,
    RankDeficiencyError,
    UnsupportedConfigError,
    WorkbenchError,
)
from .rmatrix import HALF, SpinLabel
from .transfer import ModelParams, transfer

__all__ = [
    "BoundaryParams",
    "ConvergenceError",
    "DegenerateError",
    "DimensionError",
    "ExtractionError",
    "HALF",
    "ModelParams",
    "PoleError",
    "RankDeficiencyError",
    "SpinLabel",
    "UnsupportedConfigError",
    "WorkbenchError",
    "transfer",
]
