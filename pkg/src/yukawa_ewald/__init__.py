"""Spectral Ewald summation for the 2D Yukawa kernels K0(alpha r) and K1(alpha r) r/|r|."""
from .errors import (
    DomainError,
    DomainPadError,
    EwaldError,
    InputError,
    OracleError,
    ParameterError,
    SingularityError,
    TuningError,
)
from .geometry import PointCloud
from .kernels import FreeSpaceMollification, KernelParams
from .summation import EwaldResult, EwaldSettings, ewald_sum, ewald_sum_ongrid, resolve_settings

__all__ = [
    "DomainError",
    "DomainPadError",
    "EwaldError",
    "EwaldResult",
    "EwaldSettings",
    "FreeSpaceMollification",
    "InputError",
    "KernelParams",
    "OracleError",
    "ParameterError",
    "PointCloud",
    "SingularityError",
    "TuningError",
    "ewald_sum",
    "ewald_sum_ongrid",
    "resolve_settings",
]
