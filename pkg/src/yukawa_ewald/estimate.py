"""Truncation-error estimates (RMS over targets) and the parameter tuner."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from .errors import TuningError
from .fourier import grid_size_for
from .geometry import PointCloud
from .kernels import FreeSpaceMollification, KernelParams

__all__ = [
    "SystemMoments",
    "est_real_g",
    "est_real_h",
    "est_k_g",
    "est_k_h",
    "est_k_g_freespace",
    "est_k_h_freespace",
    "TuneResult",
    "tune",
    "tune_rc",
    "tune_kinf",
    "regime_flags",
]


@dataclass(frozen=True)
class SystemMoments:
    """Squared strength sums ``Q_G = sum f^2`` and ``Q_H = sum_j sum_n f_j^2``."""

    Q_G: float
    Q_H: float
    N: int
    L: float

    def __post_init__(self):
        if self.Q_G < 0 or self.Q_H < 0:
            raise ValueError("strength moments must be non-negative")

    @classmethod
    def from_cloud(cls, cloud: PointCloud, L: float) -> "SystemMoments":
        qg = float(np.sum(cloud.strengths_scalar**2)) if cloud.strengths_scalar is not None else 0.0
        qh = float(np.sum(cloud.strengths_vector**2)) if cloud.strengths_vector is not None else 0.0
        return cls(qg, qh, len(cloud), L)


def est_real_g(r_c: float, xi: float, params: KernelParams, moments: SystemMoments) -> float:
    L = moments.L
    sq = math.pi * moments.Q_G * math.exp(-2 * r_c**2 * xi**2) / (4 * L**2 * xi**6 * r_c**4)
    return math.sqrt(sq)


def est_real_h(r_c: float, xi: float, params: KernelParams, moments: SystemMoments) -> float:
    L, a = moments.L, params.alpha
    sq = math.pi * moments.Q_H * math.exp(-2 * r_c**2 * xi**2) / (L**2 * a**2 * r_c**2 * xi**2)
    return math.sqrt(sq)


def est_k_g(k_inf: float, xi: float, params: KernelParams, moments: SystemMoments) -> float:
    L = moments.L
    s = params.alpha**2 + k_inf**2
    sq = (512 * moments.Q_G * math.pi**3 * xi**4 * math.exp(-2 * s / (4 * xi**2))
          / (L**5 * s**2 * k_inf))
    return math.sqrt(sq)


def est_k_h(k_inf: float, xi: float, params: KernelParams, moments: SystemMoments) -> float:
    """RMS k-space truncation error for H.

    From |e(r)|^2 ~ 4 pi^3 k_inf e^{-2 s lambda} / (alpha^2 L^4 r s^2 lambda^2)
    averaged over the disc of radius L/2 (mean of 1/r is 4/L), same route as G.
    """
    L, a = moments.L, params.alpha
    s = a**2 + k_inf**2
    sq = (256 * math.pi**3 * moments.Q_H * k_inf * xi**4 * math.exp(-2 * s / (4 * xi**2))
          / (L**5 * a**2 * s**2))
    return math.sqrt(sq)


def est_k_g_freespace(k_inf: float, xi: float, params: KernelParams, moll: FreeSpaceMollification,
                      moments: SystemMoments) -> float:
    L, a, R = moments.L, params.alpha, moll.R
    s = a**2 + k_inf**2
    bracket = (1.0 / math.sqrt(2 * math.pi * k_inf)
               - a * special.k0(a * R) / (math.sqrt(R) * math.pi)
               - a * math.sqrt(R) * special.k1(a * R) / (math.pi * k_inf))
    sq = 64 * moments.Q_G * xi**4 / (L * s**2) * math.exp(-2 * s / (4 * xi**2)) * bracket**2
    return math.sqrt(sq)


def est_k_h_freespace(k_inf: float, xi: float, params: KernelParams, moll: FreeSpaceMollification,
                      moments: SystemMoments) -> float:
    L, a, R = moments.L, params.alpha, moll.R
    s = a**2 + k_inf**2
    bracket = (math.sqrt(2 * math.pi * k_inf)
               - 8 * a * special.k0(a * R) * k_inf / math.sqrt(R)
               - 2 * a * math.sqrt(R) * special.k1(a * R))
    sq = (8 * moments.Q_H * xi**2 / (L * math.pi**2 * a**2)
          * math.exp(-2 * s / (4 * xi**2)) / s**2 * bracket**2)
    return math.sqrt(sq)


# ----------------------------------------------------------------- tuning

@dataclass
class TuneResult:
    xi: float
    k_inf: float
    M: int
    r_c: float
    estimates: dict
    diagnostics: list = field(default_factory=list)


def regime_flags(r_c: float, xi: float, k_inf: Optional[float] = None) -> list:
    """Out-of-regime notes: r_c xi < 1 or k_inf < 2 xi."""
    out = []
    if r_c * xi < 1.0:
        out.append(f"r_c*xi = {r_c * xi:.3g} < 1: real-space estimate out of regime")
    if k_inf is not None and k_inf < 2.0 * xi:
        out.append(f"k_inf = {k_inf:.3g} < 2 xi: k-space estimate out of regime")
    return out


def _bisect_log(fn: Callable[[float], float], lo: float, hi: float, tol: float, what: str,
                iters: int = 60) -> float:
    """Smallest x in [lo, hi] with fn(x) <= tol, fn decreasing; bisection in log x."""
    f_hi = fn(hi)
    if not f_hi <= tol:
        raise TuningError(f"{what}: estimate {f_hi:.3e} at upper bracket {hi:.4g} exceeds tolerance {tol:.1e}")
    if fn(lo) <= tol:
        return lo
    a, b = math.log(lo), math.log(hi)
    for _ in range(iters):
        m = 0.5 * (a + b)
        if fn(math.exp(m)) <= tol:
            b = m
        else:
            a = m
    return math.exp(b)


def _check_tol(tolerance: float) -> None:
    if not (1e-14 < tolerance < 1e-1):
        raise TuningError(f"tolerance {tolerance} outside (1e-14, 1e-1)")


def _real_fn(params, moments, kernels):
    fns = []
    if "G" in kernels:
        fns.append(est_real_g)
    if "H" in kernels:
        fns.append(est_real_h)
    return lambda r_c, xi: max(f(r_c, xi, params, moments) for f in fns)


def _k_fn(params, moments, kernels, setting, moll):
    fns = []
    if setting == "periodic":
        if "G" in kernels:
            fns.append(lambda k, xi: est_k_g(k, xi, params, moments))
        if "H" in kernels:
            fns.append(lambda k, xi: est_k_h(k, xi, params, moments))
    else:
        if "G" in kernels:
            fns.append(lambda k, xi: est_k_g_freespace(k, xi, params, moll, moments))
        if "H" in kernels:
            fns.append(lambda k, xi: est_k_h_freespace(k, xi, params, moll, moments))
    return lambda k, xi: max(f(k, xi) for f in fns)


def _default_moll(params: KernelParams) -> FreeSpaceMollification:
    # the pad is not known before tuning; sqrt(2) * 1.5 L is a representative radius
    return FreeSpaceMollification.from_extended_side(1.5 * params.box_length)


def tune_rc(tolerance: float, xi: float, params: KernelParams, moments: SystemMoments,
            kernels: Sequence[str] = ("G", "H")) -> float:
    """Smallest cut-off radius whose real-space estimates meet ``tolerance`` at ``xi``."""
    _check_tol(tolerance)
    fn = _real_fn(params, moments, [k.upper() for k in kernels])
    return _bisect_log(lambda r: fn(r, xi), 0.1 / xi, 100.0 / xi, tolerance, "r_c")


def tune_kinf(tolerance: float, xi: float, params: KernelParams, moments: SystemMoments,
              setting: str = "periodic", kernels: Sequence[str] = ("G", "H"),
              moll: Optional[FreeSpaceMollification] = None) -> float:
    """Smallest k_inf whose k-space estimates meet ``tolerance`` at ``xi``."""
    _check_tol(tolerance)
    moll = moll or _default_moll(params)
    fn = _k_fn(params, moments, [k.upper() for k in kernels], setting, moll)
    return _bisect_log(lambda k: fn(k, xi), 0.1 * xi, 100.0 * xi, tolerance, "k_inf")


def tune(tolerance: float, r_c: float, params: KernelParams, moments: SystemMoments,
         setting: str = "periodic", kernels: Sequence[str] = ("G", "H"),
         moll: Optional[FreeSpaceMollification] = None) -> TuneResult:
    """Pick xi from the real-space estimates at ``r_c``, then k_inf and M."""
    _check_tol(tolerance)
    if setting not in ("periodic", "free"):
        raise TuningError(f"unknown setting {setting!r}")
    kernels = [k.upper() for k in kernels]
    moll = moll or _default_moll(params)
    real = _real_fn(params, moments, kernels)
    # real-space estimates fall with xi: smallest xi meeting the tolerance
    xi = _bisect_log(lambda x: real(r_c, x), 0.1 / r_c, 100.0 / r_c, tolerance, "xi")
    k_inf = tune_kinf(tolerance, xi, params, moments, setting, kernels, moll)
    M = grid_size_for(k_inf, params.box_length)
    ests = {"real": real(r_c, xi), "kspace": _k_fn(params, moments, kernels, setting, moll)(k_inf, xi)}
    return TuneResult(xi, k_inf, M, r_c, ests, regime_flags(r_c, xi, k_inf))
