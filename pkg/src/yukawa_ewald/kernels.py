"""Yukawa kernels and their Ewald split.

All pair functions take the separation ``r = x - y`` (target minus source).
``G(r) = K0(alpha |r|)`` and ``H(r) = K1(alpha |r|) r / |r| = -(1/alpha) grad G``.

Fourier multipliers follow the inverse-transform convention
``f(r) = (2 pi)^-2 int f_hat(k) exp(i k.r) dk``; the vector multipliers of
``H`` are purely imaginary and are returned as their imaginary parts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ParameterError, SingularityError
from .specfun import inc_bessel_k

__all__ = [
    "KernelParams",
    "FreeSpaceMollification",
    "g_direct",
    "h_direct",
    "g_real",
    "h_real",
    "g_fourier_periodic",
    "h_fourier_periodic",
    "g_fourier_freespace",
    "h_fourier_freespace",
    "g_self",
    "h_self",
]


@dataclass(frozen=True)
class KernelParams:
    alpha: float
    xi: float
    box_length: float = 2.0 * math.pi

    def __post_init__(self):
        for name in ("alpha", "xi", "box_length"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be positive and finite, got {v!r}")

    @property
    def screening(self) -> float:
        """alpha^2 / (4 xi^2), the second argument of the real-space K_nu."""
        return self.alpha**2 / (4.0 * self.xi**2)


@dataclass(frozen=True)
class FreeSpaceMollification:
    """Truncation radius ``R = sqrt(2) L_tilde`` of the mollified kernel."""

    R: float
    L_tilde: float

    def __post_init__(self):
        if not (self.R > 0 and self.L_tilde > 0):
            raise ParameterError("R and L_tilde must be positive")
        if not math.isclose(self.R, math.sqrt(2.0) * self.L_tilde, rel_tol=1e-12):
            raise ParameterError("R must equal sqrt(2) * L_tilde")

    @classmethod
    def from_extended_side(cls, L_tilde: float) -> "FreeSpaceMollification":
        return cls(R=math.sqrt(2.0) * L_tilde, L_tilde=L_tilde)


def _radius(r, what: str) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise SingularityError(f"{what} is singular at r = 0")
    return r


def _vec(rvec) -> tuple[np.ndarray, np.ndarray]:
    rvec = np.asarray(rvec, dtype=float)
    if rvec.shape[-1] != 2:
        raise ValueError("separation vectors must have trailing dimension 2")
    return rvec, np.hypot(rvec[..., 0], rvec[..., 1])


def _unwrap(a):
    return a[()] if isinstance(a, np.ndarray) and a.ndim == 0 else a


def g_direct(r, params: KernelParams):
    r = _radius(r, "G")
    return _unwrap(special.k0(params.alpha * r))


def h_direct(rvec, params: KernelParams) -> np.ndarray:
    rvec, r = _vec(rvec)
    _radius(r, "H")
    return (special.k1(params.alpha * r) / r)[..., None] * rvec


def g_real(r, params: KernelParams):
    """Real-space part 1/2 K_0(r^2 xi^2, alpha^2/4xi^2)."""
    r = _radius(r, "G^R")
    return _unwrap(0.5 * inc_bessel_k(0, (r * params.xi) ** 2, params.screening))


def h_real(rvec, params: KernelParams) -> np.ndarray:
    """Real-space part (xi^2/alpha) r K_{-1}(r^2 xi^2, alpha^2/4xi^2)."""
    rvec, r = _vec(rvec)
    _radius(r, "H^R")
    scale = params.xi**2 / params.alpha * inc_bessel_k(-1, (r * params.xi) ** 2, params.screening)
    return np.asarray(scale)[..., None] * rvec


def g_fourier_periodic(k, params: KernelParams):
    k2 = np.asarray(k, dtype=float) ** 2
    a2 = params.alpha**2 + k2
    return _unwrap(2.0 * np.pi / a2 * np.exp(-a2 / (4.0 * params.xi**2)))


def h_fourier_periodic(kvec, params: KernelParams) -> np.ndarray:
    """Imaginary parts of -i k/alpha * G^F(k); zero at k = 0."""
    kvec, k = _vec(kvec)
    return (-g_fourier_periodic(k, params) / params.alpha)[..., None] * kvec


def _mollifier_bracket(k: np.ndarray, alpha: float, R: float) -> np.ndarray:
    """1 + kR J1(kR) K0(alpha R) - alpha R J0(kR) K1(alpha R).

    Closed form of (alpha^2 + k^2) int_0^R K0(alpha r) J0(k r) r dr.
    """
    kr = k * R
    small = kr < 1e-4
    j0 = np.where(small, 1.0 - kr**2 / 4.0, special.j0(kr))
    j1 = np.where(small, 0.5 * kr - kr**3 / 16.0, special.j1(kr))
    aR = alpha * R
    return 1.0 + kr * j1 * special.k0(aR) - aR * j0 * special.k1(aR)


def g_fourier_freespace(k, params: KernelParams, moll: FreeSpaceMollification):
    k = np.asarray(k, dtype=float)
    a2 = params.alpha**2 + k**2
    out = (
        2.0 * np.pi / a2
        * _mollifier_bracket(k, params.alpha, moll.R)
        * np.exp(-a2 / (4.0 * params.xi**2))
    )
    return _unwrap(out)


def h_fourier_freespace(kvec, params: KernelParams, moll: FreeSpaceMollification) -> np.ndarray:
    kvec, k = _vec(kvec)
    return (-g_fourier_freespace(k, params, moll) / params.alpha)[..., None] * kvec


def g_self(params: KernelParams) -> float:
    """lim_{r->0} G^R(r) - G(r) = -1/2 E_1(alpha^2 / 4 xi^2)."""
    return -0.5 * float(special.exp1(params.screening))


def h_self(params: KernelParams) -> np.ndarray:
    return np.zeros(2)
