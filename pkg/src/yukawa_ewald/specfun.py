"""Special functions for the Yukawa Ewald split.

Ordinary Bessel functions and exponential integrals come from
:mod:`scipy.special`.  The incomplete modified Bessel function

    K_nu(z, w) = int_1^inf exp(-z t - w/t) t^(-nu-1) dt,   nu in {-1, 0, 1}

is evaluated by composite Gauss-Legendre quadrature in the log variable
``s = ln t``.  When ``w > z`` the integrand is stiff near ``t = 1`` and the
switch relation

    K_nu(z, w) = 2 (z/w)^(nu/2) K_nu(2 sqrt(z w)) - K_{-nu}(w, z)

is used instead, so the quadrature only ever sees ``z >= w``.
"""
from __future__ import annotations

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "bessel_k",
    "bessel_j",
    "expint_en",
    "inc_bessel_k",
    "IncompleteBesselArgs",
]

# the integrand never exceeds exp(-min_{t>=1}(z t + w / t)); past this exponent
# the value is far below any usable tolerance
UNDERFLOW_EXPONENT = 1400.0

# Two pieces: the slowly varying part t in [1, t1], t1 = max(1, 1/z), handled
# in s = ln t; and the cut-off region t = t1 + u / z, handled in u.  There the
# log of the integrand falls by at least u (z + u - w) / (z + u), so the panels
# (laid out for a plain e^-u) are stretched until that reaches 46 e-folds.
_PANELS_BULK = 3
_ORDER = 16
_TAIL_EDGES = np.array([0.0, 1.0, 3.0, 6.0, 10.0, 16.0, 24.0, 34.0, 46.0])


def _composite_rule(edges, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    edges = np.asarray(edges, dtype=float)
    width = np.diff(edges)
    nodes = (edges[:-1, None] + width[:, None] * x[None, :]).ravel()
    weights = (width[:, None] * w[None, :]).ravel()
    return nodes, weights


_BULK_U, _BULK_W = _composite_rule(np.linspace(0.0, 1.0, _PANELS_BULK + 1), _ORDER)
_TAIL_U, _TAIL_W = _composite_rule(_TAIL_EDGES, _ORDER)
_CHUNK = 16384


class IncompleteBesselArgs:
    """Validated argument triple for :func:`inc_bessel_k`."""

    __slots__ = ("nu", "z", "omega")

    def __init__(self, nu: int, z: float, omega: float):
        if nu not in (-1, 0, 1):
            raise DomainError(f"order nu must be -1, 0 or 1, got {nu!r}")
        z = float(z)
        omega = float(omega)
        if not (np.isfinite(z) and np.isfinite(omega)) or z < 0 or omega < 0:
            raise DomainError(f"z and omega must be finite and >= 0, got ({z}, {omega})")
        if nu in (-1, 0) and z == 0.0:
            raise DomainError(f"K_{nu}(0, omega) diverges")
        self.nu = nu
        self.z = z
        self.omega = omega

    def __repr__(self) -> str:
        return f"IncompleteBesselArgs(nu={self.nu}, z={self.z!r}, omega={self.omega!r})"


def bessel_k(order: int, x):
    """Modified Bessel function of the second kind, order 0 or 1."""
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("bessel_k requires finite x > 0")
    if order == 0:
        out = special.k0(x)
    elif order == 1:
        out = special.k1(x)
    else:
        raise DomainError(f"bessel_k order must be 0 or 1, got {order!r}")
    return out[()] if out.ndim == 0 else out


def bessel_j(order: int, x):
    """Bessel function of the first kind, order 0 or 1, for x >= 0."""
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise DomainError("bessel_j requires finite x >= 0")
    if order == 0:
        out = special.j0(x)
    elif order == 1:
        out = special.j1(x)
    else:
        raise DomainError(f"bessel_j order must be 0 or 1, got {order!r}")
    return out[()] if out.ndim == 0 else out


def expint_en(n: int, x):
    """Generalized exponential integral E_n(x) for integer n >= 1, x > 0."""
    if int(n) != n or n < 1:
        raise DomainError(f"expint_en order must be a positive integer, got {n!r}")
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("expint_en requires finite x > 0")
    out = special.expn(int(n), x)
    return out[()] if out.ndim == 0 else out


def _quad_ordered(nu: int, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Quadrature for z > 0 with z >= w or w <= 1 (1-d arrays)."""
    out = np.empty_like(z)
    for lo in range(0, z.size, _CHUNK):
        zc = z[lo:lo + _CHUNK, None]
        wc = w[lo:lo + _CHUNK, None]
        s1 = np.maximum(0.0, -np.log(zc))
        s = s1 * _BULK_U
        bulk = np.exp(-zc * np.exp(s) - wc * np.exp(-s) - nu * s) @ _BULK_W * s1[:, 0]
        t1 = np.exp(s1)
        b = zc - wc - _TAIL_EDGES[-1]
        u_end = 0.5 * (-b + np.sqrt(b * b + 4.0 * _TAIL_EDGES[-1] * zc))
        stretch = np.maximum(1.0, u_end / _TAIL_EDGES[-1])
        u = _TAIL_U[None, :] * stretch
        t = t1 + u / zc
        # e^{-z t} = e^{-z t1} e^{-u}; the common factor is applied after summing
        tail = np.exp(-u - wc / t - (nu + 1) * np.log(t)) @ _TAIL_W * stretch[:, 0]
        out[lo:lo + _CHUNK] = bulk + np.exp(-zc[:, 0] * t1[:, 0]) * tail / zc[:, 0]
    return out


def _inc_bessel_array(nu: int, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    floor = np.where(w <= z, z + w, 2.0 * np.sqrt(z * w))
    live = floor <= UNDERFLOW_EXPONENT
    # K_1(0, w) = (1 - e^{-w}) / w, closed form
    zero = live & (z == 0.0)
    if np.any(zero):
        wz = w[zero]
        out[zero] = np.where(wz > 0, -np.expm1(-wz) / np.where(wz > 0, wz, 1.0), 1.0)
    # the switch relation cancels badly for small w (nu = 1: both terms ~ 1/w),
    # and direct quadrature is smooth there anyway
    direct = live & (z > 0) & ((z >= w) | (w <= 1.0))
    if np.any(direct):
        out[direct] = _quad_ordered(nu, z[direct], w[direct])
    swap = live & (z > 0) & ~direct
    if np.any(swap):
        zs, ws = z[swap], w[swap]
        arg = 2.0 * np.sqrt(zs * ws)
        if nu == 0:
            lead = 2.0 * special.k0(arg)
        else:
            lead = 2.0 * (zs / ws) ** (0.5 * nu) * special.k1(arg)
        out[swap] = lead - _quad_ordered(-nu, ws, zs)
    return out


def inc_bessel_k(nu, z=None, omega=None):
    """Incomplete modified Bessel function K_nu(z, omega).

    Accepts either an :class:`IncompleteBesselArgs` or ``(nu, z, omega)``
    with ``z`` and ``omega`` scalars or broadcastable arrays.  Values with
    an integrand peak below exp(-1400) (``z + omega`` when ``omega <= z``,
    ``2 sqrt(z omega)`` otherwise) are returned as 0.
    """
    if isinstance(nu, IncompleteBesselArgs):
        args = nu
        nu, z, omega = args.nu, args.z, args.omega
    if nu not in (-1, 0, 1):
        raise DomainError(f"order nu must be -1, 0 or 1, got {nu!r}")
    z_arr, w_arr = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(omega, dtype=float))
    if np.any(~np.isfinite(z_arr)) or np.any(~np.isfinite(w_arr)):
        raise DomainError("inc_bessel_k requires finite arguments")
    if np.any(z_arr < 0) or np.any(w_arr < 0):
        raise DomainError("inc_bessel_k requires z >= 0 and omega >= 0")
    if nu in (-1, 0) and np.any(z_arr == 0):
        raise DomainError(f"K_{nu}(0, omega) diverges")
    shape = z_arr.shape
    out = _inc_bessel_array(nu, z_arr.ravel().copy(), w_arr.ravel().copy()).reshape(shape)
    return out[()] if out.ndim == 0 else out
