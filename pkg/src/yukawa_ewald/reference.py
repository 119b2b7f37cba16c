"""Independent oracles: adaptive quadrature, gridding-free k-sums, cross-xi checks.

Nothing here calls the production quadrature or the FFT pipeline; only the
ordinary Bessel functions from scipy are shared.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .errors import OracleError, ParameterError
from .geometry import PointCloud

__all__ = ["OracleReport", "quad_inc_bessel", "direct_ksum", "cross_xi_check"]


@dataclass
class OracleReport:
    value: float
    accuracy: float
    config: dict = field(default_factory=dict)


def _simpson(f, a, fa, m, fm, b, fb):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 60,
                      max_evals: int = 2_000_000) -> tuple[float, float]:
    """Interval halving with Richardson acceptance; returns (integral, error estimate)."""
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = _simpson(f, a, fa, m, fm, b, fb)
    stack = [(a, fa, m, fm, b, fb, whole, tol, 0)]
    total = 0.0
    err = 0.0
    evals = 3
    while stack:
        a, fa, m, fm, b, fb, whole, eps, depth = stack.pop()
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        evals += 2
        left = _simpson(f, a, fa, lm, flm, m, fm)
        right = _simpson(f, m, fm, rm, frm, b, fb)
        delta = left + right - whole
        converged = abs(delta) <= 15.0 * eps or abs(delta) <= 1e-15 * abs(left + right)
        if converged or depth >= max_depth:
            if not converged:
                raise OracleError("adaptive quadrature hit the depth limit")
            total += left + right + delta / 15.0
            err += abs(delta) / 15.0
            continue
        if evals > max_evals:
            raise OracleError("adaptive quadrature exceeded its evaluation budget")
        stack.append((m, fm, rm, frm, b, fb, right, eps / 2.0, depth + 1))
        stack.append((a, fa, lm, flm, m, fm, left, eps / 2.0, depth + 1))
    return total, err


def quad_inc_bessel(nu: int, z: float, omega: float, tol: float = 1e-14) -> OracleReport:
    """K_nu(z, omega) = int_1^inf exp(-z t - omega / t) t^(-nu-1) dt by adaptive Simpson.

    Works in u = t - 1 with the peak value factored out, so the integrand is
    O(1) near its maximum; panels grow geometrically to the decay point.
    For z = 0 (nu = 1 only) it integrates exp(-omega v) over v = 1/t in (0, 1].
    """
    if nu not in (-1, 0, 1):
        raise ParameterError("nu must be -1, 0 or 1")
    if z < 0 or omega < 0 or (z == 0 and nu != 1):
        raise OracleError(f"divergent integral for nu={nu}, z={z}, omega={omega}")
    cfg = {"nu": nu, "z": z, "omega": omega, "tol": tol}
    if z == 0:
        v, e = _adaptive_simpson(lambda x: math.exp(-omega * x), 0.0, 1.0, tol * 0.5)
        return OracleReport(v, e, cfg)

    u_peak = max(0.0, math.sqrt(omega / z) - 1.0)
    c = z * u_peak + omega / (1.0 + u_peak)

    def f(u):
        g = z * u + omega / (1.0 + u) - c + (nu + 1) * math.log1p(u)
        return math.exp(-g) if g < 745.0 else 0.0

    u_max = (c + 800.0) / z + 1.0
    edges = {0.0, u_peak, u_max}
    w = min(0.05, 0.5 / (z + omega + 1.0))
    x = w
    while x < u_max:
        edges.add(x)
        if u_peak > 0:
            edges.add(u_peak + x)
            if x < u_peak:
                edges.add(u_peak - x)
        x *= 1.5
    edges = sorted(e for e in edges if 0.0 <= e <= u_max)
    coarse = sum(_simpson(f, lo, f(lo), 0.5 * (lo + hi), f(0.5 * (lo + hi)), hi, f(hi))
                 for lo, hi in zip(edges[:-1], edges[1:]))
    scale = math.exp(-z - c)
    if coarse == 0.0 or scale == 0.0:
        return OracleReport(0.0, 0.0, cfg)
    atol = tol * abs(coarse) / len(edges)
    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = _adaptive_simpson(f, lo, hi, atol)
        total += v
        err += e
    return OracleReport(total * scale, err * scale, cfg)


def _strengths(sources: PointCloud, kernel: str):
    return sources.strengths(kernel)


def _phase_sum(kx, ky, src, f, tgt, mult_g, alpha, kernel, chunk: int = 4096):
    """sum_k A(k) sum_n f_n exp(i k.(x_t - y_n)) over the listed wave vectors."""
    out = np.zeros(len(tgt))
    for lo in range(0, len(kx), chunk):
        k1, k2 = kx[lo:lo + chunk], ky[lo:lo + chunk]
        ps = np.exp(-1j * (np.outer(k1, src[:, 0]) + np.outer(k2, src[:, 1])))
        pt = np.exp(1j * (np.outer(tgt[:, 0], k1) + np.outer(tgt[:, 1], k2)))
        if kernel == "G":
            s = ps @ f
        else:
            s = (-1j / alpha) * (k1 * (ps @ f[:, 0]) + k2 * (ps @ f[:, 1]))
        out += (pt @ (mult_g[lo:lo + chunk] * s)).real
    return out


def direct_ksum(sources: PointCloud, targets, alpha: float, xi: float, box: float, k_inf: float,
                kernel: str = "G", setting: str = "periodic",
                R: Optional[float] = None, oversample: float = 3.0) -> np.ndarray:
    """Truncated k-space sum without gridding.

    Periodic: ``L^-2 sum_{|k| <= k_inf} A(k) sum_n f_n e^{i k.(x - y_n)}`` over
    ``k = 2 pi n / L``.  Free space: trapezoid rule for ``(2 pi)^-2 int`` of the
    multiplier truncated at radius ``R`` with spacing ``2 pi / (oversample R)``.
    """
    kernel = kernel.upper()
    src = sources.positions
    tgt = targets.positions if isinstance(targets, PointCloud) else np.asarray(targets, float).reshape(-1, 2)
    f = _strengths(sources, kernel)
    if setting == "periodic":
        dk = 2 * math.pi / box
        weight = 1.0 / box**2
    elif setting == "free":
        if R is None:
            raise ParameterError("free-space oracle needs the truncation radius R")
        dk = 2 * math.pi / (oversample * R)
        weight = dk**2 / (2 * math.pi) ** 2
    else:
        raise ParameterError(f"unknown setting {setting!r}")
    n = int(math.floor(k_inf / dk))
    idx = np.arange(-n, n + 1) * dk
    kx, ky = np.meshgrid(idx, idx, indexing="ij")
    kx, ky = kx.ravel(), ky.ravel()
    kk = np.hypot(kx, ky)
    keep = kk <= k_inf
    kx, ky, kk = kx[keep], ky[keep], kk[keep]
    a2 = alpha**2 + kk**2
    A = 2 * math.pi / a2 * np.exp(-a2 / (4 * xi**2))
    if setting == "free":
        kr = kk * R
        A = A * (1.0 + kr * special.j1(kr) * special.k0(alpha * R)
                 - alpha * R * special.j0(kr) * special.k1(alpha * R))
    return weight * _phase_sum(kx, ky, src, f, tgt, A, alpha, kernel)


def cross_xi_check(sources: PointCloud, targets, alpha: float, box: float,
                   xi_pair: Sequence[float], tolerances, setting: str = "periodic",
                   kernel: str = "G") -> float:
    """max_t |u(xi_1) - u(xi_2)| with each xi truncated to ``tolerances``.

    ``tolerances`` is one tolerance or a pair (one per xi).
    """
    from .estimate import SystemMoments, tune_kinf, tune_rc
    from .fourier import grid_size_for
    from .kernels import KernelParams
    from .summation import EwaldSettings, ewald_sum

    tols = [tolerances] * 2 if np.isscalar(tolerances) else list(tolerances)
    mom = SystemMoments.from_cloud(sources, box)
    vals = []
    for xi, tol in zip(xi_pair, tols):
        p = KernelParams(alpha, xi, box)
        rc = tune_rc(tol, xi, p, mom, (kernel,))
        k = tune_kinf(tol, xi, p, mom, setting, (kernel,))
        st = EwaldSettings(setting, rc, xi, k, grid_size_for(k, box), tolerance=tol)
        vals.append(ewald_sum(sources, targets, alpha, box, st, kernel).values)
    return float(np.max(np.abs(vals[0] - vals[1])))
