"""Real-space Ewald sums over cell-list neighbours, and direct O(N^2) sums."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize, special

from .errors import ParameterError, SingularityError
from .geometry import PointCloud, build_cell_list, neighbor_pairs
from .kernels import KernelParams, g_self
from .specfun import inc_bessel_k

__all__ = [
    "RealSpaceConfig",
    "real_sum",
    "real_sum_g",
    "real_sum_h",
    "direct_sum",
    "truncated_direct_sum",
    "direct_cutoff_radius",
]


@dataclass(frozen=True)
class RealSpaceConfig:
    r_c: float
    periodic: bool = True
    include_self: bool = True
    # free space: bounding square (lo, hi); periodic: (0, L) is implied
    domain: Optional[tuple[float, float]] = None


def _as_points(pts) -> np.ndarray:
    if isinstance(pts, PointCloud):
        return pts.positions
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def _domain(params: KernelParams, cfg_domain, periodic: bool, *clouds) -> tuple[float, float]:
    if periodic:
        return (0.0, params.box_length)
    if cfg_domain is not None:
        return cfg_domain
    allp = np.vstack([c for c in clouds if len(c)]) if any(len(c) for c in clouds) else np.zeros((1, 2))
    lo = float(allp.min())
    hi = float(allp.max())
    return (lo, max(hi, lo) + 1e-12 * max(1.0, abs(hi)))


def _check_coincident(t: np.ndarray, zero: np.ndarray, ntargets: int) -> np.ndarray:
    """Targets sitting exactly on a source; more than one such source is singular."""
    hits = np.bincount(t[zero], minlength=ntargets)
    if np.any(hits > 1):
        i = int(np.flatnonzero(hits > 1)[0])
        raise SingularityError(f"target {i} coincides with {hits[i]} sources")
    return hits


def _pair_kernel(kernel: str, sep: np.ndarray, r2: np.ndarray, params: KernelParams,
                 split: bool) -> np.ndarray:
    """Kernel values for nonzero separations; split=False gives the unsplit kernel."""
    a = params.alpha
    if kernel == "G":
        if split:
            return 0.5 * inc_bessel_k(0, r2 * params.xi**2, params.screening)
        return special.k0(a * np.sqrt(r2))
    if split:
        s = params.xi**2 / a * inc_bessel_k(-1, r2 * params.xi**2, params.screening)
    else:
        r = np.sqrt(r2)
        s = special.k1(a * r) / r
    return s[:, None] * sep


def _neighbour_sum(sources, targets, params, kernel, r_c, periodic, domain, split):
    src = _as_points(sources)
    tgt = _as_points(targets)
    kernel = kernel.upper()
    f = sources.strengths(kernel) if isinstance(sources, PointCloud) else None
    if f is None:
        raise ParameterError("sources must be a PointCloud carrying strengths")
    dom = _domain(params, domain, periodic, src, tgt)
    cl = build_cell_list(src, r_c, dom, periodic)
    out = np.zeros(len(tgt))
    coincident = np.zeros(len(tgt), dtype=np.int64)
    for blk in neighbor_pairs(cl, tgt):
        r2 = np.einsum("ij,ij->i", blk.sep, blk.sep)
        zero = r2 == 0.0
        coincident += _check_coincident(blk.target, zero, len(tgt))
        live = ~zero
        t, s, sep, r2 = blk.target[live], blk.source[live], blk.sep[live], r2[live]
        val = _pair_kernel(kernel, sep, r2, params, split)
        if kernel == "G":
            contrib = val * f[s]
        else:
            contrib = np.einsum("ij,ij->i", val, f[s])
        out += np.bincount(t, weights=contrib, minlength=len(tgt))
    if np.any(coincident > 1):
        raise SingularityError("a target coincides with more than one source")
    return out, coincident.astype(bool), f


def real_sum(sources: PointCloud, targets, params: KernelParams, cfg: RealSpaceConfig,
             kernel: str = "G") -> np.ndarray:
    """Truncated real-space sum (plus the self term where a source sits on a target)."""
    kernel = kernel.upper()
    out, hit, f = _neighbour_sum(sources, targets, params, kernel, cfg.r_c, cfg.periodic,
                                 cfg.domain, split=True)
    if kernel == "G" and cfg.include_self and np.any(hit):
        # the coincident source's strength: recover via exact position match
        tgt = _as_points(targets)
        src = _as_points(sources)
        idx = _coincident_source(tgt[hit], src, params.box_length if cfg.periodic else None)
        out[hit] += g_self(params) * f[idx]
    return out


def _coincident_source(tpos: np.ndarray, src: np.ndarray, period: Optional[float]) -> np.ndarray:
    keys = {}
    for i, p in enumerate(map(tuple, src)):
        keys.setdefault(p, i)
    out = np.empty(len(tpos), dtype=np.int64)
    for j, p in enumerate(map(tuple, tpos)):
        if p in keys:
            out[j] = keys[p]
            continue
        # periodic image coincidence (e.g. x = 0 vs x = L is impossible inside [0, L))
        d = src - np.asarray(p)
        if period is not None:
            d -= period * np.round(d / period)
        out[j] = int(np.flatnonzero((d == 0).all(axis=1))[0])
    return out


def real_sum_g(sources, targets, params, cfg):
    return real_sum(sources, targets, params, cfg, kernel="G")


def real_sum_h(sources, targets, params, cfg):
    return real_sum(sources, targets, params, cfg, kernel="H")


def _images_sum(src, f, tgt, params, kernel, shifts):
    """Sum of unsplit kernels over the listed image shifts, skipping r = 0."""
    a = params.alpha
    out = np.zeros(len(tgt))
    block = max(1, 2_000_000 // max(1, len(src)))
    for lo in range(0, len(tgt), block):
        t = tgt[lo:lo + block]
        acc = np.zeros(len(t))
        for sh in shifts:
            d = t[:, None, :] - src[None, :, :] - sh
            r = np.hypot(d[..., 0], d[..., 1])
            zero = r == 0.0
            if np.any(zero.sum(axis=1) > 1):
                raise SingularityError("a target coincides with more than one source")
            rs = np.where(zero, 1.0, r)
            if kernel == "G":
                v = np.where(zero, 0.0, special.k0(a * rs)) @ f
            else:
                s = np.where(zero, 0.0, special.k1(a * rs) / rs)
                v = np.einsum("ts,tsj,sj->t", s, d, f)
            acc += v
        out[lo:lo + block] = acc
    return out


def direct_sum(sources: PointCloud, targets, params: KernelParams, kernel: str = "G",
               mode: str = "free", images: Optional[int] = None, tol: float = 1e-14,
               max_images: int = 64) -> np.ndarray:
    """O(N^2) reference sum of the unsplit kernel.

    ``mode="periodic"`` sums image shells ``max(|p1|, |p2|) <= P``; without an
    explicit ``images`` P starts at 2 and grows until one more shell changes
    the result by less than ``tol`` (absolute, max over targets).
    """
    kernel = kernel.upper()
    src = _as_points(sources)
    tgt = _as_points(targets)
    f = sources.strengths(kernel)
    if mode == "free":
        return _images_sum(src, f, tgt, params, kernel, [np.zeros(2)])
    if mode != "periodic":
        raise ParameterError(f"unknown direct-sum mode {mode!r}")
    L = params.box_length

    def shell(P):
        if P == 0:
            return [np.zeros(2)]
        return [np.array([i, j], dtype=float) * L
                for i in range(-P, P + 1) for j in range(-P, P + 1) if max(abs(i), abs(j)) == P]

    out = np.zeros(len(tgt))
    P = 0
    target_P = images if images is not None else 2
    while True:
        add = _images_sum(src, f, tgt, params, kernel, shell(P))
        out += add
        if P >= target_P:
            if images is not None or np.max(np.abs(add)) < tol:
                return out
            if P >= max_images:
                raise ParameterError(f"periodic image sum not converged after {P} shells")
        P += 1


def direct_cutoff_radius(alpha: float, eps: float) -> float:
    """Smallest r with sqrt(pi / (2 alpha r)) exp(-alpha r) <= eps."""
    if not (0 < eps):
        raise ParameterError("eps must be positive")

    def env(r):
        return 0.5 * math.log(math.pi / (2.0 * alpha * r)) - alpha * r - math.log(eps)

    lo = 1e-300
    if env(lo) <= 0:
        return lo
    hi = 1.0 / alpha
    while env(hi) > 0:
        hi *= 2.0
    lo = min(lo, hi / 2)
    return optimize.brentq(env, hi / 2 if env(hi / 2) > 0 else lo, hi, xtol=1e-15, rtol=1e-15)


def truncated_direct_sum(sources: PointCloud, targets, params: KernelParams, eps: float,
                         kernel: str = "G", periodic: bool = False,
                         domain: Optional[tuple[float, float]] = None) -> np.ndarray:
    """Neighbour-list sum of the unsplit kernel inside the envelope radius r~."""
    r_t = direct_cutoff_radius(params.alpha, eps)
    src = _as_points(sources)
    tgt = _as_points(targets)
    dom = _domain(params, domain, periodic, src, tgt)
    limit = (dom[1] - dom[0]) / 2 if periodic else dom[1] - dom[0]
    if r_t > limit:
        warnings.warn(f"cut-off radius {r_t:.4g} exceeds the domain; using the direct sum",
                      RuntimeWarning, stacklevel=2)
        return direct_sum(sources, targets, params, kernel, "periodic" if periodic else "free")
    out, _, _ = _neighbour_sum(sources, targets, params, kernel, r_t, periodic, domain, split=False)
    return out
