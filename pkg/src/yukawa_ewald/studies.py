"""Experiment drivers: truncation-error sweeps, the alpha study and benchmarks."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .estimate import (
    SystemMoments,
    est_k_g,
    est_k_h,
    est_real_g,
    est_real_h,
    tune,
)
from .fourier import grid_size_for, make_free_space_plan
from .geometry import PointCloud, build_cell_list, neighbor_pairs
from .kernels import KernelParams, g_fourier_freespace, g_fourier_periodic
from .realspace import _pair_kernel, direct_sum
from .summation import EwaldSettings, ewald_sum

__all__ = [
    "random_cloud",
    "grid_targets",
    "rms",
    "SweepRow",
    "sweep_real",
    "sweep_kspace",
    "AlphaRow",
    "alpha_study",
    "alpha_threshold",
    "BenchRow",
    "bench",
    "fit_exponent",
]


def random_cloud(n: int, box: float, seed: int, rng: Optional[np.random.Generator] = None) -> PointCloud:
    """Uniform positions in [0, box)^2 and strengths in [0, 1) from a Philox stream."""
    rng = rng or np.random.Generator(np.random.Philox(seed))
    pos = rng.uniform(0.0, box, (n, 2))
    f = rng.uniform(0.0, 1.0, n)
    fv = rng.uniform(0.0, 1.0, (n, 2))
    return PointCloud(pos, f, fv)


def grid_targets(n: int, box: float) -> np.ndarray:
    xs = np.arange(n) * box / n
    return np.stack(np.meshgrid(xs, xs, indexing="ij"), -1).reshape(-1, 2)


def rms(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


@dataclass(frozen=True)
class SweepRow:
    xi: float
    value: float  # r_c or k_inf
    measured: float
    estimate: float


def _tail_sums(contrib: np.ndarray, key: np.ndarray, target: np.ndarray, cuts: np.ndarray,
               ntargets: int, acc: np.ndarray) -> None:
    """acc[j, t] += sum of contributions to target t with key > cuts[j]."""
    # bin b = number of cuts strictly below key; contributions with bin b count for cuts j < b
    bins = np.searchsorted(cuts, key, side="left")
    for j in range(len(cuts)):
        m = bins > j
        if np.any(m):
            acc[j] += np.bincount(target[m], weights=contrib[m], minlength=ntargets)


def sweep_real(sources: PointCloud, targets, alpha: float, box: float, xis: Sequence[float],
               radii: Sequence[float], kernel: str = "G") -> list[SweepRow]:
    """Periodic real-space truncation error vs r_c.

    The reference keeps every pair out to ``r xi = 6.5`` (or half the box),
    where the split kernel is below 1e-18; the error for each r_c is the sum
    of the pairs beyond it.
    """
    kernel = kernel.upper()
    tgt = targets.positions if isinstance(targets, PointCloud) else np.asarray(targets, float).reshape(-1, 2)
    mom = SystemMoments.from_cloud(sources, box)
    est = est_real_g if kernel == "G" else est_real_h
    f = sources.strengths(kernel)
    rows = []
    for xi in xis:
        p = KernelParams(alpha, xi, box)
        r_ref = min(0.5 * box, 6.5 / xi)
        cuts = np.array(sorted(r for r in radii if r < r_ref), dtype=float)
        if cuts.size == 0:
            continue
        acc = np.zeros((len(cuts), len(tgt)))
        cl = build_cell_list(sources.positions, r_ref, (0.0, box), True)
        for blk in neighbor_pairs(cl, tgt):
            r2 = np.einsum("ij,ij->i", blk.sep, blk.sep)
            live = r2 > 0
            sep, r2, t, src = blk.sep[live], r2[live], blk.target[live], blk.source[live]
            val = _pair_kernel(kernel, sep, r2, p, split=True)
            contrib = val * f[src] if kernel == "G" else np.einsum("ij,ij->i", val, f[src])
            _tail_sums(contrib, np.sqrt(r2), t, cuts, len(tgt), acc)
        for j, r in enumerate(cuts):
            rows.append(SweepRow(float(xi), float(r), float(np.sqrt(np.mean(acc[j] ** 2))),
                                 est(r, xi, p, mom)))
    return rows


def sweep_kspace(sources: PointCloud, targets, alpha: float, box: float, xis: Sequence[float],
                 kinfs: Sequence[float], kernel: str = "G", chunk: int = 2048) -> list[SweepRow]:
    """Periodic k-space truncation error vs k_inf from explicit mode sums.

    Modes out to ``k = 12.9 xi`` (screening factor below 1e-18) form the
    reference; the error for each k_inf is the sum over the modes beyond it.
    Only the half plane is visited; conjugate modes double the real part.
    """
    kernel = kernel.upper()
    tgt = targets.positions if isinstance(targets, PointCloud) else np.asarray(targets, float).reshape(-1, 2)
    src = sources.positions
    f = sources.strengths(kernel)
    mom = SystemMoments.from_cloud(sources, box)
    est = est_k_g if kernel == "G" else est_k_h
    rows = []
    dk = 2 * math.pi / box
    for xi in xis:
        p = KernelParams(alpha, xi, box)
        k_ref = 12.9 * xi
        cuts = np.array(sorted(k for k in kinfs if k < k_ref), dtype=float)
        if cuts.size == 0:
            continue
        n = int(k_ref // dk)
        ii, jj = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        half = (ii > 0) | ((ii == 0) & (jj > 0))
        k1, k2 = ii[half] * dk, jj[half] * dk
        kk = np.hypot(k1, k2)
        keep = (kk <= k_ref) & (kk > cuts[0])
        k1, k2, kk = k1[keep], k2[keep], kk[keep]
        A = g_fourier_periodic(kk, p) * 2.0 / box**2
        acc = np.zeros((len(cuts), len(tgt)))
        for lo in range(0, len(kk), chunk):
            sl = slice(lo, lo + chunk)
            ps = np.exp(-1j * (np.outer(k1[sl], src[:, 0]) + np.outer(k2[sl], src[:, 1])))
            if kernel == "G":
                S = ps @ f
            else:
                S = (-1j / alpha) * (k1[sl] * (ps @ f[:, 0]) + k2[sl] * (ps @ f[:, 1]))
            pt = np.exp(1j * (np.outer(k1[sl], tgt[:, 0]) + np.outer(k2[sl], tgt[:, 1])))
            contrib = ((A[sl] * S)[:, None] * pt).real  # (modes, targets)
            bins = np.searchsorted(cuts, kk[sl], side="left")
            onehot = np.zeros((len(cuts), contrib.shape[0]))
            # a mode with |k| > cuts[j] counts towards every j < bins
            for j in range(len(cuts)):
                onehot[j] = bins > j
            acc += onehot @ contrib
        for j, k in enumerate(cuts):
            rows.append(SweepRow(float(xi), float(k), float(np.sqrt(np.mean(acc[j] ** 2))),
                                 est(k, xi, p, mom)))
    return rows


@dataclass(frozen=True)
class AlphaRow:
    alpha_scaled: float  # alpha L / 2 pi
    err_plain: float
    err_mollified: float
    multiplier_gap: float  # G^F(0) - G^{F,R}(0)


def alpha_study(sources: PointCloud, box: float, scaled_alphas: Sequence[float],
                tolerance: float = 1e-12, r_c: float = 1.0, kernel: str = "G", p: int = 24) -> list[AlphaRow]:
    """Free-space error of the plain vs truncated-kernel multiplier across alpha."""
    kernel = kernel.upper()
    mom = SystemMoments.from_cloud(sources, box)
    rows = []
    for s in scaled_alphas:
        a = s * 2.0 * math.pi / box
        probe = KernelParams(a, 1.0, box)
        tr = tune(tolerance, r_c, probe, mom, "free", (kernel,))
        st = EwaldSettings("free", r_c, tr.xi, tr.k_inf, tr.M, p, tolerance)
        params = KernelParams(a, tr.xi, box)
        ref = direct_sum(sources, sources.positions, params, kernel)
        errs = {}
        plan = None
        for mult in ("mollified", "plain"):
            plan = make_free_space_plan(params, tolerance, k_inf=tr.k_inf, p=p, multiplier=mult)
            u = ewald_sum(sources, sources.positions, a, box, st, kernel, plan=plan).values
            errs[mult] = float(np.max(np.abs(u - ref)))
        gap = float(g_fourier_periodic(0.0, params) - g_fourier_freespace(0.0, params, plan.mollification))
        rows.append(AlphaRow(float(s), errs["plain"], errs["mollified"], gap))
    return rows


def alpha_threshold(rows: Sequence[AlphaRow], match: float = 1e-10) -> Optional[float]:
    """Smallest swept alpha L / 2 pi from which on the plain multiplier matches the truncated one."""
    out = None
    for r in sorted(rows, key=lambda r: r.alpha_scaled, reverse=True):
        if abs(r.err_plain - r.err_mollified) <= max(match, 10 * r.err_mollified):
            out = r.alpha_scaled
        else:
            break
    return out


@dataclass(frozen=True)
class BenchRow:
    N: int
    r_c: float
    xi: float
    M: int
    timings: dict


def bench(ns: Sequence[int], box: float, alpha: float, seed: int, setting: str = "periodic",
          kernel: str = "G", tolerance: float = 1e-8, neighbours: float = 30.0, p: int = 24,
          repeats: int = 1) -> list[BenchRow]:
    """Wall time per stage with r_c shrinking so the mean neighbour count stays fixed."""
    rows = []
    for n in ns:
        cloud = random_cloud(int(n), box, seed)
        mom = SystemMoments.from_cloud(cloud, box)
        r_c = math.sqrt(neighbours * box**2 / (math.pi * n))
        tr = tune(tolerance, r_c, KernelParams(alpha, 1.0, box), mom, setting, (kernel,))
        st = EwaldSettings(setting, r_c, tr.xi, tr.k_inf, grid_size_for(tr.k_inf, box), p, tolerance)
        best: Optional[dict] = None
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            res = ewald_sum(cloud, cloud.positions, alpha, box, st, kernel)
            res.timings["wall"] = time.perf_counter() - t0
            if best is None or res.timings["wall"] < best["wall"]:
                best = res.timings
        M = st.M if setting == "periodic" else res.plan.M_core
        rows.append(BenchRow(int(n), r_c, tr.xi, M, best))
    return rows


def fit_exponent(ns: Sequence[float], times: Sequence[float], nlogn: bool = False) -> Optional[float]:
    """Least-squares slope of log(time) against log(N) (or log(N log N))."""
    if len(ns) < 2:
        return None
    x = np.asarray(ns, dtype=float)
    if nlogn:
        x = x * np.log(x)
    slope, _ = np.polyfit(np.log(x), np.log(np.asarray(times, dtype=float)), 1)
    return float(slope)
