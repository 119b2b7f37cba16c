"""Spectral Ewald k-space engine.

Pipeline (periodic): spread point data to an M x M grid with a truncated
Gaussian window, FFT, scale by ``A(k) / w_hat(k)^2``, inverse FFT, gather back
to the targets with the trapezoidal rule.  With numpy's FFT conventions the
multiplier ``A(k)`` is the coefficient of ``exp(i k.(x - y))``.

Free space: the same pipeline on a zero-padded ``2M x 2M`` grid covering
``[-delta/2, L + delta/2]`` with a precomputed truncated (mollified) kernel.
"""
from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import fft as sfft

from .errors import DomainPadError, ParameterError
from .geometry import PointCloud
from .kernels import (
    FreeSpaceMollification,
    KernelParams,
    g_fourier_freespace,
    g_fourier_periodic,
)

__all__ = [
    "WindowConfig",
    "SpectralGrid",
    "FreeSpacePlan",
    "window_eval",
    "window_hat",
    "spread",
    "gather",
    "kspace_scale",
    "grid_size_for",
    "commensurate_size",
    "kspace_sum_periodic",
    "make_free_space_plan",
    "precompute_mollified",
    "kspace_sum_freespace",
    "kspace_sum_ongrid",
    "screening_pad",
]

_SPREAD_CHUNK = 4096


@dataclass(frozen=True)
class WindowConfig:
    """Truncated Gaussian exp(-eta x^2 / omega^2) on |x| <= omega = p h / 2."""

    p: int
    h: float
    eta: Optional[float] = None

    def __post_init__(self):
        if self.p <= 0 or self.p % 2:
            raise ParameterError(f"window support p must be a positive even integer, got {self.p}")
        if not self.h > 0:
            raise ParameterError("grid spacing must be positive")
        if self.eta is None:
            object.__setattr__(self, "eta", 0.95**2 * math.pi * self.p / 2.0)
        elif not self.eta > 0:
            raise ParameterError("window shape eta must be positive")

    @property
    def omega(self) -> float:
        return self.p * self.h / 2.0

    def with_spacing(self, h: float) -> "WindowConfig":
        return WindowConfig(self.p, h, self.eta)


@dataclass
class SpectralGrid:
    """Uniform grid data; ``values[..., i, j]`` sits at ``origin + (i, j) h``."""

    values: np.ndarray
    side: float
    origin: float = 0.0
    periodic: bool = True

    @property
    def M(self) -> int:
        return self.values.shape[-1]

    @property
    def h(self) -> float:
        return self.side / self.M

    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.h)


def window_eval(x, cfg: WindowConfig):
    x = np.asarray(x, dtype=float)
    om = cfg.omega
    w1 = np.where(np.abs(x) <= om, np.exp(-cfg.eta * x**2 / om**2), 0.0)
    out = w1[..., 0] * w1[..., 1]
    return out[()] if out.ndim == 0 else out


def window_hat(k, cfg: WindowConfig):
    """1-D transform of the untruncated Gaussian factor."""
    om = cfg.omega
    k = np.asarray(k, dtype=float)
    out = math.sqrt(math.pi * om**2 / cfg.eta) * np.exp(-(om**2) * k**2 / (4.0 * cfg.eta))
    return out[()] if out.ndim == 0 else out


def _window_hat_grid(k1d: np.ndarray, cfg: WindowConfig, power: int) -> np.ndarray:
    w = window_hat(k1d, cfg) ** power
    return w[:, None] * w[None, :]


def _support(u: np.ndarray, cfg: WindowConfig) -> tuple[np.ndarray, np.ndarray]:
    """Node indices (n, p) and 1-D window weights for local coordinates u (in h units)."""
    p = cfg.p
    j0 = np.floor(u).astype(np.int64) - p // 2 + 1
    idx = j0[:, None] + np.arange(p)[None, :]
    d = (u[:, None] - idx) * cfg.h
    om = cfg.omega
    w = np.where(np.abs(d) <= om, np.exp(-cfg.eta * d**2 / om**2), 0.0)
    return idx, w


def _local_indices(pos: np.ndarray, grid: SpectralGrid, cfg: WindowConfig, limit: Optional[int]):
    u = (pos - grid.origin) / cfg.h
    ix, wx = _support(u[:, 0], cfg)
    iy, wy = _support(u[:, 1], cfg)
    M = grid.M
    if grid.periodic:
        ix %= M
        iy %= M
    else:
        hi = M if limit is None else limit
        if ix.size and (ix.min() < 0 or iy.min() < 0 or ix.max() >= hi or iy.max() >= hi):
            raise DomainPadError("window support leaves the padded free-space domain")
    return ix, wx, iy, wy


def spread(positions, strengths, grid: SpectralGrid, cfg: WindowConfig,
           limit: Optional[int] = None) -> SpectralGrid:
    """Accumulate ``sum_n f_n w(x - y_n)`` onto ``grid`` (in place, also returned).

    ``strengths`` of shape (N,) fill a 2-d grid; shape (N, c) fill ``c``
    stacked grids.  ``limit`` bounds free-space support indices.
    """
    pos = positions.positions if isinstance(positions, PointCloud) else np.asarray(positions, float).reshape(-1, 2)
    f = np.asarray(strengths, dtype=float)
    comps = 1 if f.ndim == 1 else f.shape[1]
    f2 = f.reshape(len(pos), comps)
    M = grid.M
    flat = grid.values.reshape(comps, M * M)
    for lo in range(0, len(pos), _SPREAD_CHUNK):
        sl = slice(lo, lo + _SPREAD_CHUNK)
        ix, wx, iy, wy = _local_indices(pos[sl], grid, cfg, limit)
        lin = (ix[:, :, None] * M + iy[:, None, :]).ravel()
        w = (wx[:, :, None] * wy[:, None, :])
        for c in range(comps):
            flat[c] += np.bincount(lin, weights=(w * f2[sl, c, None, None]).ravel(), minlength=M * M)
    return grid


def gather(grid: SpectralGrid, targets, cfg: WindowConfig, limit: Optional[int] = None) -> np.ndarray:
    """Trapezoidal rule ``h^2 sum_j H(node_j) w(x_t - node_j)``."""
    pos = targets.positions if isinstance(targets, PointCloud) else np.asarray(targets, float).reshape(-1, 2)
    vals = grid.values
    out = np.empty(len(pos))
    h2 = cfg.h**2
    for lo in range(0, len(pos), _SPREAD_CHUNK):
        sl = slice(lo, lo + _SPREAD_CHUNK)
        ix, wx, iy, wy = _local_indices(pos[sl], grid, cfg, limit)
        block = vals[ix[:, :, None], iy[:, None, :]]
        out[sl] = h2 * np.einsum("npq,np,nq->n", block, wx, wy)
    return out


def kspace_scale(grid_hat: np.ndarray, multiplier: np.ndarray, window_hat_grid: np.ndarray,
                 window_power: int = 2) -> np.ndarray:
    """``sum_c A_c(k) H_c(k) / w_hat(k)^power``; components along the leading axis.

    ``window_hat_grid`` is the 2-d ``w_hat`` (first power); pass ones to skip
    deconvolution when it is folded into ``multiplier``.
    """
    if window_power not in (0, 1, 2):
        raise ParameterError("window_power must be 0, 1 or 2")
    grid_hat = np.asarray(grid_hat)
    multiplier = np.asarray(multiplier)
    if grid_hat.ndim == 3:
        prod = np.einsum("cij,cij->ij", multiplier, grid_hat)
    else:
        prod = multiplier * grid_hat
    if window_power:
        prod = prod / window_hat_grid**window_power
    return prod


# ----------------------------------------------------------------- sizing

def _even_fast(n: int) -> int:
    n = max(2, int(n))
    while True:
        n = sfft.next_fast_len(n)
        if n % 2 == 0:
            return n
        n += 1


def commensurate_size(minimum: int, n_targets: int) -> int:
    """Smallest even M >= minimum that divides or is a multiple of n_targets."""
    minimum = max(2, int(minimum))
    divisors = [d for d in range(minimum, n_targets + 1) if n_targets % d == 0 and d % 2 == 0]
    if divisors:
        return divisors[0]
    m = n_targets * math.ceil(minimum / n_targets)
    return m if m % 2 == 0 else m + n_targets


def grid_size_for(k_inf: float, side: float) -> int:
    """Even FFT-friendly M with Nyquist wavenumber pi M / side >= k_inf."""
    return _even_fast(2 * math.ceil(k_inf * side / (2.0 * math.pi)))


def _ksq_grid(M: int, h: float):
    k = 2.0 * np.pi * np.fft.fftfreq(M, d=h)
    return k, k[:, None], k[None, :]


def _multiplier(kernel: str, k1: np.ndarray, k2: np.ndarray, scalar: Callable[[np.ndarray], np.ndarray],
                alpha: float) -> np.ndarray:
    """Complex multiplier: scalar G^F for G; -i k_j / alpha G^F stacked for H."""
    kk = np.sqrt(k1**2 + k2**2)
    g = scalar(kk)
    if kernel == "G":
        return g.astype(complex)
    ones = np.ones_like(kk)
    return np.stack([-1j * k1 * ones * g / alpha, -1j * k2 * ones * g / alpha])


@contextmanager
def _stage(timings: Optional[dict], name: str):
    t0 = time.perf_counter()
    yield
    if timings is not None:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def _strengths(sources: PointCloud, kernel: str) -> np.ndarray:
    return sources.strengths(kernel)


# --------------------------------------------------------------- periodic

def kspace_sum_periodic(sources: PointCloud, targets, params: KernelParams, M: int,
                        cfg: Optional[WindowConfig] = None, kernel: str = "G",
                        timings: Optional[dict] = None, p: int = 24) -> np.ndarray:
    """Periodic k-space sum via the five-step spectral Ewald pipeline."""
    kernel = kernel.upper()
    L = params.box_length
    h = L / M
    cfg = WindowConfig(p, h) if cfg is None else cfg.with_spacing(h)
    if cfg.p > M:
        raise ParameterError(f"window support p={cfg.p} exceeds grid size M={M}")
    f = _strengths(sources, kernel)
    comps = 1 if kernel == "G" else 2
    grid = SpectralGrid(np.zeros((comps, M, M)), L, 0.0, True)
    with _stage(timings, "spread"):
        spread(sources, f, grid, cfg)
    with _stage(timings, "fft"):
        ghat = sfft.fft2(grid.values, axes=(-2, -1))
    with _stage(timings, "scale"):
        k, k1, k2 = _ksq_grid(M, h)
        mult = _multiplier(kernel, k1, k2, lambda kk: g_fourier_periodic(kk, params), params.alpha)
        what = _window_hat_grid(k, cfg, 1)
        scaled = kspace_scale(ghat if kernel == "H" else ghat[0], mult, what, 2)
    with _stage(timings, "ifft"):
        real = sfft.ifft2(scaled).real
    with _stage(timings, "gather"):
        out = gather(SpectralGrid(real, L, 0.0, True), targets, cfg)
    return out


# ------------------------------------------------------------- free space

def screening_pad(params: KernelParams, eps: float) -> float:
    """delta_1: diameter outside which gamma_alpha(x, xi) < eps."""
    arg = params.xi**2 / (math.pi * eps) * math.exp(-params.screening)
    if arg <= 1.0:
        return 0.0
    return 2.0 * math.sqrt(math.log(arg)) / params.xi


@dataclass
class FreeSpacePlan:
    """Extended domain and grid for the free-space k-space sum.

    The core box ``[0, L]`` holds ``M_core`` cells of width ``h``; ``n_pad``
    cells are added on each side, giving ``M = M_core + 2 n_pad`` nodes over
    ``L_tilde = M h`` and a ``2M`` zero-padded FFT grid.
    """

    L: float
    h: float
    M_core: int
    n_pad: int
    delta_eps: float
    s_f: float
    p: int
    eta: Optional[float] = None
    multiplier: str = "mollified"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def M(self) -> int:
        return self.M_core + 2 * self.n_pad

    @property
    def L_tilde(self) -> float:
        return self.M * self.h

    @property
    def R(self) -> float:
        return math.sqrt(2.0) * self.L_tilde

    @property
    def origin(self) -> float:
        return -self.n_pad * self.h

    @property
    def window(self) -> WindowConfig:
        return WindowConfig(self.p, self.h, self.eta)

    @property
    def mollification(self) -> FreeSpaceMollification:
        return FreeSpaceMollification.from_extended_side(self.L_tilde)


def _max_spacing_for_deconvolution(xi: float, p: int, eta: float, eps: float, power: int) -> float:
    """Largest h for which A(k)/w_hat(k)^power still decays by eps at the Nyquist mode."""
    c_w = power * p**2 / (16.0 * eta)
    c_n = math.log(1.0 / eps) / math.pi**2
    return 1.0 / (2.0 * xi * math.sqrt(c_w + c_n))


def make_free_space_plan(params: KernelParams, eps: float, k_inf: Optional[float] = None,
                         p: int = 24, s_f: float = 2.5, M_core: Optional[int] = None,
                         eta: Optional[float] = None, multiplier: str = "mollified") -> FreeSpacePlan:
    """Choose the padded free-space grid.

    ``M_core`` (cells across the box) defaults to the larger of the
    k_inf mapping and the spacing that keeps window deconvolution stable.
    The pad is ``max(delta_1, delta_2)`` rounded up to whole cells, with
    ``delta_2 = p h`` (the window's full support width).
    """
    if s_f < 1.0 + math.sqrt(2.0):
        raise ParameterError(f"upsampling factor s_f={s_f} is below 1 + sqrt(2)")
    if multiplier not in ("mollified", "plain"):
        raise ParameterError(f"unknown multiplier {multiplier!r}")
    L = params.box_length
    eta_v = WindowConfig(p, 1.0, eta).eta
    if M_core is None:
        if k_inf is None:
            raise ParameterError("either k_inf or M_core is required")
        need = 2 * math.ceil(k_inf * L / (2.0 * math.pi))
        h_max = _max_spacing_for_deconvolution(params.xi, p, eta_v, eps, 2)
        M_core = max(need, math.ceil(L / h_max), p)
    h = L / M_core
    delta_1 = screening_pad(params, eps)
    delta_2 = p * h
    delta = max(delta_1, delta_2)
    n_pad = max(p // 2, math.ceil(delta / (2.0 * h)))
    # make the 2M transform size FFT friendly by growing the pad
    while sfft.next_fast_len(2 * (M_core + 2 * n_pad)) != 2 * (M_core + 2 * n_pad):
        n_pad += 1
    return FreeSpacePlan(L=L, h=h, M_core=M_core, n_pad=n_pad, delta_eps=delta, s_f=s_f,
                         p=p, eta=eta, multiplier=multiplier)


def precompute_mollified(params: KernelParams, plan: FreeSpacePlan, kernel: str = "G",
                         window_power: int = 2, multiplier: Optional[str] = None) -> np.ndarray:
    """Truncated-kernel multiplier on the 2M grid, window deconvolution folded in.

    The multiplier ``A(k) / w_hat(k)^power`` is sampled on an ``s_f M`` grid,
    brought to real space, truncated to ``[-L_tilde, L_tilde)^2`` and
    transformed back on the ``2M`` grid.  Returns shape ``(2M, 2M)`` for G or
    ``(2, 2M, 2M)`` for H.
    """
    if plan.s_f < 1.0 + math.sqrt(2.0):
        raise ParameterError(f"upsampling factor s_f={plan.s_f} is below 1 + sqrt(2)")
    kernel = kernel.upper()
    multiplier = plan.multiplier if multiplier is None else multiplier
    key = (kernel, window_power, multiplier, params)
    if key in plan._cache:
        return plan._cache[key]
    M, h = plan.M, plan.h
    Mf = _even_fast(max(math.ceil(plan.s_f * M), 2 * M))
    cfg = plan.window
    k, k1, k2 = _ksq_grid(Mf, h)
    if multiplier == "mollified":
        moll = plan.mollification
        scalar = lambda kk: g_fourier_freespace(kk, params, moll)  # noqa: E731
    elif multiplier == "plain":
        scalar = lambda kk: g_fourier_periodic(kk, params)  # noqa: E731
    else:
        raise ParameterError(f"unknown multiplier {multiplier!r}")
    mult = _multiplier(kernel, k1, k2, scalar, params.alpha)
    if window_power:
        mult = mult / _window_hat_grid(k, cfg, window_power)
    real = sfft.ifft2(mult, axes=(-2, -1)).real / h**2
    keep = np.r_[0:M, Mf - M:Mf]
    trunc = real[..., keep[:, None], keep[None, :]]
    out = h**2 * sfft.fft2(trunc, axes=(-2, -1))
    plan._cache[key] = out
    return out


def _free_prepare(sources: PointCloud, plan: FreeSpacePlan, kernel: str, timings):
    M2 = 2 * plan.M
    f = _strengths(sources, kernel)
    comps = 1 if kernel == "G" else 2
    L = plan.L
    pos = sources.positions
    if len(pos) and (pos.min() < 0 or pos.max() > L):
        raise DomainPadError("free-space sources must lie in [0, L]^2")
    grid = SpectralGrid(np.zeros((comps, M2, M2)), M2 * plan.h, plan.origin, False)
    with _stage(timings, "spread"):
        spread(sources, f, grid, plan.window, limit=plan.M)
    with _stage(timings, "fft"):
        ghat = sfft.fft2(grid.values, axes=(-2, -1))
    return grid, ghat


def kspace_sum_freespace(sources: PointCloud, targets, params: KernelParams, plan: FreeSpacePlan,
                         kernel: str = "G", timings: Optional[dict] = None) -> np.ndarray:
    """Free-space k-space contribution at arbitrary targets in [0, L]^2."""
    kernel = kernel.upper()
    tpos = targets.positions if isinstance(targets, PointCloud) else np.asarray(targets, float).reshape(-1, 2)
    if len(tpos) and (tpos.min() < 0 or tpos.max() > plan.L):
        raise DomainPadError("free-space targets must lie in [0, L]^2")
    with _stage(timings, "precompute"):
        mult = precompute_mollified(params, plan, kernel, window_power=2)
    grid, ghat = _free_prepare(sources, plan, kernel, timings)
    with _stage(timings, "scale"):
        scaled = kspace_scale(ghat if kernel == "H" else ghat[0], mult, None, 0)
    with _stage(timings, "ifft"):
        real = sfft.ifft2(scaled).real
    with _stage(timings, "gather"):
        out = gather(SpectralGrid(real, grid.side, grid.origin, False), tpos, plan.window, limit=plan.M)
    return out


# ---------------------------------------------------------------- on grid

def _upsample_spectrum(B: np.ndarray, m: int) -> np.ndarray:
    """Zero-pad an M x M spectrum to mM x mM, splitting the Nyquist lines."""
    M = B.shape[-1]
    half = M // 2
    big = m * M
    freq = np.fft.fftfreq(M, 1.0 / M).astype(np.int64)
    # the -M/2 line is copied to +M/2 with half weight on each so the result stays real
    src = np.r_[np.arange(M), half]
    dst = np.r_[np.where(freq >= 0, freq, freq + big), half]
    wt = np.ones(M + 1)
    wt[half] = wt[-1] = 0.5
    out = np.zeros((big, big), dtype=complex)
    np.add.at(out, (dst[:, None], dst[None, :]), B[np.ix_(src, src)] * wt[:, None] * wt[None, :])
    return out


def _grid_values(B: np.ndarray, up: int) -> np.ndarray:
    """Values of the trig polynomial with spectrum B on a lattice refined by ``up``."""
    if up > 1:
        B = _upsample_spectrum(B, up) * up**2
    return sfft.ifft2(B).real


def kspace_sum_ongrid(sources: PointCloud, n_targets: int, params: KernelParams,
                      setting: str = "periodic", M: Optional[int] = None,
                      plan: Optional[FreeSpacePlan] = None, p: int = 24,
                      kernel: str = "G", timings: Optional[dict] = None) -> np.ndarray:
    """k-space sum at the ``n_targets x n_targets`` lattice ``(i, j) L / n_targets``.

    Uses one power of the window and evaluates the result with an inverse FFT,
    skipping the gather step.  The spreading spacing ``h`` and the target
    spacing must be integer multiples of each other.  Returns an array of
    shape ``(n_targets, n_targets)`` indexed ``[i, j]``.
    """
    kernel = kernel.upper()
    L = params.box_length
    core = M if setting == "periodic" else (plan.M_core if plan is not None else None)
    if core is None:
        raise ParameterError("periodic on-grid needs M; free space needs a plan")
    if core % n_targets == 0:
        step, up = core // n_targets, 1
    elif n_targets % core == 0:
        step, up = 1, n_targets // core
    else:
        raise ParameterError(f"target lattice {n_targets} is not commensurate with grid {core}")
    f = _strengths(sources, kernel)
    if setting == "periodic":
        h = L / M
        cfg = WindowConfig(p, h)
        comps = 1 if kernel == "G" else 2
        grid = SpectralGrid(np.zeros((comps, M, M)), L, 0.0, True)
        with _stage(timings, "spread"):
            spread(sources, f, grid, cfg)
        with _stage(timings, "fft"):
            ghat = sfft.fft2(grid.values, axes=(-2, -1))
        with _stage(timings, "scale"):
            k, k1, k2 = _ksq_grid(M, h)
            mult = _multiplier(kernel, k1, k2, lambda kk: g_fourier_periodic(kk, params), params.alpha)
            scaled = kspace_scale(ghat if kernel == "H" else ghat[0], mult, _window_hat_grid(k, cfg, 1), 1)
        with _stage(timings, "ifft"):
            vals = _grid_values(scaled, up)
        return vals[::step, ::step] if up == 1 else vals
    if setting != "free":
        raise ParameterError(f"unknown setting {setting!r}")
    with _stage(timings, "precompute"):
        mult = precompute_mollified(params, plan, kernel, window_power=1)
    grid, ghat = _free_prepare(sources, plan, kernel, timings)
    with _stage(timings, "scale"):
        scaled = kspace_scale(ghat if kernel == "H" else ghat[0], mult, None, 0)
    with _stage(timings, "ifft"):
        vals = _grid_values(scaled, up)
    start = plan.n_pad * up
    stop = start + plan.M_core * up
    return vals[start:stop:step, start:stop:step]
