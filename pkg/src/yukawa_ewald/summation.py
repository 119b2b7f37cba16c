"""Full Ewald evaluation: real-space part + k-space part + self term."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ParameterError
from .estimate import SystemMoments, tune, tune_kinf, tune_rc
from .fourier import (
    FreeSpacePlan,
    commensurate_size,
    grid_size_for,
    kspace_sum_freespace,
    kspace_sum_ongrid,
    kspace_sum_periodic,
    make_free_space_plan,
)
from .geometry import PointCloud
from .kernels import KernelParams
from .realspace import RealSpaceConfig, real_sum

__all__ = ["EwaldSettings", "EwaldResult", "resolve_settings", "ewald_sum", "ewald_sum_ongrid"]


@dataclass(frozen=True)
class EwaldSettings:
    """Resolved truncation parameters for one evaluation."""

    setting: str
    r_c: float
    xi: float
    k_inf: float
    M: int
    p: int = 24
    tolerance: float = 1e-12
    s_f: float = 2.5

    def __post_init__(self):
        if self.setting not in ("periodic", "free"):
            raise ParameterError(f"setting must be 'periodic' or 'free', got {self.setting!r}")
        if not (self.r_c > 0 and self.xi > 0 and self.M > 0):
            raise ParameterError("r_c, xi and M must be positive")


@dataclass
class EwaldResult:
    values: np.ndarray
    settings: EwaldSettings
    timings: dict = field(default_factory=dict)
    plan: Optional[FreeSpacePlan] = None


def resolve_settings(sources: PointCloud, alpha: float, box: float, setting: str,
                     tolerance: float = 1e-12, kernels=("G", "H"), r_c: Optional[float] = None,
                     xi: Optional[float] = None, M: Optional[int] = None, p: int = 24,
                     neighbours: float = 30.0) -> EwaldSettings:
    """Fill in missing parameters from the estimates; explicit values win.

    Without ``r_c`` or ``xi`` the cut-off is chosen so that on average about
    ``neighbours`` sources fall inside it.
    """
    moments = SystemMoments.from_cloud(sources, box)
    probe = KernelParams(alpha, 1.0, box)
    if r_c is None and xi is None:
        density = max(len(sources), 1) / box**2
        r_c = float(np.sqrt(neighbours / (np.pi * density)))
        r_c = min(r_c, 0.5 * box) if setting == "periodic" else r_c
    if xi is None:
        xi = tune(tolerance, r_c, probe, moments, setting, kernels).xi
    params = KernelParams(alpha, xi, box)
    if r_c is None:
        r_c = tune_rc(tolerance, xi, params, moments, kernels)
    k_inf = tune_kinf(tolerance, xi, params, moments, setting, kernels)
    if M is None:
        M = grid_size_for(k_inf, box)
    else:
        k_inf = np.pi * M / box
    return EwaldSettings(setting, float(r_c), float(xi), float(k_inf), int(M), p, tolerance)


def _plan(params: KernelParams, st: EwaldSettings, M_explicit: bool) -> FreeSpacePlan:
    if M_explicit:
        return make_free_space_plan(params, st.tolerance, M_core=st.M, p=st.p, s_f=st.s_f)
    return make_free_space_plan(params, st.tolerance, k_inf=st.k_inf, p=st.p, s_f=st.s_f)


def ewald_sum(sources: PointCloud, targets, alpha: float, box: float, st: EwaldSettings,
              kernel: str = "G", M_explicit: bool = False,
              plan: Optional[FreeSpacePlan] = None) -> EwaldResult:
    """u(x_t) = sum_n K(x_t - y_n) f_n via the Ewald split."""
    kernel = kernel.upper()
    params = KernelParams(alpha, st.xi, box)
    periodic = st.setting == "periodic"
    timings: dict = {}
    t0 = time.perf_counter()
    cfg = RealSpaceConfig(st.r_c, periodic=periodic, domain=None if periodic else (0.0, box))
    real = real_sum(sources, targets, params, cfg, kernel)
    timings["real"] = time.perf_counter() - t0
    if periodic:
        kv = kspace_sum_periodic(sources, targets, params, st.M, kernel=kernel, timings=timings, p=st.p)
    else:
        plan = plan or _plan(params, st, M_explicit)
        kv = kspace_sum_freespace(sources, targets, params, plan, kernel=kernel, timings=timings)
    timings["total"] = time.perf_counter() - t0
    return EwaldResult(real + kv, st, timings, plan)


def ewald_sum_ongrid(sources: PointCloud, n_targets: int, alpha: float, box: float,
                     st: EwaldSettings, kernel: str = "G", M_explicit: bool = False,
                     plan: Optional[FreeSpacePlan] = None) -> EwaldResult:
    """Ewald sum on the ``n x n`` lattice ``(i, j) box / n``; values shaped (n*n,), row-major in (i, j).

    When the grid size is not given explicitly it is rounded up until the grid
    and the target lattice are commensurate.
    """
    kernel = kernel.upper()
    if st.setting == "periodic" and not M_explicit:
        st = replace(st, M=commensurate_size(st.M, n_targets))
    if st.setting == "free" and plan is None and not M_explicit:
        auto = _plan(KernelParams(alpha, st.xi, box), st, False)
        st = replace(st, M=commensurate_size(auto.M_core, n_targets))
        M_explicit = True
    params = KernelParams(alpha, st.xi, box)
    periodic = st.setting == "periodic"
    xs = np.arange(n_targets) * box / n_targets
    targets = np.stack(np.meshgrid(xs, xs, indexing="ij"), -1).reshape(-1, 2)
    timings: dict = {}
    t0 = time.perf_counter()
    cfg = RealSpaceConfig(st.r_c, periodic=periodic, domain=None if periodic else (0.0, box))
    real = real_sum(sources, targets, params, cfg, kernel)
    timings["real"] = time.perf_counter() - t0
    if periodic:
        kv = kspace_sum_ongrid(sources, n_targets, params, "periodic", M=st.M, p=st.p,
                               kernel=kernel, timings=timings)
    else:
        plan = plan or _plan(params, st, M_explicit)
        kv = kspace_sum_ongrid(sources, n_targets, params, "free", plan=plan, kernel=kernel, timings=timings)
    timings["total"] = time.perf_counter() - t0
    return EwaldResult(real + kv.ravel(), st, timings, plan)
