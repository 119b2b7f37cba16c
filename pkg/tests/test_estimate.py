import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from yukawa_ewald.errors import TuningError
from yukawa_ewald.estimate import (
    SystemMoments,
    est_k_g,
    est_k_g_freespace,
    est_k_h,
    est_k_h_freespace,
    est_real_g,
    est_real_h,
    regime_flags,
    tune,
    tune_kinf,
    tune_rc,
)
from yukawa_ewald.kernels import FreeSpaceMollification, KernelParams
from yukawa_ewald.studies import random_cloud
from yukawa_ewald.summation import ewald_sum, resolve_settings
from yukawa_ewald.realspace import direct_sum

L = 2 * math.pi
MOM = SystemMoments(50.0, 80.0, 500, L)
MOLL = FreeSpaceMollification.from_extended_side(1.5 * L)


@settings(max_examples=40, deadline=None)
@given(xi=st.floats(1.0, 20.0), alpha=st.floats(0.1, 10.0), a=st.floats(0.3, 3.0), b=st.floats(0.3, 3.0))
def test_estimates_decrease(xi, alpha, a, b):
    p = KernelParams(alpha, xi, L)
    lo, hi = sorted((a, b))
    if lo == hi:
        return
    r_lo, r_hi = lo / xi * 1.5, hi / xi * 1.5
    assert est_real_g(r_hi, xi, p, MOM) <= est_real_g(r_lo, xi, p, MOM)
    assert est_real_h(r_hi, xi, p, MOM) <= est_real_h(r_lo, xi, p, MOM)
    k_lo, k_hi = 2 * xi * lo, 2 * xi * hi
    assert est_k_g(k_hi, xi, p, MOM) <= est_k_g(k_lo, xi, p, MOM)
    assert est_k_h(k_hi, xi, p, MOM) <= est_k_h(k_lo, xi, p, MOM)


def test_estimates_scale_with_strength():
    p = KernelParams(1.0, 4.0, L)
    big = SystemMoments(4 * MOM.Q_G, 4 * MOM.Q_H, 500, L)
    assert est_real_g(1.0, 4.0, p, big) == pytest.approx(2 * est_real_g(1.0, 4.0, p, MOM))
    assert est_k_h(30.0, 4.0, p, big) == pytest.approx(2 * est_k_h(30.0, 4.0, p, MOM))


def test_freespace_estimates_positive_and_finite():
    p = KernelParams(1.0, 4.0, L)
    for k in (10.0, 20.0, 40.0):
        assert 0 < est_k_g_freespace(k, 4.0, p, MOLL, MOM) < math.inf
        assert 0 < est_k_h_freespace(k, 4.0, p, MOLL, MOM) < math.inf


@pytest.mark.parametrize("setting", ["periodic", "free"])
def test_tune_meets_tolerance_minimally(setting):
    p = KernelParams(1.0, 1.0, L)
    res = tune(1e-10, 0.6, p, MOM, setting)
    real_at = lambda xi: max(est_real_g(0.6, xi, p, MOM), est_real_h(0.6, xi, p, MOM))
    assert real_at(res.xi) <= 1e-10
    assert real_at(res.xi * (1 - 1e-6)) > 1e-10
    assert res.estimates["kspace"] <= 1e-10
    assert res.M % 2 == 0 and math.pi * res.M / L >= res.k_inf * (1 - 1e-12)


def test_tighter_tolerance_raises_xi_and_kinf():
    p = KernelParams(1.0, 1.0, L)
    loose = tune(1e-6, 0.6, p, MOM)
    tight = tune(1e-10, 0.6, p, MOM)
    assert tight.xi > loose.xi and tight.k_inf > loose.k_inf


def test_tune_is_deterministic():
    p = KernelParams(1.0, 1.0, L)
    assert tune(1e-8, 0.6, p, MOM) == tune(1e-8, 0.6, p, MOM)


@pytest.mark.parametrize("tol", [0.0, 1e-16, 0.5])
def test_bad_tolerance(tol):
    with pytest.raises(TuningError):
        tune(tol, 0.6, KernelParams(1.0, 1.0, L), MOM)


def test_tune_rc_and_kinf_roundtrip():
    p = KernelParams(1.0, 5.0, L)
    rc = tune_rc(1e-12, 5.0, p, MOM)
    assert est_real_g(rc, 5.0, p, MOM) <= 1e-12
    k = tune_kinf(1e-12, 5.0, p, MOM)
    assert est_k_g(k, 5.0, p, MOM) <= 1e-12


def test_regime_flags():
    assert regime_flags(1.0, 5.0, 20.0) == []
    assert len(regime_flags(0.1, 5.0, 5.0)) == 2


def test_end_to_end_tolerance():
    cloud = random_cloud(300, L, 11)
    ref = direct_sum(cloud, cloud.positions, KernelParams(1.0, 1.0, L), "G", mode="periodic")
    st_ = resolve_settings(cloud, 1.0, L, "periodic", 1e-12, ("G",))
    got = ewald_sum(cloud, cloud.positions, 1.0, L, st_, "G").values
    assert np.max(np.abs(got - ref)) <= 1e-10
