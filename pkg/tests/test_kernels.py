import math

import numpy as np
import pytest
from scipy import integrate, special

from yukawa_ewald.errors import ParameterError, SingularityError
from yukawa_ewald.kernels import (
    FreeSpaceMollification,
    KernelParams,
    g_direct,
    g_fourier_freespace,
    g_fourier_periodic,
    g_real,
    g_self,
    h_direct,
    h_fourier_freespace,
    h_fourier_periodic,
    h_real,
    h_self,
)

# lim_{r -> 0} G^R(r) - K0(r) at alpha=1, xi=2; Richardson of r = 1e-6, 1e-7 evaluations
SELF_G_ALPHA1_XI2 = -1.1284549504181747


def test_params_validation():
    with pytest.raises(ParameterError):
        KernelParams(0.0, 1.0)
    with pytest.raises(ParameterError):
        KernelParams(1.0, -1.0)
    assert KernelParams(2.0, 4.0).screening == pytest.approx(4.0 / 64.0)


def test_mollification_requires_sqrt2_ratio():
    with pytest.raises(ParameterError):
        FreeSpaceMollification(R=3.0, L_tilde=3.0)
    m = FreeSpaceMollification.from_extended_side(5.0)
    assert m.R == pytest.approx(math.sqrt(2) * 5.0)


def test_direct_kernels():
    p = KernelParams(1.5, 2.0)
    assert g_direct(0.7, p) == pytest.approx(special.k0(1.05), rel=1e-15)
    h = h_direct(np.array([0.3, -0.4]), p)
    assert np.allclose(h, special.k1(1.5 * 0.5) * np.array([0.3, -0.4]) / 0.5, rtol=1e-15)


def test_zero_radius_singular():
    p = KernelParams(1.0, 2.0)
    with pytest.raises(SingularityError):
        g_direct(0.0, p)
    with pytest.raises(SingularityError):
        h_real(np.zeros(2), p)


def test_h_is_scaled_gradient_of_g():
    p = KernelParams(1.3, 2.0)
    x = np.array([0.4, 0.9])
    eps = 1e-6
    grad = np.array([
        (g_direct(np.linalg.norm(x + d), p) - g_direct(np.linalg.norm(x - d), p)) / (2 * eps)
        for d in (np.array([eps, 0]), np.array([0, eps]))
    ])
    assert np.allclose(h_direct(x, p), -grad / p.alpha, rtol=1e-8)


def test_real_part_decays_and_matches_at_small_xi():
    p = KernelParams(1.0, 2.0)
    assert abs(g_real(4.0, p)) < 1e-25
    # xi -> 0 leaves the whole kernel in real space
    small = KernelParams(1.0, 1e-3)
    assert g_real(0.8, small) == pytest.approx(g_direct(0.8, small), rel=1e-10)


def test_real_plus_fourier_is_kernel():
    # G^R(r) + (2 pi)^-2 int G^F(k) e^{ik.r} dk = K0(alpha r)
    p = KernelParams(1.0, 1.5)
    r = 0.9
    four = integrate.quad(lambda k: g_fourier_periodic(k, p) * special.j0(k * r) * k, 0, 60, limit=200)[0]
    assert g_real(r, p) + four / (2 * math.pi) == pytest.approx(g_direct(r, p), abs=1e-12)


def test_self_term_matches_limit():
    p = KernelParams(1.0, 2.0)
    assert g_self(p) == pytest.approx(SELF_G_ALPHA1_XI2, abs=1e-11)
    assert g_self(p) == pytest.approx(-0.5 * special.exp1(1 / 16), rel=1e-14)
    assert np.all(h_self(p) == 0)


def test_periodic_h_multiplier():
    p = KernelParams(2.0, 3.0)
    k = np.array([1.0, -2.0])
    out = h_fourier_periodic(k, p)
    assert np.allclose(out, -g_fourier_periodic(np.hypot(*k), p) / p.alpha * k)


def test_mollified_bracket_is_truncated_transform():
    # 2 pi int_0^R K0(alpha r) J0(k r) r dr against the closed form, screening removed
    alpha, R, k = 0.8, 9.0, 0.65
    p = KernelParams(alpha, 1e6)
    m = FreeSpaceMollification(R=R, L_tilde=R / math.sqrt(2))
    quad = 2 * math.pi * integrate.quad(lambda r: special.k0(alpha * r) * special.j0(k * r) * r,
                                        0, R, limit=400, points=[1e-6])[0]
    assert g_fourier_freespace(k, p, m) == pytest.approx(quad, rel=1e-9)


def test_mollified_zero_mode_and_small_k_continuity():
    p = KernelParams(0.5, 2.0)
    m = FreeSpaceMollification.from_extended_side(8.0)
    aR = 0.5 * m.R
    closed = 2 * math.pi / 0.25 * (1 - aR * special.k1(aR)) * math.exp(-0.25 / 16)
    assert g_fourier_freespace(0.0, p, m) == pytest.approx(closed, rel=1e-13)
    ks = np.array([1e-7, 2e-5, 1e-4 / m.R * 0.999, 1e-4 / m.R * 1.001])
    vals = g_fourier_freespace(ks, p, m)
    assert np.allclose(vals, closed, rtol=1e-8)


def test_mollified_approaches_periodic_for_large_alpha_r():
    p = KernelParams(10.0, 8.0)
    m = FreeSpaceMollification(R=10.0, L_tilde=10.0 / math.sqrt(2))
    k = np.linspace(0, 50, 11)
    rel = np.abs(g_fourier_freespace(k, p, m) / g_fourier_periodic(k, p) - 1)
    assert np.all(rel <= 1e3 * math.exp(-100))


def test_freespace_h_multiplier_direction():
    p = KernelParams(1.0, 2.0)
    m = FreeSpaceMollification.from_extended_side(10.0)
    k = np.array([[0.3, 0.4]])
    out = h_fourier_freespace(k, p, m)
    assert np.allclose(out, -g_fourier_freespace(0.5, p, m) * k)
