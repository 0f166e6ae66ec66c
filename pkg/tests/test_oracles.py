import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, strategies as st

from conjmap.oracles import (EllipticParams, agm, annulus_capacity, annulus_potential,
                             disk_corner_angles, ellip_k, ellipj, rect_to_disk, sn_complex)


def k_series(k, terms=400):
    # K(k) = pi/2 sum ((2n)! / (2^2n n!^2))^2 k^2n
    c, s = 1.0, 1.0
    for n in range(1, terms):
        c *= (2 * n - 1) / (2 * n)
        s += c * c * k ** (2 * n)
    return math.pi / 2 * s


def test_agm_known_value():
    # Gauss's constant: 1 / agm(1, sqrt 2)
    assert 1 / agm(1.0, math.sqrt(2.0)) == pytest.approx(0.8346268416740731, abs=1e-15)
    with pytest.raises(ValueError):
        agm(0.0, 1.0)


def test_lemniscatic_k():
    want = math.gamma(0.25) ** 2 / (4 * math.sqrt(math.pi))
    assert ellip_k(1 / math.sqrt(2)) == pytest.approx(want, abs=1e-14)


@pytest.mark.parametrize("k", [0.0, 0.1, 0.5, 0.8, 0.9])
def test_k_matches_series(k):
    assert ellip_k(k) == pytest.approx(k_series(k), abs=1e-12)


def test_sn_at_quarter_period():
    k = 0.6
    s, c, d = ellipj(ellip_k(k), k)
    assert s == pytest.approx(1.0, abs=1e-15)
    assert c == pytest.approx(0.0, abs=1e-8)
    assert d == pytest.approx(0.8, abs=1e-15)


def test_ellipj_against_scipy():
    u = np.linspace(-4, 4, 33)
    for k in (0.2, 0.7, 0.99):
        s, c, d, _ = sp.ellipj(u, k * k)
        np.testing.assert_allclose(ellipj(u, k), (s, c, d), atol=1e-13)


@given(st.floats(-10, 10), st.floats(0.0, 0.999))
def test_jacobi_identities(u, k):
    s, c, d = ellipj(u, k)
    assert s * s + c * c == pytest.approx(1.0, abs=1e-10)
    assert d * d + k * k * s * s == pytest.approx(1.0, abs=1e-10)


def test_sn_complex_on_the_axes():
    k = 0.4
    kp = math.sqrt(1 - k * k)
    # sn(iy, k) = i sc(y, k')
    y = 0.7
    s, c, _ = ellipj(y, kp)
    assert complex(sn_complex(1j * y, k)) == pytest.approx(1j * s / c, abs=1e-14)
    assert complex(sn_complex(0.3, k)) == pytest.approx(float(ellipj(0.3, k)[0]), abs=1e-15)


@given(st.floats(0.05, 8.0))
def test_bisection_residual(h):
    p = EllipticParams.for_height(h)
    assert abs(p.Kp / (2 * p.K) - h) <= 1e-12 * max(1.0, h)
    assert 0 < p.k < 1


def test_bad_height():
    with pytest.raises(ValueError):
        EllipticParams.for_height(0.0)


def test_square_is_symmetric():
    p = EllipticParams.for_height(1.0)
    assert p.k == pytest.approx((math.sqrt(2) - 1) ** 2, abs=1e-14)
    assert complex(rect_to_disk(p, 0.5 + 0.5j)) == pytest.approx(0, abs=1e-14)
    th = disk_corner_angles(p)
    np.testing.assert_allclose(th, [0, math.pi / 2, math.pi, 1.5 * math.pi], atol=1e-12)


def test_corner_normalization():
    p = EllipticParams.for_height(2.0)
    w = rect_to_disk(p, np.array([0, 1, 1 + 2j]))
    np.testing.assert_allclose(w, [-1, -1j, 1], atol=1e-12)


@pytest.mark.parametrize("h", [0.05, 0.7, 3.0])
def test_rectangle_boundary_goes_to_circle(h):
    p = EllipticParams.for_height(h)
    s = np.linspace(0, 1, 21)
    edges = np.concatenate([s, 1 + 1j * h * s, s + 1j * h, 1j * h * s])
    np.testing.assert_allclose(np.abs(rect_to_disk(p, edges)), 1.0, atol=1e-12)


def test_rect_to_disk_is_conformal():
    # Cauchy-Riemann: the derivative does not depend on direction
    p = EllipticParams.for_height(1.3)
    z, d = 0.4 + 0.6j, 1e-6
    fx = (rect_to_disk(p, z + d) - rect_to_disk(p, z - d)) / (2 * d)
    fy = (rect_to_disk(p, z + 1j * d) - rect_to_disk(p, z - 1j * d)) / (2j * d)
    assert abs(fx - fy) <= 1e-8 * abs(fx)


def test_rect_to_disk_rejects_outside_points():
    p = EllipticParams.for_height(1.0)
    for z in (-0.1, 1.1, 0.5 + 1.2j, 0.5 - 0.01j):
        with pytest.raises(ValueError):
            rect_to_disk(p, z)


def test_annulus_potential_examples():
    radii = (math.exp(-1), 1.0)
    assert annulus_potential(radii, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert annulus_potential(radii, math.exp(-1) * 1j) == pytest.approx(1.0, abs=1e-15)
    assert annulus_potential(radii, math.exp(-0.5)) == pytest.approx(0.5, abs=1e-15)
    assert annulus_capacity(radii) == pytest.approx(2 * math.pi)
    with pytest.raises(ValueError):
        annulus_potential(radii, 0.1)
    with pytest.raises(ValueError):
        annulus_potential((1.0, 0.5), 0.7)
