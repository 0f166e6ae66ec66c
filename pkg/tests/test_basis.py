import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conjmap.basis import (ShapeSet, gauss_rule, integrated_legendre, legendre, mode_signs,
                           phi_table, shape_eval, shape_functions)


def test_low_order_legendre():
    assert legendre(0, 0.7)[0] == 1.0
    assert legendre(1, 0.7)[0] == pytest.approx(0.7)
    assert legendre(2, 0.5)[0] == pytest.approx(-0.125, abs=1e-15)


def test_legendre_parity():
    x = 0.3
    assert legendre(3, -x)[0] == pytest.approx(-legendre(3, x)[0], abs=1e-15)


def test_legendre_against_numpy():
    x = np.linspace(-1, 1, 41)
    for n in range(0, 15):
        c = np.zeros(n + 1)
        c[n] = 1
        P, dP = legendre(n, x)
        np.testing.assert_allclose(P, np.polynomial.legendre.legval(x, c), atol=1e-13)
        dref = np.polynomial.legendre.legval(x, np.polynomial.legendre.legder(c))
        np.testing.assert_allclose(dP, dref, atol=1e-11 * max(1, n * n))


def test_legendre_derivative_at_endpoints():
    for n in range(1, 12):
        assert legendre(n, 1.0)[1] == pytest.approx(n * (n + 1) / 2)
        assert legendre(n, -1.0)[1] == pytest.approx((-1) ** (n + 1) * n * (n + 1) / 2)


def test_negative_degree_rejected():
    with pytest.raises(ValueError):
        legendre(-1, 0.0)
    with pytest.raises(ValueError):
        integrated_legendre(1, 0.0)


def test_integrated_legendre_vanishes_at_ends():
    for n in range(2, 13):
        v, _ = integrated_legendre(n, np.array([-1.0, 1.0]))
        np.testing.assert_allclose(v, 0.0, atol=1e-15)


def test_phi2_at_zero():
    v, _ = integrated_legendre(2, 0.0)
    assert v == pytest.approx(-math.sqrt(1.5) / 2, abs=1e-14)
    assert v == pytest.approx(-0.612372, abs=1e-6)


def test_derivative_orthonormality():
    x, w = np.polynomial.legendre.leggauss(12)
    _, d = phi_table(8, x)
    G = (d * w) @ d.T
    np.testing.assert_allclose(G, np.eye(7), atol=1e-13)


def test_nodal_modes_lagrange_property():
    s = ShapeSet(4)
    corners = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    for k, (x, y) in enumerate(corners):
        for j in range(4):
            assert shape_eval(s, j, x, y)[0] == pytest.approx(1.0 if j == k else 0.0, abs=1e-15)


def test_side_modes_vanish_at_their_corners():
    p = 6
    s = ShapeSet(p)
    ends = {0: [(-1, -1), (1, -1)], 1: [(1, -1), (1, 1)], 2: [(-1, 1), (1, 1)], 3: [(-1, -1), (-1, 1)]}
    for side, pts in ends.items():
        for mode in range(*s.side_slice(side).indices(s.nmodes)):
            for x, y in pts:
                assert abs(shape_eval(s, mode, x, y)[0]) < 1e-15


def test_internal_mode_center_value():
    s = ShapeSet(3)
    mode = s.internal_slice.start  # (i, j) = (2, 2)
    assert shape_eval(s, mode, 0.0, 0.0)[0] == pytest.approx(0.375, abs=1e-14)


def test_mode_count_and_slices():
    for p in range(1, 9):
        s = ShapeSet(p)
        assert s.nmodes == (p + 1) ** 2 == s.mode_count()
    with pytest.raises(ValueError):
        ShapeSet(0)
    with pytest.raises(IndexError):
        shape_eval(ShapeSet(2), 9, 0, 0)


def test_mode_signs_flip_odd_modes_only():
    s = mode_signs(5, [1, -1, 1, 1])
    side1 = s[4 + 4:4 + 8]  # modes i = 2..5 of side 1
    np.testing.assert_array_equal(side1, [1, -1, 1, -1])
    assert np.all(np.delete(s, np.arange(8, 12)) == 1)


def test_gauss_rule_integrates_polynomials():
    X, Y, W = gauss_rule(5)
    assert W.sum() == pytest.approx(4.0)
    assert np.sum(W * X ** 8 * Y ** 2) == pytest.approx((2 / 9) * (2 / 3))


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_partition_of_unity(xi, eta):
    V, G = shape_functions(5, xi, eta)
    assert V[0, :4].sum() == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(G[0, :4].sum(axis=0), 0.0, atol=1e-14)


@given(st.integers(1, 8), st.floats(-0.999, 0.999), st.floats(-0.999, 0.999))
def test_gradients_match_finite_differences(p, xi, eta):
    h = 1e-6
    _, G = shape_functions(p, xi, eta)
    Vxp, _ = shape_functions(p, xi + h, eta)
    Vxm, _ = shape_functions(p, xi - h, eta)
    Vyp, _ = shape_functions(p, xi, eta + h)
    Vym, _ = shape_functions(p, xi, eta - h)
    fd = np.stack([(Vxp - Vxm)[0] / (2 * h), (Vyp - Vym)[0] / (2 * h)], axis=-1)
    scale = max(1.0, float(np.abs(G).max()))
    assert np.abs(fd - G[0]).max() <= 1e-6 * scale
