import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conjmap.conjugate import (ConformalMap, attach_cut, build_map,
                               build_ring_map, load_map, rec_error, save_map, solve_ring,
                               steepest_descent_cut)
from conjmap.gallery import gallery
from conjmap.geometry import GeometryError
from conjmap.oracles import annulus_capacity, rectangle_grid
from conjmap.tracer import OutsideError, eval_field
from conftest import cached_map
from test_geometry import unit_square

E1 = math.exp(-1.0)


def test_rectangle_maps_to_itself(square_map):
    z = rectangle_grid(1.0, 11)
    err = np.abs(square_map.evaluate_many(z) - z).max()
    assert err <= 1e-10
    assert square_map.h == pytest.approx(1.0, abs=1e-12)


def test_rec_zero_for_linear_square():
    cmap = build_map(unit_square(), p=1, levels=0)
    assert rec_error(cmap) <= 4 * np.finfo(float).eps


def test_unit_disk_modulus_one():
    cmap = cached_map("unit-disk", 12)
    assert cmap.h == pytest.approx(1.0, abs=1e-10)
    assert cmap.rec <= 1e-8


def test_asteroid_cusp_modulus():
    cmap = cached_map("asteroid-cusp", 10)
    assert cmap.h == pytest.approx(0.68435408764536, abs=1e-6)


def test_circular_quadrilateral_rec():
    assert cached_map("circular-quadrilateral", 10).rec <= 1e-8


@pytest.mark.parametrize("name, p", [("unit-disk", 8), ("asteroid-cusp", 10), ("flower", 12)])
def test_corner_correspondence(name, p):
    cmap = cached_map(name, p)
    want = [1 + 1j * cmap.h, 1j * cmap.h, 0, 1]
    got = [cmap.evaluate(z) for z in gallery(name).corner_points]
    np.testing.assert_allclose(got, want, atol=1e-6)


def test_univalence_on_random_points(disk_map):
    rng = np.random.default_rng(7)
    r = np.sqrt(rng.uniform(0, 0.98, 500))
    z = r * np.exp(2j * np.pi * rng.uniform(size=500))
    w = disk_map.evaluate_many(z)
    d = np.abs(w[:, None] - w[None, :])
    d[np.diag_indices(500)] = np.inf
    assert d.min() > 0
    assert np.all((w.real > -1e-9) & (w.real < 1 + 1e-9))
    assert np.all((w.imag > -1e-9) & (w.imag < disk_map.h + 1e-9))


def test_bundle_round_trip(tmp_path, disk_map):
    path = tmp_path / "disk.json"
    save_map(disk_map, path)
    back = load_map(path)
    assert back.h == disk_map.h and back.h_conj == disk_map.h_conj
    np.testing.assert_array_equal(back.u1.coeffs, disk_map.u1.coeffs)
    np.testing.assert_array_equal(back.u2.coeffs, disk_map.u2.coeffs)
    pts = [0.1 + 0.2j, -0.5j, 0.7 - 0.1j]
    assert [back.evaluate(z) for z in pts] == [disk_map.evaluate(z) for z in pts]


def test_bundle_schema_checked(disk_map):
    d = disk_map.to_json()
    d["schema"] = 7
    with pytest.raises(ValueError):
        ConformalMap.from_json(d)


def test_outside_point_raises(disk_map):
    with pytest.raises(OutsideError):
        disk_map.evaluate(1.5)


def test_wrong_problem_type():
    with pytest.raises(TypeError):
        build_map(gallery("annulus"))
    with pytest.raises(TypeError):
        build_ring_map(gallery("unit-disk"))


# -- rings ------------------------------------------------------------------------

def test_annulus_modulus_and_capacity(annulus_map):
    u, cap, mod = solve_ring(gallery("annulus"), 8)
    assert mod == pytest.approx(1.0, abs=1e-8)
    assert cap == pytest.approx(annulus_capacity((E1, 1.0)), rel=1e-10)
    assert annulus_map.modulus == pytest.approx(1.0, abs=1e-8)
    assert annulus_map.h == pytest.approx(cap, rel=1e-8)


def test_annulus_map_on_polar_grid(annulus_map):
    # inner circle -> |w| = 1, outer -> |w| = e^-1: w = e^-1 / z, cut image on the positive axis
    r = np.linspace(E1, 1.0, 10)[1:-1]
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False) + 0.01
    z = (r[:, None] * np.exp(1j * th)).ravel()
    w = annulus_map.evaluate_many(z)
    assert np.abs(w - E1 / z).max() <= 1e-6


def test_annulus_inner_boundary_is_unit_circle(annulus_map):
    z = E1 * np.exp(1j * np.linspace(0.05, 6.2, 40))
    np.testing.assert_allclose(np.abs(annulus_map.evaluate_many(z)), 1.0, atol=1e-8)


@given(st.floats(0.0, 1.0))
def test_weld_continuity(annulus_map, s):
    # the two copies of the cut are the same points; both sides must give the same w
    z = E1 + s * (1 - E1)
    z = min(max(z, E1 + 1e-9), 1 - 1e-9)
    above = annulus_map.evaluate(complex(z, 1e-12))
    below = annulus_map.evaluate(complex(z, -1e-12))
    assert abs(above - below) <= 1e-6


def test_annulus_radial_cut():
    u, _, _ = solve_ring(gallery("annulus"), 8)
    cut = steepest_descent_cut(u, E1)
    assert abs(cut.start - E1) <= 1e-10
    assert abs(cut.end - 1.0) <= 1e-6
    assert np.abs(cut.points.imag).max() <= 1e-6
    vals = [eval_field(u, z)[0] for z in cut.points[::10]]
    assert np.all(np.diff(vals) < 0)


def test_circle_in_square_cut_on_symmetry_axis():
    u, _, _ = solve_ring(gallery("circle-in-square"), 8)
    cut = steepest_descent_cut(u)  # auto seed lands on a side midpoint direction
    assert abs(abs(cut.start) - 1.0) <= 1e-10
    assert abs(max(abs(cut.end.real), abs(cut.end.imag)) - 2.5) <= 1e-6
    lateral = np.minimum(np.abs(cut.points.imag), np.abs(cut.points.real)).max()
    assert lateral <= 1e-4


def test_auto_cut_ring_map_matches_template():
    prob = gallery("annulus")
    ref = cached_map("annulus", 8)
    traced = build_ring_map(prob, 8, cut="auto")
    assert traced.modulus == pytest.approx(ref.modulus, abs=1e-6)
    assert traced.meta["cut_fit_residual"] <= 1e-6


def test_cut_must_start_on_the_inner_vertex():
    prob = gallery("annulus")
    u, _, _ = solve_ring(prob, 4)
    cut = steepest_descent_cut(u, E1 * np.exp(0.3j))
    with pytest.raises(GeometryError):
        attach_cut(prob, cut)


def test_bad_seed_arguments():
    u, _, _ = solve_ring(gallery("annulus"), 4)
    with pytest.raises(ValueError):
        steepest_descent_cut(u, "nearest")
    with pytest.raises(OutsideError):
        steepest_descent_cut(u, 5.0)


def test_trace_stops_at_the_outer_boundary_at_low_order():
    # the discrete potential hits the boundary slightly before u = 0
    u, _, _ = solve_ring(gallery("annulus"), 4)
    cut = steepest_descent_cut(u, E1 * np.exp(0.3j))
    assert abs(abs(cut.end) - 1.0) <= 1e-6
    assert cut.values[-1] == 0.0
