import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conjmap.gallery import GALLERY, asteroid_curve, gallery, unit_disk
from conjmap.geometry import (BlockBuilder, Curve, GeometryError, QuadrilateralProblem,
                              RingProblem, circular_arc, load_problem, polyline, polynomial_curve,
                              problem_from_json, save_problem, segment, trigonometric_curve)


def unit_square(mark=()):
    b = BlockBuilder()
    v = [b.vertex(z) for z in (0, 1, 1 + 1j, 1j)]
    b.block(*v)
    for (i, j), tag in zip([(2, 3), (3, 0), (0, 1), (1, 2)], ["g1", "g2", "g3", "g4"]):
        b.tag(v[i], v[j], tag)
    b.mark(*[v[k] for k in mark])
    return b.quadrilateral("square", [v[2], v[3], v[0], v[1]])


def test_segment_midpoint():
    assert segment(0, 1).point(0.5) == pytest.approx(0.5)


def test_asteroid_start_point():
    assert complex(asteroid_curve().point(0.0)) == pytest.approx(-1 - 1j, abs=1e-15)
    assert complex(asteroid_curve().point(0.5)) == pytest.approx(0.0, abs=1e-15)


def test_flower_radius_at_zero():
    q = gallery("flower", {"n": 6, "t": 0.1})
    z = complex(q.curves[0].point(0.0))
    assert z == pytest.approx(0.9, abs=1e-15)


def test_circular_arc_and_reverse():
    c = circular_arc(1j, 2.0, 0.0, math.pi)
    assert complex(c.point(0.5)) == pytest.approx(1j + 2j, abs=1e-15)
    r = c.reversed()
    assert complex(r.point(0.0)) == pytest.approx(complex(c.point(1.0)))


def test_polynomial_and_polyline_curves():
    c = polynomial_curve([0, 1, 1j], 0.0, 2.0)  # s + i s^2 on [0, 2]
    assert complex(c.point(0.5)) == pytest.approx(1 + 1j)
    pl = polyline([0, 1, 1 + 1j])
    assert complex(pl.point(0.75)) == pytest.approx(1 + 0.5j)


@pytest.mark.parametrize("curve", [
    segment(0, 1 + 2j),
    circular_arc(0.5, 1.5, -1.0, 2.0),
    polynomial_curve([1, 2j, 0.5], -1, 1),
    trigonometric_curve([(1, 0.8), (7, 0.05)], 0.0, 1.0),
    polyline([0, 1, 2 + 1j, 3]),
])
def test_curve_json_round_trip(curve):
    back = Curve.from_json(json.loads(json.dumps(curve.to_json())))
    t = np.linspace(0, 1, 17)
    np.testing.assert_allclose(back.point(t), curve.point(t), atol=0)


@given(st.floats(0.0, 1.0))
def test_reversed_curve_runs_backwards(t):
    c = circular_arc(0, 1, 0.3, 2.5)
    assert complex(c.reversed().point(t)) == pytest.approx(complex(c.point(1 - t)), abs=1e-14)


def test_unit_disk_corners():
    q = gallery("unit-disk")
    want = [cmath.exp(1j * k * math.pi / 2) for k in range(4)]
    np.testing.assert_allclose(q.corner_points, want, atol=1e-15)


def test_unit_disk_custom_angles():
    th = [0.0, 0.2, math.pi, 4.0]
    q = unit_disk(th)
    np.testing.assert_allclose(q.corner_points, np.exp(1j * np.array(th)), atol=1e-14)
    with pytest.raises(GeometryError):
        unit_disk([0.0, 2.0, 1.0, 3.0])


def test_circle_in_l_defaults():
    r = gallery("circle-in-L")
    assert isinstance(r, RingProblem)
    m = r.meta
    assert (m["a"], m["b"], m["c"], m["d"]) == (3.0, 1.0, 2.0, 1.0)
    assert complex(*m["z0"]) == pytest.approx(1.6 + 0.4j)
    assert m["r"] == pytest.approx(0.2)


def test_rectangle_corners():
    q = gallery("rectangle", {"h": 1.0})
    np.testing.assert_allclose(q.corner_points, [1 + 1j, 1j, 0, 1])


@pytest.mark.parametrize("name", GALLERY)
def test_gallery_builds_and_round_trips(name, tmp_path):
    prob = gallery(name)
    path = tmp_path / f"{name}.json"
    save_problem(prob, path)
    back = load_problem(path)
    assert type(back) is type(prob)
    np.testing.assert_array_equal(back.vertices, prob.vertices)
    assert back.blocks == prob.blocks
    assert back.corners == prob.corners
    assert back.to_json() == prob.to_json()


def test_gallery_errors():
    with pytest.raises(GeometryError):
        gallery("no-such-domain")
    with pytest.raises(GeometryError):
        gallery("disk-in-pentagon", {"r": 1.0})
    with pytest.raises(GeometryError):
        gallery("flower", {"r": 0.3})
    with pytest.raises(GeometryError):
        gallery("rectangle", {"h": -1.0})


def test_misordered_tags_rejected():
    b = BlockBuilder()
    v = [b.vertex(z) for z in (0, 1, 1 + 1j, 1j)]
    b.block(*v)
    for (i, j), tag in zip([(2, 3), (3, 0), (0, 1), (1, 2)], ["g2", "g1", "g3", "g4"]):
        b.tag(v[i], v[j], tag)
    with pytest.raises(GeometryError):
        b.quadrilateral("bad", [v[2], v[3], v[0], v[1]])


def test_clockwise_boundary_rejected():
    b = BlockBuilder()
    v = [b.vertex(z) for z in (0, 1j, 1 + 1j, 1)]  # clockwise block
    b.block(*v)
    with pytest.raises(GeometryError):
        b.quadrilateral("cw", [v[0], v[1], v[2], v[3]])


def test_schema_version_checked():
    d = unit_square().to_json()
    d["schema"] = 99
    with pytest.raises(GeometryError):
        problem_from_json(d)


def test_square_problem_is_valid():
    q = unit_square(mark=(0,))
    assert isinstance(q, QuadrilateralProblem)
    assert q.refine == (0,)
