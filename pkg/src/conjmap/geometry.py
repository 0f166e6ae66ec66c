"""Boundary curves and problem definitions (quadrilaterals and ring domains).

Points in the plane are carried as complex numbers throughout the package.

A problem is described by a coarse *block decomposition*: vertices, quads of
vertex ids (counter-clockwise), optional curve geometry on block edges and
boundary tags on the boundary edges.  Boundary tags name the four arcs of a
quadrilateral, ``g1``..``g4``; for a cut ring domain the inner boundary is
``g4`` (u = 1), the outer ``g2`` (u = 0), and the two copies of the cut are
``g1`` (the side where the conjugate potential is 1) and ``g3``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

CURVE_KINDS = ("segment", "circular-arc", "parametric-polynomial", "polyline",
               "trigonometric")
ARC_TAGS = ("g1", "g2", "g3", "g4")
SCHEMA_VERSION = 1


class GeometryError(ValueError):
    """Invalid curve or problem definition."""


def _c(v) -> complex:
    if isinstance(v, (list, tuple, np.ndarray)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _pair(z: complex) -> list:
    return [float(z.real), float(z.imag)]


@dataclass(frozen=True, eq=False)
class Curve:
    """Parametric arc on the unit parameter interval.

    ``kind`` selects the native parameterization, mapped affinely onto
    ``t in [0, 1]``; ``reverse`` flips the direction of travel.

    segment:                a, b
    circular-arc:           center, radius, theta0, theta1
    parametric-polynomial:  coeffs (complex, ascending powers of s), s0, s1
    trigonometric:          terms [(k, c_k)], theta0, theta1; z = sum c_k e^{ik theta}
    polyline:               points (chord-length parameterization)
    """

    kind: str
    params: dict
    reverse: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise GeometryError(f"unknown curve kind {self.kind!r}")
        p = self.params
        if self.kind == "segment":
            self._cache["a"], self._cache["b"] = _c(p["a"]), _c(p["b"])
        elif self.kind == "circular-arc":
            self._cache["c"] = _c(p["center"])
            if float(p["radius"]) <= 0:
                raise GeometryError("arc radius must be positive")
        elif self.kind == "parametric-polynomial":
            co = np.array([_c(v) for v in p["coeffs"]], dtype=complex)
            self._cache["coeffs"] = co
            self._cache["dcoeffs"] = co[1:] * np.arange(1, co.size)
        elif self.kind == "trigonometric":
            ks = np.array([int(k) for k, _ in p["terms"]])
            cs = np.array([_c(v) for _, v in p["terms"]], dtype=complex)
            self._cache["k"], self._cache["ck"] = ks, cs
        elif self.kind == "polyline":
            pts = np.array([_c(v) for v in p["points"]], dtype=complex)
            if pts.size < 2:
                raise GeometryError("polyline needs at least two points")
            s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(pts)))])
            if s[-1] <= 0:
                raise GeometryError("polyline has zero length")
            self._cache["pts"], self._cache["s"] = pts, s / s[-1]
        z0, z1 = self.point(0.0), self.point(1.0)
        if not (np.isfinite(z0) and np.isfinite(z1)):
            raise GeometryError("curve endpoints are not finite")

    # -- native parameter --------------------------------------------------
    def _native(self, t):
        p = self.params
        if self.kind == "circular-arc":
            a, b = float(p["theta0"]), float(p["theta1"])
        elif self.kind == "parametric-polynomial":
            a, b = float(p["s0"]), float(p["s1"])
        elif self.kind == "trigonometric":
            a, b = float(p["theta0"]), float(p["theta1"])
        else:
            a, b = 0.0, 1.0
        return a + t * (b - a), (b - a)

    def _eval(self, t, der: bool):
        t = np.asarray(t, dtype=float)
        sgn = 1.0
        if self.reverse:
            t, sgn = 1.0 - t, -1.0
        s, scale = self._native(t)
        k = self.kind
        if k == "segment":
            a, b = self._cache["a"], self._cache["b"]
            return (b - a) * sgn * np.ones_like(s) if der else a + s * (b - a)
        if k == "circular-arc":
            c, r = self._cache["c"], float(self.params["radius"])
            e = np.exp(1j * s)
            return 1j * r * e * scale * sgn if der else c + r * e
        if k == "parametric-polynomial":
            if der:
                return np.polynomial.polynomial.polyval(s, self._cache["dcoeffs"]) * scale * sgn
            return np.polynomial.polynomial.polyval(s, self._cache["coeffs"])
        if k == "trigonometric":
            ks, ck = self._cache["k"], self._cache["ck"]
            e = np.exp(1j * np.multiply.outer(s, ks))
            if der:
                return (e * (1j * ks * ck)).sum(axis=-1) * scale * sgn
            return (e * ck).sum(axis=-1)
        pts, knots = self._cache["pts"], self._cache["s"]
        idx = np.clip(np.searchsorted(knots, s, side="right") - 1, 0, pts.size - 2)
        h = knots[idx + 1] - knots[idx]
        if der:
            return (pts[idx + 1] - pts[idx]) / h * sgn
        w = (s - knots[idx]) / h
        return pts[idx] + w * (pts[idx + 1] - pts[idx])

    def point(self, t):
        """Point (complex) at unit parameter ``t``; vectorized."""
        return self._eval(t, False)

    def derivative(self, t):
        """d point / dt at unit parameter ``t``."""
        return self._eval(t, True)

    def reversed(self) -> "Curve":
        return Curve(self.kind, dict(self.params), not self.reverse)

    def sample(self, n: int = 200, t0: float = 0.0, t1: float = 1.0) -> np.ndarray:
        return self.point(np.linspace(t0, t1, n))

    def to_json(self) -> dict:
        p = {}
        for key, val in self.params.items():
            if key in ("a", "b", "center"):
                p[key] = _pair(_c(val))
            elif key in ("coeffs", "points"):
                p[key] = [_pair(_c(v)) for v in val]
            elif key == "terms":
                p[key] = [[int(k), _pair(_c(v))] for k, v in val]
            else:
                p[key] = float(val)
        return {"kind": self.kind, "params": p, "reverse": self.reverse}

    @classmethod
    def from_json(cls, d: dict) -> "Curve":
        return cls(d["kind"], dict(d["params"]), bool(d.get("reverse", False)))


def curve_point(c: Curve, t: float) -> complex:
    """Point on ``c`` at ``t in [0, 1]``; raises outside the interval."""
    if not 0.0 <= t <= 1.0:
        raise GeometryError(f"curve parameter {t} outside [0, 1]")
    return complex(c.point(t))


# -- curve factories -------------------------------------------------------

def segment(a, b) -> Curve:
    return Curve("segment", {"a": _pair(_c(a)), "b": _pair(_c(b))})


def circular_arc(center, radius, theta0, theta1) -> Curve:
    return Curve("circular-arc", {"center": _pair(_c(center)), "radius": float(radius),
                                  "theta0": float(theta0), "theta1": float(theta1)})


def polynomial_curve(coeffs, s0, s1) -> Curve:
    return Curve("parametric-polynomial",
                 {"coeffs": [_pair(_c(v)) for v in coeffs], "s0": float(s0), "s1": float(s1)})


def trigonometric_curve(terms, theta0, theta1) -> Curve:
    return Curve("trigonometric", {"terms": [[int(k), _pair(_c(v))] for k, v in terms],
                                   "theta0": float(theta0), "theta1": float(theta1)})


def polyline(points) -> Curve:
    return Curve("polyline", {"points": [_pair(_c(v)) for v in points]})


# -- polygon helpers -------------------------------------------------------

def signed_area(z: np.ndarray) -> float:
    """Shoelace area of the closed polygon through the points ``z``."""
    z = np.asarray(z)
    return 0.5 * float(np.sum((np.conj(z) * np.roll(z, -1)).imag))


def _segments_intersect(z: np.ndarray, closed: bool) -> bool:
    """True when a polyline crosses itself (non-adjacent segments only)."""
    a = z[:-1] if not closed else z
    b = z[1:] if not closed else np.roll(z, -1)
    n = a.size
    ax, ay, bx, by = a.real, a.imag, b.real, b.imag
    for i in range(n):
        j = np.arange(i + 2, n)
        if closed and i == 0:
            j = j[j != n - 1]
        if j.size == 0:
            continue
        d1x, d1y = bx[i] - ax[i], by[i] - ay[i]
        cx, cy, dx, dy = ax[j], ay[j], bx[j], by[j]
        o1 = d1x * (cy - ay[i]) - d1y * (cx - ax[i])
        o2 = d1x * (dy - ay[i]) - d1y * (dx - ax[i])
        d2x, d2y = dx - cx, dy - cy
        o3 = d2x * (ay[i] - cy) - d2y * (ax[i] - cx)
        o4 = d2x * (by[i] - cy) - d2y * (bx[i] - cx)
        if np.any((o1 * o2 < 0) & (o3 * o4 < 0)):
            return True
    return False


def winding_number(loop: np.ndarray, z: complex) -> int:
    d = np.asarray(loop) - z
    ang = np.angle(np.roll(d, -1) / d)
    return int(round(ang.sum() / (2 * math.pi)))


# -- problems ----------------------------------------------------------------

@dataclass(frozen=True)
class EdgeSpec:
    """Geometry/tag for a block edge running from vertex ``a`` to ``b``."""

    a: int
    b: int
    curve: int | None = None
    t: tuple = (0.0, 1.0)  # curve parameter at a, at b
    tag: str | None = None


@dataclass(frozen=True)
class Problem:
    """Common block-decomposition data; see module docstring."""

    name: str
    curves: tuple
    vertices: np.ndarray
    blocks: tuple
    edges: tuple
    refine: tuple = ()
    meta: dict = field(default_factory=dict)

    kind = "problem"

    def edge_map(self) -> dict:
        return {frozenset((e.a, e.b)): e for e in self.edges}

    def edge_point(self, e: EdgeSpec, s) -> np.ndarray:
        """Points along block edge ``e`` at fraction ``s`` from ``a`` to ``b``."""
        s = np.asarray(s, dtype=float)
        if e.curve is None:
            za, zb = self.vertices[e.a], self.vertices[e.b]
            return za + s * (zb - za)
        t = e.t[0] + s * (e.t[1] - e.t[0])
        return self.curves[e.curve].point(t)

    def boundary_edges(self) -> list:
        """Block edges used by exactly one block, oriented as the block traverses them."""
        count: dict = {}
        for blk in self.blocks:
            for k in range(4):
                a, b = blk[k], blk[(k + 1) % 4]
                count.setdefault(frozenset((a, b)), []).append((a, b))
        return [uses[0] for uses in count.values() if len(uses) == 1]

    def bbox_diagonal(self) -> float:
        pts = [self.vertices]
        em = self.edge_map()
        for e in em.values():
            if e.curve is not None:
                pts.append(self.edge_point(e, np.linspace(0, 1, 9)))
        z = np.concatenate(pts)
        return float(abs(complex(np.ptp(z.real), np.ptp(z.imag))))

    # -- validation -------------------------------------------------------
    def directed_edge_points(self, a: int, b: int, n: int = 16) -> np.ndarray:
        """n points along block edge a->b, excluding the end at b."""
        s = np.linspace(0, 1, n + 1)[:-1]
        e = self.edge_map().get(frozenset((a, b)))
        if e is None:
            za, zb = self.vertices[a], self.vertices[b]
            return za + s * (zb - za)
        return self.edge_point(e, s if e.a == a else 1 - s)

    def check_blocks(self):
        em = self.edge_map()
        uses: dict = {}
        diag = self.bbox_diagonal()
        for bi, blk in enumerate(self.blocks):
            if len(set(blk)) != 4:
                raise GeometryError(f"block {bi} repeats a vertex")
            loop = []
            for k in range(4):
                a, b = blk[k], blk[(k + 1) % 4]
                key = frozenset((a, b))
                uses[key] = uses.get(key, 0) + 1
                loop.append(self.directed_edge_points(a, b))
            area = signed_area(np.concatenate(loop))
            if area <= 1e-14 * diag * diag:
                raise GeometryError(f"block {bi} is degenerate or clockwise (area {area:.3g})")
        for key, n in uses.items():
            if n > 2:
                raise GeometryError(f"block edge {sorted(key)} used by {n} blocks")
        for e in self.edges:
            if e.curve is not None:
                for vid, t in ((e.a, e.t[0]), (e.b, e.t[1])):
                    gap = abs(self.curves[e.curve].point(t) - self.vertices[vid])
                    if gap > 1e-12 * diag:
                        raise GeometryError(
                            f"edge ({e.a},{e.b}) curve does not meet vertex {vid} (gap {gap:.3g})")
        for a, b in self.boundary_edges():
            e = em.get(frozenset((a, b)))
            if e is None or e.tag is None:
                raise GeometryError(f"boundary edge ({a},{b}) has no arc tag")

    def boundary_loops(self, weld: dict | None = None, tags=None) -> list:
        """Closed loops of directed boundary edges (domain on the left).

        ``weld`` maps vertex ids onto representatives (used to close the
        loops of a cut ring); ``tags`` restricts the edges considered.
        Each loop is a list of directed ``(a, b)`` block edges.
        """
        weld = weld or {}
        em = self.edge_map()
        nxt = {}
        for a, b in self.boundary_edges():
            if tags is not None and em[frozenset((a, b))].tag not in tags:
                continue
            wa = weld.get(a, a)
            if wa in nxt:
                raise GeometryError(f"boundary is not a simple chain at vertex {a}")
            nxt[wa] = (a, b)
        loops, seen = [], set()
        for start in list(nxt):
            if start in seen:
                continue
            loop, v = [], start
            while v not in seen:
                seen.add(v)
                if v not in nxt:
                    raise GeometryError("boundary chain is open")
                a, b = nxt[v]
                loop.append((a, b))
                v = weld.get(b, b)
            loops.append(loop)
        return loops

    def sample_loop(self, loop, n_per_edge: int = 24) -> np.ndarray:
        return np.concatenate([self.directed_edge_points(a, b, n_per_edge) for a, b in loop])

    def to_json(self) -> dict:
        d = {
            "schema": SCHEMA_VERSION,
            "kind": self.kind,
            "name": self.name,
            "curves": [c.to_json() for c in self.curves],
            "vertices": [_pair(z) for z in self.vertices],
            "blocks": [list(map(int, b)) for b in self.blocks],
            "edges": [{"v": [e.a, e.b], "curve": e.curve, "t": list(map(float, e.t)),
                       "tag": e.tag} for e in self.edges],
            "refine": list(map(int, self.refine)),
            "meta": self.meta,
        }
        return d


@dataclass(frozen=True)
class QuadrilateralProblem(Problem):
    """Simply connected domain with corners z1..z4 (vertex ids)."""

    corners: tuple = ()

    kind = "quadrilateral"

    def __post_init__(self):
        validate_quadrilateral(self)

    @property
    def corner_points(self) -> np.ndarray:
        return self.vertices[list(self.corners)]

    def to_json(self) -> dict:
        d = super().to_json()
        d["corners"] = list(map(int, self.corners))
        return d


@dataclass(frozen=True)
class RingProblem(Problem):
    """Doubly connected domain, stored already cut along ``cut`` vertex twins.

    ``twins`` pairs each vertex on the ``g1`` copy of the cut with its
    coincident partner on the ``g3`` copy.  Welding the twins gives the
    uncut ring.  ``corners`` are the four cut endpoints (z1..z4 of the cut
    quadrilateral); ``cut_exact`` records whether the cut is known to be a
    gradient line of the ring potential (e.g. a symmetry axis).
    """

    corners: tuple = ()
    twins: tuple = ()
    cut_exact: bool = True

    kind = "ring"

    def __post_init__(self):
        validate_ring(self)

    @property
    def corner_points(self) -> np.ndarray:
        return self.vertices[list(self.corners)]

    def to_json(self) -> dict:
        d = super().to_json()
        d["corners"] = list(map(int, self.corners))
        d["twins"] = [list(map(int, t)) for t in self.twins]
        d["cut_exact"] = self.cut_exact
        return d


def _check_curves_simple(prob: Problem):
    for i, c in enumerate(prob.curves):
        if c.kind == "polyline":
            z = np.asarray(c._cache["pts"])
        else:
            z = c.sample(400)
        closed = abs(z[0] - z[-1]) < 1e-12
        if _segments_intersect(z[:-1] if closed else z, closed):
            raise GeometryError(f"curve {i} intersects itself")


def validate_quadrilateral(q: QuadrilateralProblem):
    if len(q.corners) != 4 or len(set(q.corners)) != 4:
        raise GeometryError("a quadrilateral needs four distinct corners")
    _check_curves_simple(q)
    q.check_blocks()
    loops = q.boundary_loops()
    if len(loops) != 1:
        raise GeometryError(f"quadrilateral boundary has {len(loops)} loops")
    loop = loops[0]
    z = q.sample_loop(loop)
    if signed_area(z) <= 0:
        raise GeometryError("boundary is not positively oriented")
    if _segments_intersect(z, True):
        raise GeometryError("boundary is not simple")
    _check_arc_sequence(q, loop)


def _check_arc_sequence(q: Problem, loop):
    """Arcs g1..g4 must run z1->z2->z3->z4->z1 along the directed loop."""
    em = q.edge_map()
    starts = [a for a, _ in loop]
    for c in q.corners:
        if c not in starts:
            raise GeometryError(f"corner {c} is not on the boundary")
    n = len(loop)
    i0 = starts.index(q.corners[0])
    order = [(starts.index(c) - i0) % n for c in q.corners]
    if order != sorted(order):
        raise GeometryError("corners are not positively ordered along the boundary")
    bounds = order + [n]
    for j in range(4):
        for i in range(bounds[j], bounds[j + 1]):
            a, b = loop[(i0 + i) % n]
            if em[frozenset((a, b))].tag != ARC_TAGS[j]:
                raise GeometryError(f"edge ({a},{b}) after corner z{j + 1} is not tagged {ARC_TAGS[j]}")


def validate_ring(r: RingProblem):
    if len(r.corners) != 4:
        raise GeometryError("ring problem needs the four cut endpoints as corners")
    _check_curves_simple(r)
    r.check_blocks()
    diag = r.bbox_diagonal()
    for a, b in r.twins:
        if abs(r.vertices[a] - r.vertices[b]) > 1e-12 * diag:
            raise GeometryError(f"twin vertices {a},{b} do not coincide")
    loops = r.boundary_loops()
    if len(loops) != 1:
        raise GeometryError("cut ring must have a single boundary loop")
    _check_arc_sequence(r, loops[0])
    outer, inner = ring_loops(r)
    zo, zi = r.sample_loop(outer), r.sample_loop(inner)
    if signed_area(zo) <= 0:
        raise GeometryError("outer chain is not positively oriented")
    if signed_area(zi) >= 0:
        raise GeometryError("inner chain (as traversed) must be negatively oriented")
    for z in zi[:: max(1, zi.size // 64)]:
        if winding_number(zo, z) != 1:
            raise GeometryError("inner chain is not inside the outer chain")
    if _segments_intersect(zo, True) or _segments_intersect(zi, True):
        raise GeometryError("ring boundary chain intersects itself")


def weld_map(r: "RingProblem") -> dict:
    """Vertex id -> representative id after closing the cut."""
    return {b: a for a, b in r.twins}


def ring_loops(r: RingProblem):
    """Outer (g2) and inner (g4) loops of the uncut ring as directed edges."""
    w = weld_map(r)
    outer = r.boundary_loops(w, tags=("g2",))
    inner = r.boundary_loops(w, tags=("g4",))
    if len(outer) != 1 or len(inner) != 1:
        raise GeometryError("ring needs exactly one inner and one outer boundary loop")
    return outer[0], inner[0]


def problem_from_json(d: dict) -> Problem:
    if int(d.get("schema", SCHEMA_VERSION)) != SCHEMA_VERSION:
        raise GeometryError(f"unsupported problem schema {d.get('schema')}")
    try:
        curves = tuple(Curve.from_json(c) for c in d["curves"])
        verts = np.array([_c(v) for v in d["vertices"]], dtype=complex)
        blocks = tuple(tuple(int(v) for v in b) for b in d["blocks"])
        edges = tuple(EdgeSpec(int(e["v"][0]), int(e["v"][1]),
                               None if e.get("curve") is None else int(e["curve"]),
                               tuple(float(t) for t in e.get("t", (0.0, 1.0))),
                               e.get("tag")) for e in d["edges"])
        common = dict(name=d.get("name", "problem"), curves=curves, vertices=verts,
                      blocks=blocks, edges=edges,
                      refine=tuple(int(v) for v in d.get("refine", ())),
                      meta=dict(d.get("meta", {})))
        kind = d["kind"]
    except (KeyError, TypeError, IndexError) as exc:
        raise GeometryError(f"malformed problem definition: {exc}") from exc
    if kind == "quadrilateral":
        return QuadrilateralProblem(corners=tuple(int(c) for c in d["corners"]), **common)
    if kind == "ring":
        return RingProblem(corners=tuple(int(c) for c in d["corners"]),
                           twins=tuple(tuple(int(v) for v in t) for t in d["twins"]),
                           cut_exact=bool(d.get("cut_exact", True)), **common)
    raise GeometryError(f"unknown problem kind {kind!r}")


def load_problem(path) -> Problem:
    with open(path) as fh:
        return problem_from_json(json.load(fh))


def save_problem(prob: Problem, path):
    with open(path, "w") as fh:
        json.dump(prob.to_json(), fh, indent=1)


class BlockBuilder:
    """Incremental construction of a block decomposition."""

    def __init__(self):
        self.curves: list = []
        self.vertices: list = []
        self.blocks: list = []
        self.edges: dict = {}
        self.refine: list = []
        self.twins: list = []

    def curve(self, c: Curve) -> int:
        self.curves.append(c)
        return len(self.curves) - 1

    def vertex(self, z) -> int:
        self.vertices.append(complex(z))
        return len(self.vertices) - 1

    def twin(self, v: int) -> int:
        w = self.vertex(self.vertices[v])
        self.twins.append((v, w))
        return w

    def block(self, a, b, c, d):
        self.blocks.append((int(a), int(b), int(c), int(d)))

    def arc(self, a: int, b: int, curve: int, t0: float, t1: float, tag: str | None = None):
        """Curved block edge a->b following ``curve`` from t0 to t1; snaps vertices."""
        a, b = int(a), int(b)
        c = self.curves[curve]
        self.vertices[a] = complex(c.point(t0))
        self.vertices[b] = complex(c.point(t1))
        self.edges[frozenset((a, b))] = EdgeSpec(a, b, curve, (float(t0), float(t1)), tag)

    def tag(self, a: int, b: int, tag: str):
        a, b = int(a), int(b)
        key = frozenset((a, b))
        e = self.edges.get(key)
        if e is None:
            self.edges[key] = EdgeSpec(a, b, None, (0.0, 1.0), tag)
        else:
            self.edges[key] = EdgeSpec(e.a, e.b, e.curve, e.t, tag)

    def tag_chain(self, ids: Iterable[int], tag: str, closed: bool = False):
        ids = list(ids)
        pairs = list(zip(ids[:-1], ids[1:]))
        if closed:
            pairs.append((ids[-1], ids[0]))
        for a, b in pairs:
            self.tag(a, b, tag)

    def mark(self, *vs: int):
        for v in map(int, vs):
            if v not in self.refine:
                self.refine.append(v)

    def _common(self, name, meta):
        return dict(name=name, curves=tuple(self.curves),
                    vertices=np.array(self.vertices, dtype=complex),
                    blocks=tuple(self.blocks), edges=tuple(self.edges.values()),
                    refine=tuple(self.refine), meta=dict(meta or {}))

    def quadrilateral(self, name, corners, meta=None) -> QuadrilateralProblem:
        return QuadrilateralProblem(corners=tuple(map(int, corners)), **self._common(name, meta))

    def ring(self, name, corners, cut_exact=True, meta=None) -> RingProblem:
        return RingProblem(corners=tuple(map(int, corners)), twins=tuple(self.twins),
                           cut_exact=cut_exact, **self._common(name, meta))
