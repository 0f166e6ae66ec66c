"""Conformal maps by the conjugate function method.

A quadrilateral (Q; z1, z2, z3, z4) is mapped onto the rectangle
[0, 1] x [0, h] by f = u1 + i h u2, where u1 solves the Dirichlet-Neumann
problem (u1 = 1 on the arc z4 z1, 0 on z2 z3), h is its Dirichlet energy
and u2 solves the conjugate problem.  A ring domain is cut along a gradient
line of its potential, the cut quadrilateral is mapped onto a rectangle and
w = exp((2 pi / h)(f - 1)) wraps the rectangle onto an annulus.
"""
from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .femcore import Field, assemble, classify_dofs, energy, solve_dirichlet, solve_pair
from .geometry import EdgeSpec, GeometryError, QuadrilateralProblem, RingProblem, polynomial_curve
from .mesh import DEFAULT_RATIO, SIDE_NODES, Mesh, build_mesh
from .tracer import OutsideError, eval_field, locate, _field_at, _index, _value_at

BUNDLE_SCHEMA = 1


@dataclass
class ConformalMap:
    """f = u1 + i h u2 on ``mesh``; for ``kind == "annulus"`` the map is exp((2pi/h)(f - 1))."""

    mesh: Mesh
    p: int
    u1: Field
    u2: Field
    h: float
    h_conj: float
    kind: str = "rectangle"
    modulus: float | None = None  # M(R) = 2 pi / h for rings
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("rectangle", "annulus"):
            raise ValueError(f"unknown map kind {self.kind!r}")
        if not self.h > 0:
            raise ValueError("modulus h must be positive")
        if self.kind == "annulus" and self.modulus is None:
            self.modulus = 2 * math.pi / self.h

    @property
    def rec(self) -> float:
        return abs(self.h * self.h_conj - 1.0)

    def rectangle_image(self, z, hint=None) -> complex:
        el, (xi, eta) = locate(self.mesh, z, hint)
        return complex(_value_at(self.u1, el, xi, eta), self.h * _value_at(self.u2, el, xi, eta))

    def evaluate(self, z) -> complex:
        """Image of the point ``z``; raises ``OutsideError`` outside the domain."""
        f = self.rectangle_image(z)
        if self.kind == "annulus":
            return complex(np.exp((2 * math.pi / self.h) * (f - 1.0)))
        return f

    def evaluate_many(self, zs) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex).ravel()
        out = np.empty(zs.size, dtype=complex)
        last = None
        for k, z in enumerate(zs):
            el, (xi, eta) = locate(self.mesh, z, last)
            last = el
            f = complex(_value_at(self.u1, el, xi, eta), self.h * _value_at(self.u2, el, xi, eta))
            out[k] = np.exp((2 * math.pi / self.h) * (f - 1.0)) if self.kind == "annulus" else f
        return out

    # -- bundle -----------------------------------------------------------------
    def to_json(self) -> dict:
        return {"schema": BUNDLE_SCHEMA, "version": __version__, "kind": self.kind,
                "p": self.p, "h": self.h, "h_conj": self.h_conj, "modulus": self.modulus,
                "mesh": self.mesh.to_json(), "u1": self.u1.coeffs.tolist(),
                "u2": self.u2.coeffs.tolist(), "meta": self.meta}

    @classmethod
    def from_json(cls, d: dict) -> "ConformalMap":
        if int(d.get("schema", -1)) != BUNDLE_SCHEMA:
            raise ValueError(f"unsupported map bundle schema {d.get('schema')}")
        mesh = Mesh.from_json(d["mesh"])
        p = int(d["p"])
        u1 = Field(mesh, p, np.array(d["u1"], dtype=float))
        u2 = Field(mesh, p, np.array(d["u2"], dtype=float), u1.l2g, u1.signs)
        return cls(mesh, p, u1, u2, float(d["h"]), float(d["h_conj"]), d["kind"],
                   None if d.get("modulus") is None else float(d["modulus"]), dict(d.get("meta", {})))


def save_map(cmap: ConformalMap, path):
    with open(path, "w") as fh:
        json.dump(cmap.to_json(), fh)


def load_map(path) -> ConformalMap:
    with open(path) as fh:
        return ConformalMap.from_json(json.load(fh))


def rec_error(cmap: ConformalMap) -> float:
    """Reciprocal error |M(Q) M(Q~) - 1|."""
    return cmap.rec


def _solve_quadrilateral(problem, p, levels, ratio):
    t0 = time.perf_counter()
    mesh = build_mesh(problem, levels, ratio)
    t1 = time.perf_counter()
    sysm = assemble(mesh, p)
    table = classify_dofs(mesh, p)
    t2 = time.perf_counter()
    u1, u2 = solve_pair(sysm, table)
    t3 = time.perf_counter()
    h, hc = energy(sysm, u1), energy(sysm, u2)
    meta = {"problem": problem.name, "levels": int(levels), "ratio": float(ratio),
            "ndof": int(sysm.ndof), "factorizations": int(sysm.factorizations),
            "corners": [[float(z.real), float(z.imag)] for z in problem.corner_points],
            "timings": {"mesh": t1 - t0, "assemble": t2 - t1, "solve": t3 - t2}}
    return mesh, u1, u2, h, hc, meta


def build_map(problem: QuadrilateralProblem, p: int = 8, levels: int | None = None,
              ratio: float = DEFAULT_RATIO) -> ConformalMap:
    """Map the quadrilateral onto [0, 1] x [0, h]."""
    if not isinstance(problem, QuadrilateralProblem):
        raise TypeError("build_map needs a QuadrilateralProblem; use build_ring_map for rings")
    levels = p if levels is None else levels
    mesh, u1, u2, h, hc, meta = _solve_quadrilateral(problem, p, levels, ratio)
    return ConformalMap(mesh, p, u1, u2, h, hc, "rectangle", None, meta)


def solve_ring(problem: RingProblem, p: int = 8, levels: int | None = None,
               ratio: float = DEFAULT_RATIO):
    """Ring potential (1 on the inner, 0 on the outer boundary), cap R and M(R) = 2 pi / cap R."""
    levels = p if levels is None else levels
    mesh = build_mesh(problem, levels, ratio, welded=True)
    sysm = assemble(mesh, p)
    u = solve_dirichlet(sysm, classify_dofs(mesh, p))
    cap = energy(sysm, u)
    return u, cap, 2 * math.pi / cap


# -- cuts -----------------------------------------------------------------------

@dataclass
class CutCurve:
    """Polyline from the inner to the outer boundary."""

    points: np.ndarray
    start: complex
    end: complex
    values: np.ndarray | None = None  # potential along the points

    def to_json(self) -> dict:
        return {"points": [[float(z.real), float(z.imag)] for z in self.points]}


class CriticalPointError(RuntimeError):
    """The gradient vanished before the trace reached the outer boundary."""

    def __init__(self, msg, position):
        super().__init__(msg)
        self.position = position


def _inner_samples(u: Field, n: int = 16):
    """Points on the inner (g4) boundary edges of the mesh."""
    mesh = u.mesh
    s = np.linspace(-1, 1, n)
    pts = []
    for el, nodes in enumerate(mesh.elements):
        for k, (i, j) in enumerate(SIDE_NODES):
            g = mesh.edge_geom.get((min(nodes[i], nodes[j]), max(nodes[i], nodes[j])))
            if g is not None and g.tag == "g4":
                pts.extend(mesh.side_curve(el, k, s)[0])
    return np.array(pts)


def steepest_descent_cut(u: Field, seed="auto", du: float = 1e-3, tol: float = 1e-10) -> CutCurve:
    """Gradient line of the ring potential ``u`` from the inner to the outer boundary.

    The line is integrated with u itself as the parameter,
    dz/du = grad u / |grad u|^2 taken from u = 1 down to u = 0, by
    step-doubling RK4 with error ``tol`` times the mesh diameter.
    """
    mesh = u.mesh
    diam = _index(mesh).diam
    if isinstance(seed, str):
        if seed != "auto":
            raise ValueError("seed must be a point or 'auto'")
        cands = _inner_samples(u)
        grads = [abs(eval_field(u, z)[1]) for z in cands]
        seed = complex(cands[int(np.argmax(grads))])
    z = complex(seed)
    last = [None]

    def rhs(zz):
        try:
            el, (xi, eta) = locate(mesh, zz, last[0])
        except OutsideError:
            return None
        last[0] = el
        _, g = _field_at(u, el, xi, eta)
        if abs(g) < 1e-12:
            raise CriticalPointError("gradient vanishes along the cut", zz)
        return g / abs(g) ** 2

    def rk4(zz, h):
        k1 = rhs(zz)
        if k1 is None:
            return None
        k2 = rhs(zz + 0.5 * h * k1)
        k3 = None if k2 is None else rhs(zz + 0.5 * h * k2)
        k4 = None if k3 is None else rhs(zz + h * k3)
        if k4 is None:
            return None
        return zz + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    uval = 1.0
    pts, vals = [z], [uval]
    h = du
    while uval > 0:
        h = min(h, uval)
        full = rk4(z, -h)
        half = rk4(z, -0.5 * h)
        two = None if half is None else rk4(half, -0.5 * h)
        if full is None or two is None:
            if h < 1e-14:
                # pinned against the boundary: fine if it is the outer one
                if eval_field(u, z, last[0])[0] < 0.5:
                    pts.append(z)
                    vals.append(0.0)
                    break
                raise CriticalPointError("trace left the domain before reaching u = 0", z)
            h *= 0.5
            continue
        err = abs(two - full)
        if err > tol * diam and h > 1e-14:
            h *= 0.5
            continue
        z, uval = two, uval - h
        if uval < 1e-15:
            uval = 0.0
        pts.append(z)
        vals.append(uval)
        if err < 0.05 * tol * diam:
            h = min(2 * h, 0.05)
    pts = np.array(pts)
    return CutCurve(pts, pts[0], pts[-1], np.array(vals))


def _fit_cut(cut: CutCurve, degree: int = 14):
    z = cut.points
    t = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(z)))])
    t /= t[-1]
    z0, z1 = z[0], z[-1]
    w = t * (1 - t)
    mask = w > 1e-12
    q = (z[mask] - z0 - (z1 - z0) * t[mask]) / w[mask]
    deg = min(degree, int(mask.sum()) - 1)
    cheb = np.polynomial.Chebyshev
    qr = cheb.fit(t[mask], q.real, deg, domain=[0, 1], w=w[mask])
    qi = cheb.fit(t[mask], q.imag, deg, domain=[0, 1], w=w[mask])
    P = np.polynomial.Polynomial
    qp = (qr.convert(kind=P, domain=[0, 1], window=[0, 1]).coef
          + 1j * qi.convert(kind=P, domain=[0, 1], window=[0, 1]).coef)
    # z(t) = z0 + (z1 - z0) t + (t - t^2) q(t)
    co = np.zeros(qp.size + 2, dtype=complex)
    co[0] += z0
    co[1] += z1 - z0
    co[1:qp.size + 1] += qp
    co[2:qp.size + 2] -= qp
    curve = polynomial_curve(co, 0.0, 1.0)
    resid = float(np.max(np.abs(curve.point(t) - z)))
    return curve, resid


def _project_outer(problem: RingProblem, v: int, z: complex) -> complex:
    """Project ``z`` onto the straight outer edge(s) at vertex ``v``.

    On a curved outer edge the vertex itself is returned.
    """
    best = None
    for e in problem.edges:
        if e.tag != "g2" or v not in (e.a, e.b):
            continue
        za, zb = problem.vertices[e.a], problem.vertices[e.b]
        if e.curve is not None:
            # a curved edge keeps its parametrization, so the vertex cannot slide
            return complex(problem.vertices[v])
        d = zb - za
        line_pt = za + ((z - za) * np.conj(d)).real / abs(d) ** 2 * d
        if best is None or abs(line_pt - z) < abs(best - z):
            best = line_pt
    if best is None:
        raise GeometryError("cut endpoint is not on an outer edge")
    return complex(best)


def attach_cut(problem: RingProblem, cut: CutCurve) -> RingProblem:
    """Replace the stored cut (z1 -> z2 and its twin copy) by the curve ``cut``.

    The inner endpoint must coincide with z1; z2/z3 slide along their
    straight outer edges (a curved outer edge pins them); intermediate cut
    vertices are moved onto the new curve at their old chord fractions.
    """
    z1, z2, z3, z4 = problem.corners
    chain, node = [z1], z1
    while node != z2:
        nxt = [e for e in problem.edges if e.tag == "g1" and node in (e.a, e.b)
               and (e.b if e.a == node else e.a) not in chain]
        if len(nxt) != 1:
            raise GeometryError("cut is not a simple chain of g1 edges")
        e = nxt[0]
        node = e.b if e.a == node else e.a
        chain.append(node)
    diag = problem.bbox_diagonal()
    if abs(cut.start - problem.vertices[z1]) > 1e-10 * diag:
        raise GeometryError("cut does not start at the inner cut vertex")
    end = _project_outer(problem, z2, cut.end)
    if abs(end - cut.end) > 1e-6 * diag:
        raise GeometryError("cut does not end on the outer edge at the cut vertex")
    pts = np.array(cut.points, dtype=complex)
    pts[0], pts[-1] = problem.vertices[z1], end
    curve, resid = _fit_cut(CutCurve(pts, pts[0], end))
    old = problem.vertices[chain]
    frac = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(old)))])
    frac /= frac[-1]
    twin = dict(problem.twins)
    verts = problem.vertices.copy()
    ci = len(problem.curves)
    for v, s in zip(chain, frac):
        zz = complex(curve.point(float(s))) if 0 < s < 1 else (verts[z1] if s == 0 else end)
        verts[v] = zz
        verts[twin[v]] = zz
    edges = []
    pos = {v: s for v, s in zip(chain, frac)}
    tpos = {twin[v]: s for v, s in zip(chain, frac)}
    for e in problem.edges:
        if e.tag == "g1":
            edges.append(EdgeSpec(e.a, e.b, ci, (pos[e.a], pos[e.b]), "g1"))
        elif e.tag == "g3":
            edges.append(EdgeSpec(e.a, e.b, ci, (tpos[e.a], tpos[e.b]), "g3"))
        else:
            edges.append(e)
    meta = dict(problem.meta, cut_fit_residual=resid)
    return dataclasses.replace(problem, vertices=verts, edges=tuple(edges),
                               curves=problem.curves + (curve,), cut_exact=True, meta=meta)


def build_ring_map(problem: RingProblem, p: int = 8, levels: int | None = None,
                   ratio: float = DEFAULT_RATIO, cut: CutCurve | str | None = None) -> ConformalMap:
    """Map a ring domain onto the annulus e^{-M(R)} < |w| < 1.

    ``cut`` may be a traced :class:`CutCurve`, ``"auto"`` (trace a gradient
    line from the stored inner cut vertex) or ``None``.  With ``None`` the
    stored cut is used when it is exact and traced otherwise.
    """
    if not isinstance(problem, RingProblem):
        raise TypeError("build_ring_map needs a RingProblem")
    levels = p if levels is None else levels
    u, cap, mod = solve_ring(problem, p, levels, ratio)
    if cut is None and not problem.cut_exact:
        cut = "auto"
    traced = None
    if isinstance(cut, str):
        if cut != "auto":
            raise ValueError("cut must be a CutCurve, 'auto' or None")
        cut = steepest_descent_cut(u, complex(problem.vertices[problem.corners[0]]))
    if cut is not None:
        traced = cut
        problem = attach_cut(problem, cut)
    mesh, u1, u2, h, hc, meta = _solve_quadrilateral(problem, p, levels, ratio)
    meta.update(capacity=cap, ring_modulus=mod)
    if traced is not None:
        meta["cut"] = traced.to_json()["points"]
        meta["cut_fit_residual"] = problem.meta.get("cut_fit_residual")
    return ConformalMap(mesh, p, u1, u2, h, hc, "annulus", 2 * math.pi / h, meta)
