"""Curved quadrilateral meshes with geometric refinement toward corners.

Element nodes are stored counter-clockwise.  Local side k of an element is
parameterized in the fixed reference direction used by :mod:`conjmap.basis`:

    side 0: node 0 -> node 1     side 1: node 1 -> node 2
    side 2: node 3 -> node 2     side 3: node 0 -> node 3

Every global edge is oriented from its lower to its higher node id; an
element whose side runs the other way gets the orientation flag -1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .geometry import Curve, GeometryError, Problem, RingProblem

SIDE_NODES = ((0, 1), (1, 2), (3, 2), (0, 3))
REF_CORNERS = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])
DEFAULT_RATIO = 0.15


class MeshError(GeometryError):
    """Non-conforming decomposition or invalid element geometry."""


@dataclass
class EdgeGeom:
    """Curve reference for an edge; ``t`` maps node id -> curve parameter."""

    curve: int | None = None
    t: dict = field(default_factory=dict)
    tag: str | None = None


@dataclass
class Mesh:
    nodes: np.ndarray                  # complex, (nn,)
    elements: np.ndarray               # int, (ne, 4), CCW
    edge_geom: dict                    # (lo, hi) -> EdgeGeom, curved or tagged edges only
    curves: tuple
    meta: dict = field(default_factory=dict)
    edges: np.ndarray = field(init=False)        # (nedge, 2) lo < hi
    elem_edges: np.ndarray = field(init=False)   # (ne, 4) global edge ids per side
    elem_signs: np.ndarray = field(init=False)   # (ne, 4) +-1

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=complex)
        self.elements = np.asarray(self.elements, dtype=np.int64).reshape(-1, 4)
        orient_edges(self)

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def edge_key(self, e: int) -> tuple:
        return int(self.edges[e, 0]), int(self.edges[e, 1])

    def edge_tag(self, e: int) -> str | None:
        g = self.edge_geom.get(self.edge_key(e))
        return None if g is None else g.tag

    def edge_counts(self) -> np.ndarray:
        return np.bincount(self.elem_edges.ravel(), minlength=self.n_edges)

    def boundary_edge_ids(self) -> np.ndarray:
        return np.flatnonzero(self.edge_counts() == 1)

    # -- geometry ----------------------------------------------------------
    def side_curve(self, el: int, side: int, s):
        """Point and d/ds along local side ``side`` at s in [-1, 1]."""
        s = np.asarray(s, dtype=float)
        a, b = (self.elements[el, k] for k in SIDE_NODES[side])
        key = (min(a, b), max(a, b))
        g = self.edge_geom.get(key)
        f = 0.5 * (s + 1.0)
        if g is None or g.curve is None:
            za, zb = self.nodes[a], self.nodes[b]
            return za + f * (zb - za), 0.5 * (zb - za) * np.ones_like(s)
        ta, tb = g.t[a], g.t[b]
        c = self.curves[g.curve]
        t = ta + f * (tb - ta)
        return c.point(t), c.derivative(t) * 0.5 * (tb - ta)

    def is_curved(self, el: int) -> bool:
        for side in range(4):
            a, b = (self.elements[el, k] for k in SIDE_NODES[side])
            g = self.edge_geom.get((min(a, b), max(a, b)))
            if g is not None and g.curve is not None:
                return True
        return False

    def element_map(self, el: int, xi, eta):
        """Physical point(s) and Jacobian(s) of element ``el``.

        Bilinear for straight elements, transfinite (Gordon-Hall) blending
        of the edge curves otherwise.  Returns ``(z, J)`` with ``J[..., i, j]
        = d x_i / d xi_j``.
        """
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        X = self.nodes[self.elements[el]]
        N = 0.25 * np.array([(1 - xi) * (1 - eta), (1 + xi) * (1 - eta),
                             (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)])
        dNx = 0.25 * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
        dNe = 0.25 * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
        z = np.tensordot(X, N, axes=(0, 0))
        zx = np.tensordot(X, dNx, axes=(0, 0))
        ze = np.tensordot(X, dNe, axes=(0, 0))
        if self.is_curved(el):
            g0, d0 = self.side_curve(el, 0, xi)
            g1, d1 = self.side_curve(el, 1, eta)
            g2, d2 = self.side_curve(el, 2, xi)
            g3, d3 = self.side_curve(el, 3, eta)
            bil, bx, be = z, zx, ze
            z = (0.5 * (1 - eta) * g0 + 0.5 * (1 + eta) * g2
                 + 0.5 * (1 - xi) * g3 + 0.5 * (1 + xi) * g1 - bil)
            zx = 0.5 * (1 - eta) * d0 + 0.5 * (1 + eta) * d2 - 0.5 * g3 + 0.5 * g1 - bx
            ze = -0.5 * g0 + 0.5 * g2 + 0.5 * (1 - xi) * d3 + 0.5 * (1 + xi) * d1 - be
        J = np.empty(np.shape(z) + (2, 2))
        J[..., 0, 0], J[..., 0, 1] = np.real(zx), np.real(ze)
        J[..., 1, 0], J[..., 1, 1] = np.imag(zx), np.imag(ze)
        return z, J

    def check_jacobians(self, nq: int):
        """Raise :class:`MeshError` if any element has det J <= 0 at a Gauss point."""
        from .basis import gauss_rule
        X, Y, _ = gauss_rule(nq)
        for el in range(self.n_elements):
            _, J = self.element_map(el, X, Y)
            det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            if not np.all(det > 0):
                raise MeshError(f"element {el} has non-positive Jacobian "
                                f"(min det {det.min():.3g}) at nodes {self.elements[el].tolist()}")

    def bounding_boxes(self, n: int = 9) -> np.ndarray:
        """(ne, 4) boxes [xmin, ymin, xmax, ymax] from sampled element boundaries."""
        s = np.linspace(-1, 1, n)
        out = np.empty((self.n_elements, 4))
        for el in range(self.n_elements):
            pts = np.concatenate([self.side_curve(el, k, s)[0] for k in range(4)])
            out[el] = pts.real.min(), pts.imag.min(), pts.real.max(), pts.imag.max()
        return out

    def area(self, nq: int = 8) -> float:
        from .basis import gauss_rule
        X, Y, W = gauss_rule(nq)
        tot = 0.0
        for el in range(self.n_elements):
            _, J = self.element_map(el, X, Y)
            tot += float(W @ (J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]))
        return tot

    # -- serialization -------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "nodes": [[float(z.real), float(z.imag)] for z in self.nodes],
            "elements": self.elements.tolist(),
            "edges": [{"v": [int(a), int(b)], "curve": g.curve,
                       "t": None if g.curve is None else [g.t[a], g.t[b]], "tag": g.tag}
                      for (a, b), g in sorted(self.edge_geom.items())],
            "curves": [c.to_json() for c in self.curves],
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Mesh":
        geom = {}
        for e in d["edges"]:
            a, b = e["v"]
            t = {} if e["curve"] is None else {a: e["t"][0], b: e["t"][1]}
            geom[(a, b)] = EdgeGeom(e["curve"], t, e["tag"])
        return cls(np.array([complex(x, y) for x, y in d["nodes"]]),
                   np.array(d["elements"], dtype=np.int64), geom,
                   tuple(Curve.from_json(c) for c in d["curves"]), dict(d.get("meta", {})))

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def orient_edges(mesh: Mesh) -> Mesh:
    """Number the global edges and record per-element orientation flags.

    Edge direction is lower node id -> higher node id; an element side whose
    fixed local direction disagrees gets flag -1.
    """
    el = mesh.elements
    keys = {}
    elem_edges = np.empty(el.shape, dtype=np.int64)
    signs = np.empty(el.shape, dtype=np.int64)
    for i in range(el.shape[0]):
        for side, (la, lb) in enumerate(SIDE_NODES):
            a, b = int(el[i, la]), int(el[i, lb])
            key = (min(a, b), max(a, b))
            if key not in keys:
                keys[key] = len(keys)
            elem_edges[i, side] = keys[key]
            signs[i, side] = 1 if a < b else -1
    edges = np.array(sorted(keys, key=keys.get), dtype=np.int64).reshape(-1, 2)
    mesh.edges, mesh.elem_edges, mesh.elem_signs = edges, elem_edges, signs
    counts = np.bincount(elem_edges.ravel(), minlength=len(keys))
    if np.any(counts > 2):
        bad = edges[np.flatnonzero(counts > 2)[0]]
        raise MeshError(f"edge {bad.tolist()} is shared by more than two elements")
    return mesh


def _chord_split(curve, tv, to, ratio):
    # parameter at chord distance ratio*|z(to) - z(tv)| from z(tv); robust at zero-speed ends
    zv = complex(curve.point(tv))
    target = ratio * abs(complex(curve.point(to)) - zv)
    return brentq(lambda t: abs(complex(curve.point(t)) - zv) - target, tv, to,
                  xtol=1e-15 * max(1.0, abs(tv)), rtol=4 * np.finfo(float).eps)


class _Builder:
    """Mutable mesh under refinement."""

    def __init__(self, problem: Problem):
        self.curves = problem.curves
        self.nodes = list(problem.vertices)
        self.elements = [list(b) for b in problem.blocks]
        self.geom: dict = {}
        for e in problem.edges:
            t = {} if e.curve is None else {e.a: e.t[0], e.b: e.t[1]}
            self.geom[(min(e.a, e.b), max(e.a, e.b))] = EdgeGeom(e.curve, t, e.tag)
        self.splits: dict = {}

    def split(self, v: int, other: int, ratio: float) -> int:
        """New node on edge (v, other) at ``ratio`` of its length from v."""
        if (v, other) in self.splits:
            return self.splits[(v, other)]
        key = (min(v, other), max(v, other))
        g = self.geom.pop(key, None)
        nid = len(self.nodes)
        if g is None or g.curve is None:
            zv, zo = self.nodes[v], self.nodes[other]
            self.nodes.append(zv + ratio * (zo - zv))
            if g is not None:  # tagged straight edge
                self.geom[(min(v, nid), max(v, nid))] = EdgeGeom(None, {}, g.tag)
                self.geom[(min(nid, other), max(nid, other))] = EdgeGeom(None, {}, g.tag)
        else:
            tv, to = g.t[v], g.t[other]
            tn = _chord_split(self.curves[g.curve], tv, to, ratio)
            self.nodes.append(complex(self.curves[g.curve].point(tn)))
            self.geom[(min(v, nid), max(v, nid))] = EdgeGeom(g.curve, {v: tv, nid: tn}, g.tag)
            self.geom[(min(nid, other), max(nid, other))] = EdgeGeom(g.curve, {nid: tn, other: to}, g.tag)
        self.splits[(v, other)] = nid
        return nid

    def snapshot(self, meta=None) -> Mesh:
        return Mesh(np.array(self.nodes, dtype=complex), np.array(self.elements, dtype=np.int64),
                    dict(self.geom), self.curves, dict(meta or {}))


def refine_geometric(problem: Problem, levels: int, ratio: float = DEFAULT_RATIO,
                     corners=None) -> Mesh:
    """Mesh ``problem`` with ``levels`` geometric layers toward each marked corner.

    Each level replaces the element touching the corner by three: a corner
    quad whose two corner edges are ``ratio`` times as long, and two
    elements covering the rest.  New interior edges are straight; pieces of
    curved block edges keep their curve.
    """
    if levels < 0:
        raise MeshError("levels must be >= 0")
    if not 0.0 < ratio < 1.0:
        raise MeshError("ratio must lie in (0, 1)")
    b = _Builder(problem)
    marked = list(problem.refine if corners is None else corners)
    if isinstance(problem, RingProblem):  # both copies of a cut vertex, or the weld breaks
        pair = {a: b for a, b in problem.twins}
        pair.update({b: a for a, b in problem.twins})
        marked += [pair[v] for v in list(marked) if v in pair and pair[v] not in marked]
    tmp = b.snapshot()  # validates block conformity
    for v in marked:
        for _ in range(levels):
            hits = [i for i, el in enumerate(b.elements) if v in el]
            if not hits:
                raise MeshError(f"refinement corner {v} is not a mesh vertex")
            new_elements = []
            tmp = b.snapshot()
            for i, el in enumerate(b.elements):
                if i not in hits:
                    new_elements.append(el)
                    continue
                k = el.index(v)
                _, A, C, D = (el[(k + j) % 4] for j in range(4))
                a2 = b.split(v, A, ratio)
                d2 = b.split(v, D, ratio)
                r = REF_CORNERS[k] * (1.0 - 2.0 * ratio)
                zc, _ = tmp.element_map(i, r[0], r[1])
                c2 = len(b.nodes)
                b.nodes.append(complex(zc))
                new_elements += [[v, a2, c2, d2], [a2, A, C, c2], [d2, c2, C, D]]
            b.elements = new_elements
    del tmp
    meta = {"levels": int(levels), "ratio": float(ratio), "corners": [int(c) for c in marked],
            "problem": problem.name, "blocks": len(problem.blocks)}
    return b.snapshot(meta)


def weld(mesh: Mesh, tags=("g1", "g3")) -> Mesh:
    """Close a cut: merge coincident nodes on edges tagged ``tags``.

    The cut edges become interior edges.  Node ids are compacted keeping
    their relative order, so edge orientation stays a function of ids.
    """
    cut_nodes = {t: set() for t in tags}
    for (a, b), g in mesh.edge_geom.items():
        if g.tag in cut_nodes:
            cut_nodes[g.tag].update((a, b))
    scale = float(np.abs(mesh.nodes).max()) or 1.0
    side_a = np.array(sorted(cut_nodes[tags[0]]), dtype=np.int64)
    remap = np.arange(mesh.n_nodes)
    for n in sorted(cut_nodes[tags[1]]):
        d = np.abs(mesh.nodes[side_a] - mesh.nodes[n])
        j = int(np.argmin(d)) if d.size else -1
        if j < 0 or d[j] > 1e-10 * scale:
            raise MeshError(f"cut node {n} has no partner on the other side")
        remap[n] = side_a[j]
    keep = np.unique(remap)
    compact = np.full(mesh.n_nodes, -1)
    compact[keep] = np.arange(keep.size)
    final = compact[remap]
    geom = {}
    for (a, b), g in mesh.edge_geom.items():
        fa, fb = int(final[a]), int(final[b])
        key = (min(fa, fb), max(fa, fb))
        tag = None if g.tag in tags else g.tag
        t = {int(final[k]): v for k, v in g.t.items()}
        if g.curve is None and tag is None:
            continue
        geom[key] = EdgeGeom(g.curve, t, tag)
    meta = dict(mesh.meta, welded=True)
    return Mesh(mesh.nodes[keep], final[mesh.elements], geom, mesh.curves, meta)


def build_mesh(problem: Problem, levels: int, ratio: float = DEFAULT_RATIO,
               welded: bool = False) -> Mesh:
    """Refined mesh of ``problem``; for rings ``welded=True`` closes the cut."""
    m = refine_geometric(problem, levels, ratio)
    if welded:
        if not isinstance(problem, RingProblem):
            raise MeshError("only ring problems can be welded")
        m = weld(m)
    return m


def load_mesh(path) -> Mesh:
    with open(path) as fh:
        return Mesh.from_json(json.load(fh))
