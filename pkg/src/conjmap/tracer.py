"""Point location, field evaluation and contour tracing on hp meshes.

``locate`` finds the element and reference coordinates of a physical point
(bounding-box grid, then Newton inversion of the element map).  Contours of
one potential are traced by predictor steps along the gradient of the other
potential, each followed by a 1-D corrector along the traced field's
gradient.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .basis import shape_functions
from .mesh import REF_CORNERS, SIDE_NODES, Mesh

DELTA = 1e-9        # reference-square slack
RES_TOL = 1e-12     # Newton residual, relative to the mesh diameter
MAX_CORRECTOR = 50


class OutsideError(ValueError):
    """The point lies in no element."""


class _Index:
    """Uniform grid of element bounding boxes."""

    def __init__(self, mesh: Mesh):
        boxes = mesh.bounding_boxes(9)
        pad = 0.02 * np.maximum(boxes[:, 2] - boxes[:, 0], boxes[:, 3] - boxes[:, 1])
        boxes[:, :2] -= pad[:, None]
        boxes[:, 2:] += pad[:, None]
        self.boxes = boxes
        self.lo = boxes[:, :2].min(axis=0)
        hi = boxes[:, 2:].max(axis=0)
        self.diam = float(np.hypot(*(hi - self.lo)))
        self.n = max(1, int(math.sqrt(mesh.n_elements)))
        self.cell = np.maximum((hi - self.lo) / self.n, 1e-300)
        self.buckets: dict = {}
        i0 = self._cell(boxes[:, :2])
        i1 = self._cell(boxes[:, 2:])
        for el in range(len(boxes)):
            for i in range(i0[el, 0], i1[el, 0] + 1):
                for j in range(i0[el, 1], i1[el, 1] + 1):
                    self.buckets.setdefault((i, j), []).append(el)
        # small elements first: a corner-refined point is usually in the smallest box
        area = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
        for key, els in self.buckets.items():
            els.sort(key=lambda e: area[e])

    def _cell(self, xy):
        return np.clip(((xy - self.lo) / self.cell).astype(int), 0, self.n - 1)

    def candidates(self, z: complex):
        x, y = z.real, z.imag
        i, j = self._cell(np.array([[x, y]]))[0]
        b = self.boxes
        return [el for el in self.buckets.get((int(i), int(j)), ())
                if b[el, 0] <= x <= b[el, 2] and b[el, 1] <= y <= b[el, 3]]


def _index(mesh: Mesh) -> _Index:
    idx = getattr(mesh, "_locate_index", None)
    if idx is None:
        idx = _Index(mesh)
        object.__setattr__(mesh, "_locate_index", idx)
    return idx


def _bilinear_guess(X: np.ndarray, z: complex):
    xi = eta = 0.0
    for _ in range(20):
        N = 0.25 * np.array([(1 - xi) * (1 - eta), (1 + xi) * (1 - eta),
                             (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)])
        zx = 0.25 * np.dot(X, [-(1 - eta), 1 - eta, 1 + eta, -(1 + eta)])
        ze = 0.25 * np.dot(X, [-(1 - xi), -(1 + xi), 1 + xi, 1 - xi])
        r = np.dot(X, N) - z
        det = zx.real * ze.imag - zx.imag * ze.real
        if det == 0:
            break
        dxi = (r.real * ze.imag - r.imag * ze.real) / det
        deta = (zx.real * r.imag - zx.imag * r.real) / det
        xi, eta = float(np.clip(xi - dxi, -2, 2)), float(np.clip(eta - deta, -2, 2))
        if abs(dxi) + abs(deta) < 1e-14:
            break
    return xi, eta


def invert_element(mesh: Mesh, el: int, z: complex, tol: float):
    """Reference coordinates of ``z`` in element ``el`` or ``None``."""
    X = mesh.nodes[mesh.elements[el]]
    xi, eta = _bilinear_guess(X, z)
    for _ in range(40):
        zz, J = mesh.element_map(el, xi, eta)
        r = complex(zz) - z
        if abs(r) <= tol:
            break
        J = J.reshape(2, 2)
        try:
            d = np.linalg.solve(J, [r.real, r.imag])
        except np.linalg.LinAlgError:
            return None
        xi, eta = float(np.clip(xi - d[0], -1.5, 1.5)), float(np.clip(eta - d[1], -1.5, 1.5))
    else:
        return None
    xc, ec = float(np.clip(xi, -1, 1)), float(np.clip(eta, -1, 1))
    if abs(xi) > 1 + DELTA or abs(eta) > 1 + DELTA:
        # tiny corner elements: roundoff in z is large in reference units
        if abs(complex(mesh.element_map(el, xc, ec)[0]) - z) > tol:
            return None
    return xc, ec


def locate(mesh: Mesh, z, hint: int | None = None):
    """(element, (xi, eta)) of the point ``z``; raises :class:`OutsideError`."""
    z = complex(z)
    idx = _index(mesh)
    tol = RES_TOL * idx.diam
    cands = idx.candidates(z)
    if hint is not None and hint in cands:
        cands.remove(hint)
        cands.insert(0, hint)
    for el in cands:
        loc = invert_element(mesh, el, z, tol)
        if loc is not None:
            return el, loc
    raise OutsideError(f"point {z} is outside the mesh")


def _value_at(f, el: int, xi: float, eta: float) -> float:
    V, _ = shape_functions(f.p, xi, eta)
    return float(V[0] @ f.element_coeffs(el))


def _field_at(f, el: int, xi: float, eta: float):
    V, G = shape_functions(f.p, xi, eta)
    c = f.element_coeffs(el)
    val = float(V[0] @ c)
    gref = G[0].T @ c
    _, J = f.mesh.element_map(el, xi, eta)
    try:
        grad = np.linalg.solve(J.reshape(2, 2).T, gref)
    except np.linalg.LinAlgError:
        # degenerate map at a cusp: the gradient is undefined there
        return val, complex(np.nan, np.nan)
    return val, complex(grad[0], grad[1])


def eval_field(f, z, hint: int | None = None):
    """Value and gradient (as ``gx + i gy``) of field ``f`` at point ``z``."""
    el, (xi, eta) = locate(f.mesh, z, hint)
    return _field_at(f, el, xi, eta)


class Evaluator:
    """Evaluate one or more fields on a mesh, reusing the last element found."""

    def __init__(self, *fields):
        self.fields = fields
        self.mesh = fields[0].mesh
        self.last = None
        self.count = 0

    def __call__(self, z):
        el, (xi, eta) = locate(self.mesh, z, self.last)
        self.last = el
        self.count += 1
        return [_field_at(f, el, xi, eta) for f in self.fields]

    def inside(self, z) -> bool:
        try:
            locate(self.mesh, z, self.last)
            return True
        except OutsideError:
            return False


# -- boundary chains -----------------------------------------------------------

def boundary_chain(mesh: Mesh, tag: str, start=None):
    """Ordered (element, side, reversed) triples along the edges tagged ``tag``.

    The chain starts at the node nearest to ``start`` (a point) among the
    chain ends.
    """
    owner = {}
    for el, nodes in enumerate(mesh.elements):
        for k, (i, j) in enumerate(SIDE_NODES):
            a, b = int(nodes[i]), int(nodes[j])
            key = (min(a, b), max(a, b))
            g = mesh.edge_geom.get(key)
            if g is not None and g.tag == tag:
                owner[key] = (el, k, a, b)
    if not owner:
        raise ValueError(f"no boundary edges tagged {tag!r}")
    adj: dict = {}
    for key in owner:
        for n in key:
            adj.setdefault(n, []).append(key)
    ends = [n for n, ks in adj.items() if len(ks) == 1]
    if not ends:
        ends = list(adj)
    if start is None:
        node = min(ends)
    else:
        node = min(ends, key=lambda n: abs(mesh.nodes[n] - start))
    chain, used = [], set()
    while True:
        nxt = [k for k in adj[node] if k not in used]
        if not nxt:
            break
        key = nxt[0]
        used.add(key)
        el, k, a, b = owner[key]
        chain.append((el, k, a != node))
        node = b if a == node else a
    return chain


def _side_point(side: int, s: float, rev: bool):
    """Reference coords at fraction ``s`` along a side; side runs SIDE_NODES order."""
    if rev:
        s = 1 - s
    i, j = SIDE_NODES[side]
    p = REF_CORNERS[i] + s * (REF_CORNERS[j] - REF_CORNERS[i])
    return float(p[0]), float(p[1])


def chain_crossing(f, chain, c: float, tol: float = 1e-14):
    """(element, xi, eta) on the chain where the field ``f`` equals ``c``, or None."""
    def val(el, side, rev, s):
        xi, eta = _side_point(side, s, rev)
        return _field_at(f, el, xi, eta)[0] - c

    for el, side, rev in chain:
        fa, fb = val(el, side, rev, 0.0), val(el, side, rev, 1.0)
        if fa == 0:
            return (el,) + _side_point(side, 0.0, rev)
        if fa * fb > 0:
            continue
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = val(el, side, rev, mid)
            if (fm > 0) == (fa > 0):
                lo = mid
            else:
                hi = mid
            if hi - lo < tol:
                break
        return (el,) + _side_point(side, 0.5 * (lo + hi), rev)
    return None


# -- contours ------------------------------------------------------------------

@dataclass
class ContourPolyline:
    which: str
    level: float
    points: np.ndarray
    status: str
    evaluations: int = 0

    def to_rows(self):
        return [(self.which, self.level, float(z.real), float(z.imag)) for z in self.points]


@dataclass
class _Plan:
    traced: object       # field whose level set is followed
    guide: object        # field whose gradient gives the step direction
    start_tag: str
    end_value: float     # value of the guide field at the far boundary
    closed: bool


def _plan(cmap, which: str) -> _Plan:
    if which == "u1":
        return _Plan(cmap.u1, cmap.u2, "g1", 0.0, cmap.kind == "annulus")
    if which == "u2":
        return _Plan(cmap.u2, cmap.u1, "g4", 0.0, False)
    raise ValueError("which must be 'u1' or 'u2'")


def _corner_points(cmap):
    corners = cmap.meta.get("corners")
    return [] if corners is None else [complex(*c) for c in corners]


def _correct(ev, slot, z, c, eps, diam):
    """Move ``z`` along the traced gradient until the value is within eps of c."""
    val, grad = ev(z)[slot]
    if abs(val - c) <= eps:
        return z, val
    g = grad / abs(grad) if abs(grad) > 0 else 1.0
    s, lo, hi = 0.0, None, None
    for _ in range(MAX_CORRECTOR):
        r = val - c
        if abs(r) <= eps:
            return z + s * g, val
        if r > 0:
            hi = s
        else:
            lo = s
        slope = (grad * np.conj(g)).real
        step = -r / slope if slope > 0 else None
        cand = None if step is None else s + step
        if cand is None or (lo is not None and cand <= lo) or (hi is not None and cand >= hi):
            if lo is None or hi is None:
                cand = s + (-1 if r > 0 else 1) * 1e-3 * diam
            else:
                cand = 0.5 * (lo + hi)
        s = cand
        try:
            val, grad = ev(z + s * g)[slot]
        except ValueError:
            val, grad = (c + 1.0, 0j) if r > 0 else (c - 1.0, 0j)
            continue
    return None, None


def trace_contour(cmap, which: str, c: float, sigma: float | None = None,
                  eps: float = 1e-6, max_points: int | None = None) -> ContourPolyline:
    """Trace the level set {which = c} of a conformal map across the domain."""
    mesh = cmap.mesh
    diam = _index(mesh).diam
    sigma = 0.02 * diam if sigma is None else float(sigma)
    if sigma <= 0 or eps <= 0:
        raise ValueError("sigma and eps must be positive")
    plan = _plan(cmap, which)
    max_points = max_points or int(50 * diam / sigma) + 1000
    chain = boundary_chain(mesh, plan.start_tag, _chain_start(cmap, plan.start_tag))
    start = chain_crossing(plan.traced, chain, c)
    if start is None:
        return ContourPolyline(which, c, np.empty(0, complex), "stalled")
    el, xi, eta = start
    z0 = complex(mesh.element_map(el, xi, eta)[0])
    if any(abs(z0 - q) < 1e-8 * diam for q in _corner_points(cmap)):
        # nudge away from a corner singularity
        c = c + (eps if c < 0.5 else -eps)
        start = chain_crossing(plan.traced, chain, c)
        if start is not None:
            el, xi, eta = start
            z0 = complex(mesh.element_map(el, xi, eta)[0])
    ev = Evaluator(plan.traced, plan.guide)
    ev.last = el  # on a cut both sides contain z0; start on the traced side
    pts = [z0]
    status = "stalled"
    z = z0
    tol_end = 1e-10
    while len(pts) < max_points:
        try:
            (_, _), (gv, ggrad) = ev(z)
        except ValueError:
            break
        if abs(ggrad) < 1e-12:
            break
        d = -ggrad / abs(ggrad)
        remaining = (gv - plan.end_value) / abs(ggrad)
        final = remaining <= sigma
        step = min(sigma, remaining) if final else sigma
        znew = None
        for _ in range(60):
            pred = z + step * d
            znew, _ = _correct(ev, 0, pred, c, eps, diam) if ev.inside(pred) else (None, None)
            if znew is not None:
                break
            step *= 0.5
            final = False
        if znew is None:
            # outside within a step: the far boundary is closer than predicted
            if remaining < 1e-6 * diam or step < 1e-14 * diam:
                status = "closed-loop" if plan.closed else "reached-opposite-boundary"
            break
        if plan.closed and ev(znew)[1][0] > gv + 0.5:
            # stepped across the cut: the loop is complete
            pts.append(z0)
            status = "closed-loop"
            break
        pts.append(znew)
        z = znew
        if final:
            gv_new = ev(z)[1][0]
            if abs(gv_new - plan.end_value) <= tol_end or remaining < 1e-12 * diam:
                status = "closed-loop" if plan.closed else "reached-opposite-boundary"
                break
    return ContourPolyline(which, c, np.array(pts), status, ev.count)


def _chain_start(cmap, tag):
    corners = _corner_points(cmap)
    if len(corners) != 4:
        return None
    # g1 runs z1 -> z2, g4 runs z4 -> z1
    return corners[0] if tag == "g1" else corners[3]


def canonical_grid(cmap, n_u: int = 9, n_v: int = 9, sigma: float | None = None,
                   eps: float = 1e-6, levels_u=None, levels_v=None) -> list:
    """Contours of u1 and u2 at uniform levels (or explicit level lists).

    Levels of ``u2`` are given as fractions in (0, 1), i.e. of Im f / h.
    """
    lu = sorted(levels_u) if levels_u is not None else [k / (n_u + 1) for k in range(1, n_u + 1)]
    lv = sorted(levels_v) if levels_v is not None else [k / (n_v + 1) for k in range(1, n_v + 1)]
    out = [trace_contour(cmap, "u1", c, sigma, eps) for c in lu]
    out += [trace_contour(cmap, "u2", c, sigma, eps) for c in lv]
    return out


# -- output ---------------------------------------------------------------------

def write_csv(contours, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["which", "level", "x", "y"])
        for cp in contours:
            for row in cp.to_rows():
                w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])


def boundary_polylines(mesh: Mesh, n: int = 16):
    """Sampled boundary edges of the mesh, one polyline per edge."""
    s = np.linspace(-1, 1, n)
    counts = {}
    for el, nodes in enumerate(mesh.elements):
        for k, (i, j) in enumerate(SIDE_NODES):
            key = (min(nodes[i], nodes[j]), max(nodes[i], nodes[j]))
            counts.setdefault(key, []).append((el, k))
    lines = []
    for key, uses in sorted(counts.items()):
        if len(uses) == 1:
            el, k = uses[0]
            lines.append(mesh.side_curve(el, k, s)[0])
    return lines


def write_svg(mesh: Mesh, contours, path, size: int = 600):
    """Layered SVG: boundary, u1 contours (solid), u2 contours (dashed)."""
    lines = boundary_polylines(mesh)
    allz = np.concatenate(lines + [cp.points for cp in contours if len(cp.points)])
    x0, x1 = allz.real.min(), allz.real.max()
    y0, y1 = allz.imag.min(), allz.imag.max()
    scale = (size - 20) / max(x1 - x0, y1 - y0, 1e-300)

    def pts(z):
        return " ".join(f"{10 + (p.real - x0) * scale:.4f},{10 + (y1 - p.imag) * scale:.4f}" for p in z)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
           '<g id="boundary" stroke="black" stroke-width="1.5" fill="none">']
    out += [f'<polyline points="{pts(z)}"/>' for z in lines]
    out.append("</g>")
    for which, style in (("u1", ""), ("u2", ' stroke-dasharray="4,2"')):
        out.append(f'<g id="{which}" stroke="{"#1f4e9c" if which == "u1" else "#a33"}" '
                   f'stroke-width="0.8" fill="none"{style}>')
        out += [f'<polyline data-level="{cp.level!r}" points="{pts(cp.points)}"/>'
                for cp in contours if cp.which == which and len(cp.points) > 1]
        out.append("</g>")
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
