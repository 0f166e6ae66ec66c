"""Example domains with hand-built block decompositions.

Every entry returns a validated :class:`QuadrilateralProblem` or
:class:`RingProblem`.  Ring entries are stored already cut along a straight
segment: a symmetry axis when the domain has one (``cut_exact=True``),
otherwise a provisional segment that :func:`conjmap.conjugate.build_ring_map`
replaces by a traced gradient line.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .geometry import (BlockBuilder, GeometryError, circular_arc, polynomial_curve,
                       trigonometric_curve)

GALLERY = ("unit-disk", "flower", "circular-quadrilateral", "asteroid-cusp",
           "disk-in-pentagon", "cross-in-square", "circle-in-square", "flower-in-square",
           "circle-in-L", "droplet-in-square", "rectangle", "annulus")

_DEFAULTS = {
    "unit-disk": {"angles": None},
    "flower": {"n": 6, "t": 0.1},
    "circular-quadrilateral": {"a": math.pi / 12, "b": 17 * math.pi / 12, "c": 3 * math.pi / 2},
    "asteroid-cusp": {},
    "disk-in-pentagon": {"r": 0.4},
    "cross-in-square": {"a": 0.5, "b": 1.2, "c": 1.5},
    "circle-in-square": {"r": 1.0, "c": 2.5},  # r/c = 0.4 reproduces the reference modulus
    "flower-in-square": {"n": 6, "t": 0.1, "c": 1.5},
    "circle-in-L": {"a": 3.0, "b": 1.0, "c": 2.0, "d": 1.0, "x0": 1.6, "y0": 0.4, "r": 0.2},
    "droplet-in-square": {"c": 1.5},
    "rectangle": {"h": 1.0},
    "annulus": {"r_in": math.exp(-1.0), "r_out": 1.0},
}


def gallery(name: str, params: dict | None = None):
    """Build the named example domain; ``params`` override the defaults."""
    if name not in _DEFAULTS:
        raise GeometryError(f"unknown gallery domain {name!r}; choose from {', '.join(GALLERY)}")
    opts = dict(_DEFAULTS[name])
    for key, val in (params or {}).items():
        if key not in opts:
            raise GeometryError(f"{name}: unknown parameter {key!r}")
        opts[key] = val
    fn = _BUILDERS[name]
    prob = fn(**opts)
    return prob


def _arc_counts(spans, max_step, multiple=4, minimum=2):
    """Edges per arc so that each edge spans <= max_step and the total is a multiple.

    At least two edges per arc keep every boundary block on a single corner.
    """
    n = [max(minimum, math.ceil(s / max_step - 1e-9)) for s in spans]
    while sum(n) % multiple:
        j = max(range(len(spans)), key=lambda i: spans[i] / n[i])
        n[j] += 1
    return n


def _coons_grid(boundary, m):
    """(m+1)x(m+1) grid whose boundary is the CCW point list ``boundary`` (4m points)."""
    bnd = list(boundary)
    bottom = [bnd[i] for i in range(m + 1)]
    right = [bnd[m + j] for j in range(m + 1)]
    top = [bnd[(3 * m - i) % (4 * m)] for i in range(m + 1)]
    left = [bnd[(4 * m - j) % (4 * m)] for j in range(m + 1)]
    G = np.empty((m + 1, m + 1), dtype=complex)
    for i in range(m + 1):
        s = i / m
        for j in range(m + 1):
            t = j / m
            G[i, j] = ((1 - t) * bottom[i] + t * top[i] + (1 - s) * left[j] + s * right[j]
                       - (1 - s) * (1 - t) * bottom[0] - s * (1 - t) * bottom[m]
                       - s * t * top[m] - (1 - s) * t * top[0])
    return G


def _hub_quadrilateral(name, arcs, counts, center=0j, rho=0.5, meta=None, extra_marks=(),
                       round_hub=False, params=None, warp=None):
    """Star-shaped quadrilateral: ring of blocks along the boundary around a Coons grid.

    ``arcs`` are four curves running z1->z2, z2->z3, z3->z4, z4->z1.  Optional
    ``params`` give the breakpoints on each arc (default uniform) and ``warp``
    maps the hub points, which are then built from ``warp``'s preimages of the
    boundary points; ``warp`` must be the inverse of a map ``(warp, unwarp)``.
    """
    b = BlockBuilder()
    if params is None:
        params = [[k / n for k in range(n + 1)] for n in counts]
    counts = [len(t) - 1 for t in params]
    total = sum(counts)
    if total % 4:
        raise GeometryError("hub boundary needs a multiple of four edges")
    m = total // 4
    cids = [b.curve(c) for c in arcs]
    runs = [[b.vertex(c.point(t[k])) for k in range(len(t) - 1)] for c, t in zip(arcs, params)]
    corners = [run[0] for run in runs]
    outer = [v for run in runs for v in run]
    for j, (ci, t) in enumerate(zip(cids, params)):
        nxt = runs[(j + 1) % 4][0]
        n = len(t) - 1
        for k in range(n):
            v1 = runs[j][k + 1] if k + 1 < n else nxt
            b.arc(runs[j][k], v1, ci, t[k], t[k + 1], f"g{j + 1}")
    fwd, back = warp if warp is not None else (lambda z: z, lambda z: z)
    bpts = [back(b.vertices[v]) for v in outer]
    inner_pts = [center + rho * (z - center) for z in bpts]
    if round_hub:  # project onto a circle so a wavy boundary does not fold the grid
        rad = rho * float(np.mean([abs(z - center) for z in bpts]))
        inner_pts = [center + rad * np.exp(1j * np.angle(z - center)) for z in bpts]
    G = fwd(_coons_grid(inner_pts, m))
    gid = np.empty((m + 1, m + 1), dtype=np.int64)
    ring_ids = []
    for idx in range(4 * m):
        if idx <= m:
            i, j = idx, 0
        elif idx <= 2 * m:
            i, j = m, idx - m
        elif idx <= 3 * m:
            i, j = 3 * m - idx, m
        else:
            i, j = 0, 4 * m - idx
        ring_ids.append((i, j))
    for i in range(m + 1):
        for j in range(m + 1):
            gid[i, j] = b.vertex(G[i, j])
    inner = [int(gid[i, j]) for i, j in ring_ids]
    for i in range(m):
        for j in range(m):
            b.block(gid[i, j], gid[i + 1, j], gid[i + 1, j + 1], gid[i, j + 1])
    n = len(outer)
    for k in range(n):
        b.block(inner[k], outer[k], outer[(k + 1) % n], inner[(k + 1) % n])
    b.mark(*corners, *extra_marks)
    return b.quadrilateral(name, corners, meta)


def _coons_quadrilateral(name, arcs, nu, nv, meta=None):
    """Structured nu x nv block grid: transfinite interpolation of the four sides.

    ``arcs`` run z1->z2, z2->z3, z3->z4, z4->z1; sides one and three get ``nu`` edges.
    """
    b = BlockBuilder()
    cids = [b.curve(c) for c in arcs]
    u = np.linspace(0.0, 1.0, nu + 1)
    v = np.linspace(0.0, 1.0, nv + 1)
    bottom, right = arcs[0].point(u), arcs[1].point(v)
    top, left = arcs[2].point(1 - u), arcs[3].point(1 - v)
    z1, z2, z3, z4 = bottom[0], bottom[-1], top[-1], top[0]
    U, V = u[:, None], v[None, :]
    P = ((1 - V) * bottom[:, None] + V * top[:, None] + (1 - U) * left[None, :] + U * right[None, :]
         - (1 - U) * (1 - V) * z1 - U * (1 - V) * z2 - U * V * z3 - (1 - U) * V * z4)
    gid = np.array([[b.vertex(P[i, j]) for j in range(nv + 1)] for i in range(nu + 1)])
    for i in range(nu):
        b.arc(gid[i, 0], gid[i + 1, 0], cids[0], u[i], u[i + 1], "g1")
        b.arc(gid[i + 1, nv], gid[i, nv], cids[2], 1 - u[i + 1], 1 - u[i], "g3")
    for j in range(nv):
        b.arc(gid[nu, j], gid[nu, j + 1], cids[1], v[j], v[j + 1], "g2")
        b.arc(gid[0, j + 1], gid[0, j], cids[3], 1 - v[j + 1], 1 - v[j], "g4")
    for i in range(nu):
        for j in range(nv):
            b.block(gid[i, j], gid[i + 1, j], gid[i + 1, j + 1], gid[i, j + 1])
    corners = [gid[0, 0], gid[nu, 0], gid[nu, nv], gid[0, nv]]
    b.mark(*corners)
    return b.quadrilateral(name, corners, meta)


# -- simply connected ---------------------------------------------------------

def unit_disk(angles=None):
    """Unit disk; corners at ``angles`` (default multiples of pi/2)."""
    th = [0.0, math.pi / 2, math.pi, 1.5 * math.pi] if angles is None else [float(a) for a in angles]
    if len(th) != 4 or any(th[i + 1] <= th[i] for i in range(3)) or th[3] - th[0] >= 2 * math.pi:
        raise GeometryError("unit-disk angles must be four increasing values within one turn")
    ends = th + [th[0] + 2 * math.pi]
    arcs = [circular_arc(0, 1.0, ends[j], ends[j + 1]) for j in range(4)]
    # mesh the symmetric corner set (-a, a, pi - a, pi + a) with the same cross
    # ratio and carry it over by a disk automorphism, which grades the elements
    # towards close corners
    T = np.exp(1j * np.array(th))
    a = brentq(lambda x: _cross_ratio(np.exp(1j * np.array([-x, x, math.pi - x, math.pi + x])))
               - _cross_ratio(T), 1e-12, math.pi / 2 - 1e-12, xtol=1e-15)
    pre = [-a, a, math.pi - a, math.pi + a]
    S = np.exp(1j * np.array(pre))
    fwd = _moebius(S[:3], T[:3])
    back = _moebius(T[:3], S[:3])
    spans = [2 * a, math.pi - 2 * a, 2 * a, math.pi - 2 * a]
    cuts = [list(pre[j] + spans[j] * np.arange(n + 1) / n)
            for j, n in enumerate(_arc_counts(spans, math.radians(30)))]
    params = []
    for j in range(4):
        ang = np.angle(fwd(np.exp(1j * np.array(cuts[j]))))
        t = np.mod(ang - ends[j], 2 * math.pi) / (ends[j + 1] - ends[j])
        t[0], t[-1] = 0.0, 1.0
        params.append(list(t))
    return _hub_quadrilateral("unit-disk", arcs, None, params=params, warp=(fwd, back),
                              meta={"angles": th})


def _cross_ratio(z):
    return ((z[0] - z[2]) * (z[1] - z[3]) / ((z[0] - z[3]) * (z[1] - z[2]))).real


def _moebius(src, dst):
    """Vectorized Moebius map sending the three points ``src`` to ``dst``."""
    def to_01inf(p):  # matrix of z -> cross ratio sending p to (0, 1, inf)
        return np.array([[p[1] - p[2], -p[0] * (p[1] - p[2])],
                         [p[1] - p[0], -p[2] * (p[1] - p[0])]], dtype=complex)
    (a, b), (c, d) = np.linalg.solve(to_01inf(dst), to_01inf(src))

    def f(z):
        z = np.asarray(z, dtype=complex)
        return (a * z + b) / (c * z + d)
    return f


def _flower_curve(n, t, th0, th1, scale=1.0):
    return trigonometric_curve([(1, 0.8 * scale), (n + 1, 0.5 * t * scale),
                                (1 - n, 0.5 * t * scale)], th0, th1)


def flower(n=6, t=0.1):
    """r(theta) = 0.8 + t cos(n theta) with corners at theta = 0, pi/2, pi, 3pi/2."""
    n, t = int(n), float(t)
    if n < 1 or not 0.0 <= t < 0.8 or _flower_loops(n, t):
        raise GeometryError("flower parameters give a non-simple or non-star-shaped curve")
    ends = [j * math.pi / 2 for j in range(5)]
    arcs = [_flower_curve(n, t, ends[j], ends[j + 1]) for j in range(4)]
    step = min(math.radians(30), math.pi / max(n, 1))
    return _hub_quadrilateral("flower", arcs, _arc_counts([math.pi / 2] * 4, step),
                              rho=0.55, meta={"n": n, "t": t}, round_hub=True)


def _flower_loops(n, t):
    th = np.linspace(0, 2 * math.pi, 4000)
    z = (0.8 + t * np.cos(n * th)) * np.exp(1j * th)
    return np.any(np.diff(np.unwrap(np.angle(z))) <= 0)


def orthogonal_arc(alpha, beta):
    """Arc of the circle orthogonal to |z| = 1 through e^{i alpha}, e^{i beta} (inside the disk).

    Traversed from e^{i beta} to e^{i alpha}.
    """
    half = 0.5 * (beta - alpha)
    center = np.exp(1j * (alpha + beta) / 2) / math.cos(half)
    radius = math.tan(half)
    if abs(abs(center) ** 2 - 1 - radius ** 2) > 1e-12 * (1 + radius ** 2):
        raise GeometryError("arc is not orthogonal to the unit circle")
    phi0 = float(np.angle(np.exp(1j * beta) - center))
    sweep = math.pi - (beta - alpha)
    return circular_arc(center, radius, phi0, phi0 + sweep), center, radius


def circular_quadrilateral(a=math.pi / 12, b=17 * math.pi / 12, c=3 * math.pi / 2):
    """Unit disk minus two orthogonal-circle caps over {1, e^{ia}} and {e^{ib}, e^{ic}}.

    Corners z1..z4 = e^{ia}, e^{ib}, e^{ic}, 1.
    """
    a, b_, c_ = float(a), float(b), float(c)
    if not 0.0 < a < b_ < c_ < 2 * math.pi:
        raise GeometryError("need 0 < a < b < c < 2 pi")
    if a >= math.pi or c_ - b_ >= math.pi:
        raise GeometryError("cap arcs must span less than pi")
    g1 = circular_arc(0, 1.0, a, b_)
    g2, _, _ = orthogonal_arc(b_, c_)
    # orthogonal_arc runs from the larger angle; flip so g2 runs e^{ib} -> e^{ic}
    g2 = g2.reversed()
    g3 = circular_arc(0, 1.0, c_, 2 * math.pi)
    g4, _, _ = orthogonal_arc(0.0, a)
    g4 = g4.reversed()
    for arc_, z0, z1 in ((g2, np.exp(1j * b_), np.exp(1j * c_)), (g4, 1.0, np.exp(1j * a))):
        if abs(arc_.point(0.0) - z0) > 1e-12 or abs(arc_.point(1.0) - z1) > 1e-12:
            raise GeometryError("orthogonal arc endpoints do not match")
        if abs(arc_.point(0.5)) >= 1.0:
            raise GeometryError("orthogonal arc leaves the unit disk")
    return _coons_quadrilateral("circular-quadrilateral", [g1, g2, g3, g4], 8, 4,
                                meta={"a": a, "b": b_, "c": c_})


def asteroid_curve():
    """-1 + cos^3 t + i sin^3 t for t in [-pi/2, pi/2] (cusp at the origin for t = 0)."""
    return trigonometric_curve([(0, -1.0), (1, 0.75), (-3, 0.25)], -math.pi / 2, math.pi / 2)


def asteroid_cusp():
    """Square |x|, |y| < 1 whose left side is replaced by an astroid arc."""
    b = BlockBuilder()
    ast = b.curve(asteroid_curve())
    up = {}

    def pts(sign):
        return {"O": 0j, "R": 1 + 0j, "R1": complex(1, 0.5 * sign), "B": complex(1, sign),
                "M1": complex(0, 0.5 * sign), "T": complex(0, sign), "U": complex(-0.5, sign),
                "C": complex(-1, sign), "G": complex(-0.4, 0.6 * sign),
                "P": complex(asteroid_curve().point(0.5 + 0.25 * sign))}

    shared = {}
    for sign in (1, -1):
        ids = {}
        for key, z in pts(sign).items():
            if key in ("O", "R"):
                if key not in shared:
                    shared[key] = b.vertex(z)
                ids[key] = shared[key]
            else:
                ids[key] = b.vertex(z)
        up[sign] = ids
        quads = [("O", "R", "R1", "M1"), ("M1", "R1", "B", "T"), ("O", "M1", "G", "P"),
                 ("M1", "T", "U", "G"), ("G", "U", "C", "P")]
        for q in quads:
            vs = [ids[k] for k in q]
            b.block(*(vs if sign > 0 else vs[::-1]))
        tc, tp = (1.0, 0.75) if sign > 0 else (0.0, 0.25)
        b.arc(ids["C"], ids["P"], ast, tc, tp, "g3")
        b.arc(ids["P"], ids["O"], ast, tp, 0.5, "g3")
    u, d = up[1], up[-1]
    b.tag_chain([d["B"], d["R1"], u["R"], u["R1"], u["B"]], "g1")
    b.tag_chain([u["B"], u["T"], u["U"], u["C"]], "g2")
    b.tag_chain([d["C"], d["U"], d["T"], d["B"]], "g4")
    b.mark(d["B"], u["B"], u["C"], d["C"], u["O"])
    return b.quadrilateral("asteroid-cusp", [d["B"], u["B"], u["C"], d["C"]])


def rectangle(h=1.0):
    """R_h = [0,1] x [0,h] with corners 1+ih, ih, 0, 1."""
    h = float(h)
    if not h > 0:
        raise GeometryError("rectangle height must be positive")
    b = BlockBuilder()
    v0, v1, v2, v3 = (b.vertex(z) for z in (0, 1, complex(1, h), complex(0, h)))
    b.block(v0, v1, v2, v3)
    b.tag(v2, v3, "g1")
    b.tag(v3, v0, "g2")
    b.tag(v0, v1, "g3")
    b.tag(v1, v2, "g4")
    return b.quadrilateral("rectangle", [v2, v3, v0, v1], {"h": h})


# -- ring domains -------------------------------------------------------------

def _ogrid_ring(name, b, inner, outer, layers, meta=None, marks=(), cut_exact=True):
    """Rings of blocks between an inner and an outer loop, cut along spoke 0.

    ``inner``/``outer`` are CCW vertex-id loops of equal length whose boundary
    edges are already defined; ``layers`` are fractions in (0, 1) placing
    intermediate rows on straight spokes, or callables ``(k, s) -> point``.
    """
    n = len(inner)
    rows = [list(inner)]
    for s in layers:
        row = []
        for k in range(n):
            zi, zo = b.vertices[inner[k]], b.vertices[outer[k]]
            row.append(b.vertex(s(k) if callable(s) else zi + s * (zo - zi)))
        rows.append(row)
    rows.append(list(outer))
    twins = [b.twin(row[0]) for row in rows]
    # the inner/outer edges into spoke 0 from the last sector use the twin copies
    for row, tw in ((rows[0], twins[0]), (rows[-1], twins[-1])):
        e = b.edges.pop(frozenset((row[-1], row[0])))
        a_, b_ = (tw if v == row[0] else v for v in (e.a, e.b))
        b.edges[frozenset((a_, b_))] = type(e)(a_, b_, e.curve, e.t, e.tag)
    L = len(rows) - 1
    for j in range(L):
        for k in range(n):
            k1 = k + 1
            v01 = rows[j][k1] if k1 < n else twins[j]
            v11 = rows[j + 1][k1] if k1 < n else twins[j + 1]
            b.block(rows[j][k], rows[j + 1][k], v11, v01)
    b.tag_chain([row[0] for row in rows], "g1")
    b.tag_chain([tw for tw in twins], "g3")
    b.mark(*marks)
    corners = [rows[0][0], rows[-1][0], twins[-1], twins[0]]
    return b.ring(name, corners, cut_exact, meta)


def _tag_free_edges(bb, classify, skip=()):
    """Tag block edges used once (and not yet tagged) by ``classify(midpoint)``."""
    use = {}
    for q in bb.blocks:
        for k in range(4):
            key = frozenset((q[k], q[(k + 1) % 4]))
            use[key] = use.get(key, 0) + 1
    for key, n in use.items():
        if n == 1 and key not in skip and key not in bb.edges:
            p, q = tuple(key)
            bb.tag(p, q, classify(0.5 * (bb.vertices[p] + bb.vertices[q])))


def _closed_loop(b, curve_id, ts, tag):
    """Vertices at parameters ``ts`` (increasing, excluding 1) on a closed curve, joined by arcs."""
    c = b.curves[curve_id]
    ids = [b.vertex(c.point(t)) for t in ts]
    n = len(ids)
    for k in range(n):
        t1 = ts[k + 1] if k + 1 < n else ts[0] + 1.0
        b.arc(ids[k], ids[(k + 1) % n], curve_id, ts[k], t1, tag)
    return ids


def _polygon_loop(b, pts, tag):
    ids = [b.vertex(z) for z in pts]
    b.tag_chain(ids, tag, closed=True)
    return ids


def _square_point(c, th):
    return c * np.exp(1j * th) / max(abs(math.cos(th)), abs(math.sin(th)))


def _radial_layers(r_in_min, r_out_max, max_ratio=2.0):
    n = max(0, math.ceil(math.log(r_out_max / r_in_min) / math.log(max_ratio)) - 1)
    return [(j + 1) / (n + 1) for j in range(n)]


def _geometric_spokes(inner_pts, outer_pts, nlayers):
    """Intermediate rows with radius growing geometrically along straight spokes."""
    out = []
    for j in range(1, nlayers + 1):
        s = j / (nlayers + 1)

        def f(k, s=s):
            zi, zo = inner_pts[k], outer_pts[k]
            ri, ro = abs(zi), abs(zo)
            return zi + (ri * (ro / ri) ** s - ri) / (ro - ri) * (zo - zi)
        out.append(f)
    return out


def annulus(r_in=math.exp(-1.0), r_out=1.0):
    """Concentric annulus r_in < |z| < r_out, cut along the positive real axis."""
    r_in, r_out = float(r_in), float(r_out)
    if not 0 < r_in < r_out:
        raise GeometryError("need 0 < r_in < r_out")
    b = BlockBuilder()
    ci = b.curve(circular_arc(0, r_in, 0.0, 2 * math.pi))
    co = b.curve(circular_arc(0, r_out, 0.0, 2 * math.pi))
    n = 8
    ts = [k / n for k in range(n)]
    inner = _closed_loop(b, ci, ts, "g4")
    outer = _closed_loop(b, co, ts, "g2")
    nl = len(_radial_layers(r_in, r_out))
    layers = _geometric_spokes([b.vertices[v] for v in inner], [b.vertices[v] for v in outer], nl)
    return _ogrid_ring("annulus", b, inner, outer, layers, {"r_in": r_in, "r_out": r_out})


def _pentagon_point(th):
    k = math.floor(th / (2 * math.pi / 5))
    phi = (2 * k + 1) * math.pi / 5
    return np.exp(1j * th) / math.cos(th - phi)


def disk_in_pentagon(r=0.4):
    """Regular pentagon with apothem 1 and corners sec(pi/5) e^{2 pi i k/5}, minus |z| <= r."""
    r = float(r)
    if not 0.0 < r < 1.0:
        raise GeometryError("disk-in-pentagon needs 0 < r < 1 (the disk must fit inside the apothem)")
    b = BlockBuilder()
    ci = b.curve(circular_arc(0, r, 0.0, 2 * math.pi))
    base = [k * math.pi / 5 for k in range(10)]
    gap = 1.0 - r
    angles = set(base)
    # the gap at angle d from a side midpoint is about gap + d^2 / 2; grade the
    # angles geometrically so it changes by a bounded factor across a sector
    d = 0.5 * math.sqrt(2 * gap)
    while d < 0.75 * math.pi / 5:
        for j in range(5):
            mid = (2 * j + 1) * math.pi / 5
            angles.update((mid - d, mid + d))
        d *= 1.7
    ths = sorted(a % (2 * math.pi) for a in angles)
    inner = _closed_loop(b, ci, [th / (2 * math.pi) for th in ths], "g4")
    outer_pts = [_pentagon_point(th) for th in ths]
    outer = _polygon_loop(b, outer_pts, "g2")
    corners = [outer[ths.index(base[2 * k])] for k in range(5)]
    nl = len(_radial_layers(r, 1.0 / math.cos(math.pi / 5)))
    layers = _geometric_spokes([b.vertices[v] for v in inner], outer_pts, nl)
    return _ogrid_ring("disk-in-pentagon", b, inner, outer, layers, {"r": r}, marks=corners)


def circle_in_square(r=1.0, c=2.5):
    """Square |x|, |y| < c minus the closed disk |z| <= r."""
    r, c = float(r), float(c)
    if not 0 < r < c:
        raise GeometryError("circle-in-square needs 0 < r < c")
    b = BlockBuilder()
    ci = b.curve(circular_arc(0, r, 0.0, 2 * math.pi))
    n = 8
    ths = [2 * math.pi * k / n for k in range(n)]
    inner = _closed_loop(b, ci, [k / n for k in range(n)], "g4")
    outer_pts = [_square_point(c, th) for th in ths]
    outer = _polygon_loop(b, outer_pts, "g2")
    nl = len(_radial_layers(r, c * math.sqrt(2)))
    layers = _geometric_spokes([b.vertices[v] for v in inner], outer_pts, nl)
    return _ogrid_ring("circle-in-square", b, inner, outer, layers, {"r": r, "c": c},
                       marks=outer[1::2])


def flower_in_square(n=6, t=0.1, c=1.5):
    """Square |x|, |y| < c minus the flower r(theta) <= 0.8 + t cos(n theta)."""
    n, t, c = int(n), float(t), float(c)
    if n < 1 or not 0 <= t < 0.8 or _flower_loops(n, t):
        raise GeometryError("invalid flower parameters")
    if 0.8 + t >= c:
        raise GeometryError("flower does not fit inside the square")
    b = BlockBuilder()
    fi = b.curve(_flower_curve(n, t, 0.0, 2 * math.pi))
    ns = 24 if n > 2 else 8
    ths = [2 * math.pi * k / ns for k in range(ns)]
    inner = _closed_loop(b, fi, [k / ns for k in range(ns)], "g4")
    outer_pts = [_square_point(c, th) for th in ths]
    outer = _polygon_loop(b, outer_pts, "g2")
    nl = len(_radial_layers(0.8 - t, c * math.sqrt(2)))
    layers = _geometric_spokes([b.vertices[v] for v in inner], outer_pts, nl)
    return _ogrid_ring("flower-in-square", b, inner, outer, layers, {"n": n, "t": t, "c": c})


def cross_in_square(a=0.5, b=1.2, c=1.5):
    """Square |x|, |y| < c minus the cross {|x|<=a, |y|<=b} u {|x|<=b, |y|<=a}."""
    a, b_, c = float(a), float(b), float(c)
    if not 0 < a < b_ < c:
        raise GeometryError("cross-in-square needs 0 < a < b < c")
    xs = [-c, -b_, -a, 0.0, a, b_, c]
    bb = BlockBuilder()
    vid = {}

    def inside_cross(x, y):
        return (abs(x) < a and abs(y) < b_) or (abs(x) < b_ and abs(y) < a)

    def v(i, j):
        if (i, j) not in vid:
            vid[(i, j)] = bb.vertex(complex(xs[i], xs[j]))
        return vid[(i, j)]

    n = len(xs) - 1
    i_in, i_out, j_cut = xs.index(b_), xs.index(c), xs.index(0.0)
    cells = []
    for i in range(n):
        for j in range(n):
            xm, ym = 0.5 * (xs[i] + xs[i + 1]), 0.5 * (xs[j] + xs[j + 1])
            if not inside_cross(xm, ym):
                cells.append((i, j))
    for i, j in cells:
        v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)
    tw = {i_in: bb.twin(v(i_in, j_cut)), i_out: bb.twin(v(i_out, j_cut))}
    for i, j in cells:
        q = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]
        if j + 1 == j_cut and i == i_in:  # cell just below the cut
            q = [q[0], q[1], tw[i_out], tw[i_in]]
        bb.block(*q)
    _tag_free_edges(bb, lambda z: "g2" if max(abs(z.real), abs(z.imag)) > c - 1e-12 else "g4",
                    skip={frozenset((v(i_in, j_cut), v(i_out, j_cut))), frozenset(tw.values())})
    bb.tag(v(i_in, j_cut), v(i_out, j_cut), "g1")
    bb.tag(tw[i_in], tw[i_out], "g3")
    marks = [vid[(xs.index(sx * a), xs.index(sy * b_))] for sx in (-1, 1) for sy in (-1, 1)]
    marks += [vid[(xs.index(sx * b_), xs.index(sy * a))] for sx in (-1, 1) for sy in (-1, 1)]
    bb.mark(*marks)
    corners = [v(i_in, j_cut), v(i_out, j_cut), tw[i_out], tw[i_in]]
    return bb.ring("cross-in-square", corners, True, {"a": a, "b": b_, "c": c})


def circle_in_l(a=3.0, b=1.0, c=2.0, d=1.0, x0=1.6, y0=0.4, r=0.2):
    """L(a,b,c,d) = (0,a)x(0,b) u (0,d)x(0,c) minus the disk |z - z0| <= r.

    The disk must sit in the horizontal arm to the right of x = d.  The
    stored cut is the vertical segment below the disk; it is not a gradient
    line of the ring potential.
    """
    a, b_, c_, d = (float(v) for v in (a, b, c, d))
    x0, y0, r = float(x0), float(y0), float(r)
    if not (0 < d < a and 0 < b_ < c_):
        raise GeometryError("L-domain needs 0 < d < a and 0 < b < c")
    h = min(x0 - d, a - x0, y0, b_ - y0)
    if not 0 < r < 0.75 * h:
        raise GeometryError("disk must lie well inside the horizontal arm, right of x = d")
    s = min(2 * r, h)  # half-width of the box around the disk
    bx0, bx1, by1 = x0 - s, x0 + s, y0 + s
    if y0 - s < -1e-12:
        raise GeometryError("disk is too close to the bottom side")
    xs = sorted({0.0, d, bx0, bx1, a})
    ys = sorted({0.0, y0 - s, by1, b_, c_}) if y0 - s > 1e-12 else sorted({0.0, by1, b_, c_})
    bb = BlockBuilder()
    vid = {}

    def v(x, y):
        key = (round(x, 12), round(y, 12))
        if key not in vid:
            vid[key] = bb.vertex(complex(x, y))
        return vid[key]

    box = (bx0, ys[0] if y0 - s <= 1e-12 else y0 - s, bx1, by1)
    blocks = []
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            xa, xb, ya, yb = xs[i], xs[i + 1], ys[j], ys[j + 1]
            if yb > b_ + 1e-12 and xa >= d - 1e-12:
                continue
            if xa >= box[0] - 1e-12 and xb <= box[2] + 1e-12 and ya >= box[1] - 1e-12 and yb <= box[3] + 1e-12:
                continue
            blocks.append([v(xa, ya), v(xb, ya), v(xb, yb), v(xa, yb)])
    ci = bb.curve(circular_arc(complex(x0, y0), r, -math.pi / 2, 1.5 * math.pi))
    # circle vertices at -90 (cut), -45, 45, 135, 225 degrees
    tcs = [0.0, 0.125, 0.375, 0.625, 0.875]
    cv = [bb.vertex(bb.curves[ci].point(t)) for t in tcs]
    bottom = v(x0, box[1])
    bl, br, tr, tl = v(box[0], box[1]), v(box[2], box[1]), v(box[2], box[3]), v(box[0], box[3])
    cut_in, cut_out = bb.twin(cv[0]), bb.twin(bottom)
    blocks += [[cv[0], bottom, br, cv[1]], [cv[1], br, tr, cv[2]], [cv[2], tr, tl, cv[3]],
               [cv[3], tl, bl, cv[4]], [cv[4], bl, cut_out, cut_in]]
    for q in blocks:
        bb.block(*q)
    for k in range(5):
        a0 = cv[k]
        a1 = cv[k + 1] if k < 4 else cut_in
        t1 = tcs[k + 1] if k < 4 else 1.0
        bb.arc(a1, a0, ci, t1, tcs[k], "g4")
    _tag_free_edges(bb, lambda z: "g2", skip={frozenset((cv[0], bottom)),
                                               frozenset((cut_in, cut_out))})
    bb.tag(cv[0], bottom, "g1")
    bb.tag(cut_in, cut_out, "g3")
    bb.mark(v(d, b_))
    corners = [cv[0], bottom, cut_out, cut_in]
    return bb.ring("circle-in-L", corners, False,
                   {"a": a, "b": b_, "c": c_, "d": d, "z0": [x0, y0], "r": r})


def droplet_curve():
    """Droplet r(t), t in [-1, 1]; tip at (0.1, 0) for t = +-1."""
    re = [469 / 640, 0, -525 / 640, 0, 75 / 640, 0, 45 / 640]
    im = [0, 15 / 32, 0, -30 / 32, 0, 15 / 32, 0]
    return polynomial_curve([complex(x, y) for x, y in zip(re, im)], -1.0, 1.0)


def droplet_in_square(c=1.5):
    """Square |x|, |y| < c minus the droplet; cut along the positive real axis."""
    c = float(c)
    if not c >= 0.9:
        raise GeometryError("droplet-in-square needs c >= 0.9")
    b = BlockBuilder()
    dc = b.curve(droplet_curve())
    # droplet vertices by decreasing parameter: tip, upper branch, right end, lower branch
    ts = (1.0, 0.75, 0.625, 0.5, 0.375, 0.25)
    T, D3, E3, D2, E1, D1 = (b.vertex(b.curves[dc].point(t)) for t in ts)
    P_ll, W, P_ul = (b.vertex(z) for z in (complex(-0.2, -0.35), complex(-0.4, 0), complex(-0.2, 0.35)))
    q2 = 0.5 * (0.733 + c)
    Q1, Q3 = b.vertex(complex(0.45, -0.45)), b.vertex(complex(0.45, 0.45))
    R1, R3 = b.vertex(complex(0.5 * (0.45 + q2) + 0.1, -0.3)), b.vertex(complex(0.5 * (0.45 + q2) + 0.1, 0.3))
    Q2 = b.vertex(complex(q2, 0))
    O = [b.vertex(z) for z in (complex(c, -c), complex(c, -0.5 * c), complex(c, 0),
                               complex(c, 0.5 * c), complex(c, c), complex(-c, c),
                               complex(-c, 0), complex(-c, -c))]
    D2t, Q2t, Ot = b.twin(D2), b.twin(Q2), b.twin(O[2])
    b.block(D1, T, P_ll, Q1)
    b.block(T, P_ul, W, P_ll)
    b.block(T, D3, Q3, P_ul)
    b.block(E1, D1, Q1, R1)
    b.block(D2t, E1, R1, Q2t)
    b.block(D3, E3, R3, Q3)
    b.block(E3, D2, Q2, R3)
    mid = [Q1, R1, Q2, R3, Q3, P_ul, W, P_ll]
    for k in range(8):
        m0, m1 = mid[k], mid[(k + 1) % 8]
        o0, o1 = O[k], O[(k + 1) % 8]
        if k == 1:
            m1, o1 = Q2t, Ot
        b.block(m0, o0, o1, m1)
    b.arc(T, D1, dc, 0.0, 0.25, "g4")
    b.arc(D1, E1, dc, 0.25, 0.375, "g4")
    b.arc(E1, D2t, dc, 0.375, 0.5, "g4")
    b.arc(D2, E3, dc, 0.5, 0.625, "g4")
    b.arc(E3, D3, dc, 0.625, 0.75, "g4")
    b.arc(D3, T, dc, 0.75, 1.0, "g4")
    b.tag_chain([O[0], O[1], Ot], "g2")
    b.tag_chain([O[2], O[3], O[4], O[5], O[6], O[7], O[0]], "g2")
    b.tag_chain([D2, Q2, O[2]], "g1")
    b.tag_chain([D2t, Q2t, Ot], "g3")
    b.mark(T)
    return b.ring("droplet-in-square", [D2, O[2], Ot, D2t], True, {"c": c})


_BUILDERS = {
    "unit-disk": unit_disk,
    "flower": flower,
    "circular-quadrilateral": circular_quadrilateral,
    "asteroid-cusp": asteroid_cusp,
    "disk-in-pentagon": disk_in_pentagon,
    "cross-in-square": cross_in_square,
    "circle-in-square": circle_in_square,
    "flower-in-square": flower_in_square,
    "circle-in-L": circle_in_l,
    "droplet-in-square": droplet_in_square,
    "rectangle": rectangle,
    "annulus": annulus,
}
