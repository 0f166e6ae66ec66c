"""Laplace stiffness assembly and the paired Dirichlet-Neumann solve.

Degrees of freedom are numbered nodes first, then (p-1) modes per global
edge, then (p-1)^2 internal modes per element.  Each DOF belongs to one of
five classes:

    B   interior (free in both problems)
    D0  Dirichlet u = 0 in the primal problem (arc g2)
    D1  Dirichlet u = 1 in the primal problem (arc g4)
    N0  Neumann in the primal problem, Dirichlet 0 in the conjugate one (g3)
    N1  Neumann in the primal problem, Dirichlet 1 in the conjugate one (g1)

Nodes where a Dirichlet arc meets a Neumann arc are put in the Dirichlet
class.  They also carry the value of the adjacent Neumann arc, which the
conjugate solve holds fixed, so that both traces stay exact up to the corner.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import mode_signs, reference_tables
from .mesh import Mesh, MeshError

CLASSES = ("B", "N1", "N0", "D1", "D0")
TAG_CLASS = {"g1": "N1", "g2": "D0", "g3": "N0", "g4": "D1"}
CLASS_VALUE = {"D0": 0.0, "D1": 1.0, "N0": 0.0, "N1": 1.0}
_CHUNK = 192


class SolveError(RuntimeError):
    """Singular or inconsistent reduced system."""


def quadrature_points(p: int) -> int:
    """Gauss points per direction for order ``p``."""
    return p + 2


def dof_count(mesh: Mesh, p: int) -> int:
    return mesh.n_nodes + mesh.n_edges * (p - 1) + mesh.n_elements * (p - 1) ** 2


def local_to_global(mesh: Mesh, p: int) -> np.ndarray:
    """(ne, (p+1)^2) global DOF index of every element mode."""
    ne, m = mesh.n_elements, p - 1
    out = np.empty((ne, (p + 1) ** 2), dtype=np.int64)
    out[:, :4] = mesh.elements
    if m > 0:
        base = mesh.n_nodes
        for side in range(4):
            out[:, 4 + side * m:4 + (side + 1) * m] = (
                base + mesh.elem_edges[:, side, None] * m + np.arange(m))
        ib = base + mesh.n_edges * m
        out[:, 4 + 4 * m:] = ib + np.arange(ne)[:, None] * m * m + np.arange(m * m)
    return out


def element_signs(mesh: Mesh, p: int) -> np.ndarray:
    return np.array([mode_signs(p, mesh.elem_signs[e]) for e in range(mesh.n_elements)])


@lru_cache(maxsize=None)
def _gradient_tables(p: int, nq: int):
    X, Y, W, _, G = reference_tables(p, nq)
    return X, Y, W, np.ascontiguousarray(G[:, :, 0]), np.ascontiguousarray(G[:, :, 1])


def element_stiffness(mesh: Mesh, el: int, p: int, nq: int | None = None) -> np.ndarray:
    """Local Laplace matrix of element ``el`` (reference mode orientation)."""
    nq = nq or quadrature_points(p)
    X, Y, W, g0, g1 = _gradient_tables(p, nq)
    _, J = mesh.element_map(el, X, Y)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if not np.all(det > 0):
        raise MeshError(f"element {el} has non-positive Jacobian (min det {det.min():.3g})")
    # M = det * J^{-1} J^{-T}
    a, b, c, d = J[:, 0, 0], J[:, 0, 1], J[:, 1, 0], J[:, 1, 1]
    m00 = (b * b + d * d) / det
    m01 = -(a * b + c * d) / det
    m11 = (a * a + c * c) / det
    w = W
    h0 = (w * m00)[:, None] * g0 + (w * m01)[:, None] * g1
    h1 = (w * m01)[:, None] * g0 + (w * m11)[:, None] * g1
    return h0.T @ g0 + h1.T @ g1


@dataclass
class DofTable:
    """Class of every DOF plus conjugate values at Dirichlet/Neumann junctions."""

    classes: np.ndarray            # object array of class names
    junction: dict = field(default_factory=dict)   # dof -> conjugate Dirichlet value
    n_nodes: int = 0               # nodal DOFs come first

    def values(self, idx: np.ndarray, one: str) -> np.ndarray:
        """Boundary data on ``idx``: 1 on nodal DOFs of class ``one``, else 0.

        Hierarchic side modes carry no part of a constant trace.
        """
        return ((self.classes[idx] == one) & (idx < self.n_nodes)).astype(float)

    def index(self, *names) -> np.ndarray:
        mask = np.isin(self.classes, names)
        return np.flatnonzero(mask)

    def counts(self) -> dict:
        return {c: int(np.sum(self.classes == c)) for c in CLASSES}

    def swapped(self) -> "DofTable":
        """Class table of the conjugate problem (D1<->N1, D0<->N0)."""
        sw = {"B": "B", "N1": "D1", "N0": "D0", "D1": "N1", "D0": "N0"}
        return DofTable(np.array([sw[c] for c in self.classes], dtype=object),
                        dict(self.junction), self.n_nodes)


@dataclass
class StiffnessSystem:
    """Assembled Laplace matrix over all DOFs of a mesh at order ``p``.

    Internal (bubble) modes never carry boundary data, so they are
    condensed element by element at assembly: ``Ac`` is the Schur complement
    of the bubble block on the skeleton DOFs (nodes and side modes), and
    ``bubble_t`` recovers the bubbles afterwards.  The interior
    block A_BB is then factored as bubbles first, skeleton second; the
    skeleton factor is computed once per DOF partition and counted.
    """

    mesh: Mesh
    p: int
    A: sp.csr_matrix
    l2g: np.ndarray
    signs: np.ndarray
    Ac: sp.csr_matrix = None
    bubble_t: np.ndarray = field(default=None, repr=False)
    factorizations: int = 0
    _lu: object = field(default=None, repr=False)
    _lu_key: bytes | None = field(default=None, repr=False)

    @property
    def ndof(self) -> int:
        return self.A.shape[0]

    @property
    def n_skeleton(self) -> int:
        return self.Ac.shape[0]

    def block(self, table: DofTable, rows: str, cols: str):
        r, c = table.index(rows), table.index(cols)
        return self.A[r][:, c]

    def blocks(self, table: DofTable) -> dict:
        """All 25 class blocks, keyed by (row class, column class)."""
        return {(a, b): self.block(table, a, b) for a in CLASSES for b in CLASSES}

    def factor_interior(self, interior: np.ndarray):
        """Cached factorization of the condensed interior block; counted."""
        key = interior.tobytes()
        if self._lu_key != key:
            Abb = self.Ac[interior][:, interior].tocsc()
            if Abb.shape[0] == 0:
                self._lu = None
            else:
                try:
                    self._lu = spla.splu(Abb, permc_spec="MMD_AT_PLUS_A",
                                         diag_pivot_thresh=0.0,
                                         options={"SymmetricMode": True})
                except RuntimeError as exc:
                    raise SolveError(f"interior block is singular: {exc}") from exc
            self._lu_key = key
            self.factorizations += 1
        return self._lu

    def expand(self, xs: np.ndarray) -> np.ndarray:
        """Full coefficient vector from skeleton values (no volume load)."""
        x = np.zeros(self.ndof)
        x[:self.n_skeleton] = xs
        if self.bubble_t is not None:
            xe = xs[self.l2g[:, :4 * self.p]] * self.signs[:, :4 * self.p]
            x[self.l2g[:, 4 * self.p:]] = -np.einsum("ebs,es->eb", self.bubble_t, xe)
        return x

    def dump_matrix_market(self, path):
        from scipy.io import mmwrite
        mmwrite(path, self.A)


def assemble(mesh: Mesh, p: int, nq: int | None = None) -> StiffnessSystem:
    """Global stiffness matrix A_ij = int grad phi_i . grad phi_j."""
    if p < 1:
        raise ValueError("polynomial order must be >= 1")
    l2g = local_to_global(mesh, p)
    S = element_signs(mesh, p)
    nm = l2g.shape[1]
    ne = mesh.n_elements
    nsk = 4 * p
    rows = np.repeat(l2g, nm, axis=1).ravel()
    cols = np.tile(l2g, (1, nm)).ravel()
    vals = np.empty((ne, nm * nm))
    cvals = np.empty((ne, nsk * nsk))
    tmat = None
    if p >= 2:
        tmat = np.empty((ne, nm - nsk, nsk))
    for el in range(ne):
        K = element_stiffness(mesh, el, p, nq)
        s = S[el]
        vals[el] = (s[:, None] * K * s[None, :]).ravel()
        if p >= 2:
            # condensation in reference orientation; signs reapplied on scatter
            Kbb, Kbs = K[nsk:, nsk:], K[nsk:, :nsk]
            T = sla.solve(Kbb, Kbs, assume_a="pos")
            C = K[:nsk, :nsk] - Kbs.T @ T
            tmat[el] = T
            ss = s[:nsk]
            cvals[el] = (ss[:, None] * C * ss[None, :]).ravel()
        else:
            cvals[el] = vals[el]
    n = dof_count(mesh, p)
    A = sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    ns = mesh.n_nodes + mesh.n_edges * (p - 1)
    sk = l2g[:, :nsk]
    Ac = sp.coo_matrix((cvals.ravel(), (np.repeat(sk, nsk, axis=1).ravel(),
                                        np.tile(sk, (1, nsk)).ravel())), shape=(ns, ns)).tocsr()
    Ac.sum_duplicates()
    return StiffnessSystem(mesh, p, A, l2g, S, Ac, tmat)


def classify_dofs(mesh: Mesh, p: int, tag_class=None) -> DofTable:
    """Assign every DOF to B/D0/D1/N0/N1 from the boundary edge tags."""
    tag_class = dict(TAG_CLASS if tag_class is None else tag_class)
    n = dof_count(mesh, p)
    classes = np.full(n, "B", dtype=object)
    counts = mesh.edge_counts()
    node_classes: dict = {}
    m = p - 1
    for e in range(mesh.n_edges):
        tag = mesh.edge_tag(e)
        if counts[e] == 1 and tag is None:
            raise MeshError(f"boundary edge {mesh.edge_key(e)} has no arc tag")
        if tag is None or tag not in tag_class:
            continue
        cls = tag_class[tag]
        if m > 0:
            classes[mesh.n_nodes + e * m: mesh.n_nodes + (e + 1) * m] = cls
        for nd in mesh.edges[e]:
            node_classes.setdefault(int(nd), set()).add(cls)
    junction = {}
    for nd, cs in node_classes.items():
        dir_ = sorted(c for c in cs if c.startswith("D"))
        neu = sorted(c for c in cs if c.startswith("N"))
        if len(dir_) > 1 or len(neu) > 1:
            raise MeshError(f"node {nd} touches incompatible arcs {sorted(cs)}")
        if dir_:
            classes[nd] = dir_[0]
            if neu:
                junction[nd] = CLASS_VALUE[neu[0]]
        else:
            classes[nd] = neu[0]
    return DofTable(classes, junction, mesh.n_nodes)


@dataclass
class Field:
    """Coefficient vector of an hp solution on ``mesh``."""

    mesh: Mesh
    p: int
    coeffs: np.ndarray
    l2g: np.ndarray = field(default=None, repr=False)
    signs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.l2g is None:
            self.l2g = local_to_global(self.mesh, self.p)
        if self.signs is None:
            self.signs = element_signs(self.mesh, self.p)

    def element_coeffs(self, el: int) -> np.ndarray:
        """Coefficients of element ``el`` in reference mode orientation."""
        return self.coeffs[self.l2g[el]] * self.signs[el]


def _reduced_solve(sysm: StiffnessSystem, interior, free_bd, fixed, values):
    """Solve for ``interior`` and ``free_bd`` with ``fixed`` DOFs held at ``values``.

    Boundary unknowns are found from the dense Schur complement
    S = A_XX - A_XB A_BB^{-1} A_BX, using the shared interior factor.
    """
    ns = sysm.n_skeleton
    interior = interior[interior < ns]
    Ac = sysm.Ac
    x = np.zeros(ns)
    x[fixed] = values
    rc = -(Ac[:, fixed] @ values)
    lu = sysm.factor_interior(interior)
    rb = rc[interior]
    if free_bd.size:
        Abx = Ac[interior][:, free_bd].tocsc()
        Axx = Ac[free_bd][:, free_bd].toarray()
        Axb = Abx.T.tocsr()
        S = Axx.copy()
        if lu is not None:
            for c0 in range(0, free_bd.size, _CHUNK):
                cols = Abx[:, c0:c0 + _CHUNK].toarray()
                S[:, c0:c0 + _CHUNK] -= Axb @ lu.solve(cols)
            y = lu.solve(rb)
            rx = rc[free_bd] - Axb @ y
        else:
            rx = rc[free_bd]
        S = 0.5 * (S + S.T)
        try:
            xx = sla.solve(S, rx, assume_a="pos")
        except (sla.LinAlgError, ValueError) as exc:
            raise SolveError(f"reduced boundary system is singular: {exc}") from exc
        x[free_bd] = xx
        if lu is not None:
            x[interior] = lu.solve(rb - Abx @ xx)
    elif lu is not None:
        x[interior] = lu.solve(rb)
    full = sysm.expand(x)
    if not np.all(np.isfinite(full)):
        raise SolveError("solution is not finite")
    return full


def solve_pair(sysm: StiffnessSystem, table: DofTable):
    """Primal and conjugate Dirichlet-Neumann solutions sharing one A_BB factor.

    Primal: unknowns B, N1, N0 with x_D1 = 1, x_D0 = 0.
    Conjugate: roles D1<->N1, D0<->N0 swapped; junction nodes hold their
    conjugate value.
    """
    c = table.classes
    B = table.index("B")
    if not np.any(c == "D1") or not (np.any(c == "N1") or 1.0 in table.junction.values()):
        raise SolveError("both D1 and N1 must be non-empty")
    D = table.index("D1", "D0")
    N = table.index("N1", "N0")
    u1 = _reduced_solve(sysm, B, N, D, table.values(D, "D1"))

    junction = np.array(sorted(table.junction), dtype=np.int64)
    free_conj = np.setdiff1d(D, junction)
    fixed_conj = np.concatenate([N, junction])
    vals_conj = np.concatenate([table.values(N, "N1"),
                                np.array([table.junction[j] for j in junction], dtype=float)])
    order = np.argsort(fixed_conj)
    u2 = _reduced_solve(sysm, B, free_conj, fixed_conj[order], vals_conj[order])
    return (Field(sysm.mesh, sysm.p, u1, sysm.l2g, sysm.signs),
            Field(sysm.mesh, sysm.p, u2, sysm.l2g, sysm.signs))


def solve_dirichlet(sysm: StiffnessSystem, table: DofTable) -> Field:
    """Pure primal solve (ring potential: u = 1 on D1, 0 on D0, Neumann on N)."""
    c = table.classes
    B = table.index("B")
    D = table.index("D1", "D0")
    N = table.index("N1", "N0")
    if not np.any(c == "D1") or not np.any(c == "D0"):
        raise SolveError("Dirichlet data must include both values")
    u = _reduced_solve(sysm, B, N, D, table.values(D, "D1"))
    return Field(sysm.mesh, sysm.p, u, sysm.l2g, sysm.signs)


def energy(sysm: StiffnessSystem, f) -> float:
    """Dirichlet energy x'Ax of a field (or raw coefficient vector)."""
    x = f.coeffs if isinstance(f, Field) else np.asarray(f, dtype=float)
    if x.shape != (sysm.ndof,):
        raise ValueError(f"field has {x.size} coefficients, system has {sysm.ndof}")
    return float(x @ (sysm.A @ x))


def bilinear(sysm: StiffnessSystem, f, g) -> float:
    x = f.coeffs if isinstance(f, Field) else f
    y = g.coeffs if isinstance(g, Field) else g
    return float(x @ (sysm.A @ y))
