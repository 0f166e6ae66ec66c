"""Hierarchic integrated-Legendre shape functions on the reference square.

Mode layout for order ``p`` (``nmodes = (p + 1) ** 2``)::

    0..3                      nodal modes N1..N4 at (-1,-1), (1,-1), (1,1), (-1,1)
    4 + k*(p-1) + (i-2)       side mode i = 2..p of local side k = 0..3
    4 + 4*(p-1) + ...         internal modes phi_i(xi) * phi_j(eta), i-major

Local side parameter directions are fixed: side 0 runs N1->N2 along xi,
side 1 N2->N3 along eta, side 2 N4->N3 along xi, side 3 N1->N4 along eta.
Global consistency of odd side modes is handled by per-element sign flags
(see :func:`mode_signs`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

# below this value of 1 - x^2 the closed derivative formula loses digits
_ENDPOINT_BAND = 1e-3


def legendre(n: int, x):
    """Legendre polynomial P_n and its derivative.

    Uses the three-term recurrence for the value and
    ``(1 - x^2) P'_n = -n x P_n + n P_{n-1}`` for the derivative.  At
    ``x = +-1`` the derivative is the limit ``(+-1)^(n+1) n (n+1) / 2``; in a
    thin band around the endpoints the equivalent recurrence
    ``P'_{n+1} = P'_{n-1} + (2n + 1) P_n`` is used instead of dividing by a
    vanishing ``1 - x^2``.
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    P, dP = legendre_table(n, x)
    return P[n], dP[n]


def legendre_table(n: int, x):
    """Values and derivatives of P_0..P_n at ``x``; arrays of shape (n+1, *x.shape)."""
    x = np.asarray(x, dtype=float)
    P = np.empty((n + 1,) + x.shape)
    P[0] = 1.0
    if n >= 1:
        P[1] = x
    for k in range(1, n):
        P[k + 1] = ((2 * k + 1) * x * P[k] - k * P[k - 1]) / (k + 1)

    dP = np.empty_like(P)
    dP[0] = 0.0
    if n >= 1:
        dP[1] = 1.0
    one_minus = 1.0 - x * x
    near = one_minus < _ENDPOINT_BAND
    # recurrence branch, exact everywhere; used near the endpoints
    rec = np.empty_like(P)
    rec[0] = 0.0
    if n >= 1:
        rec[1] = 1.0
    for k in range(1, n):
        rec[k + 1] = rec[k - 1] + (2 * k + 1) * P[k]
    safe = np.where(near, 1.0, one_minus)
    for k in range(2, n + 1):
        closed = (-k * x * P[k] + k * P[k - 1]) / safe
        dP[k] = np.where(near, rec[k], closed)
    return P, dP


def integrated_legendre(n: int, xi):
    """phi_n(xi) = (P_n - P_{n-2}) / sqrt(2(2n - 1)) and its derivative."""
    if n < 2:
        raise ValueError("integrated Legendre polynomials start at n = 2")
    P, _ = legendre_table(n, xi)
    val = (P[n] - P[n - 2]) / np.sqrt(2.0 * (2 * n - 1))
    der = np.sqrt((2 * n - 1) / 2.0) * P[n - 1]
    return val, der


def phi_table(p: int, x):
    """phi_2..phi_p and derivatives at ``x``; rows indexed by ``n - 2``."""
    x = np.asarray(x, dtype=float)
    if p < 2:
        empty = np.zeros((0,) + x.shape)
        return empty, empty.copy()
    P, _ = legendre_table(p, x)
    ns = np.arange(2, p + 1)
    norm = np.sqrt(2.0 * (2 * ns - 1)).reshape((-1,) + (1,) * x.ndim)
    dnorm = np.sqrt((2 * ns - 1) / 2.0).reshape((-1,) + (1,) * x.ndim)
    val = (P[2:] - P[:-2]) / norm
    der = dnorm * P[1:-1]
    return val, der


@dataclass(frozen=True)
class ShapeSet:
    """Tagged mode layout of the order-``p`` hierarchic quadrilateral."""

    p: int
    layout: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("polynomial order must be >= 1")
        modes = [("node", k) for k in range(4)]
        for side in range(4):
            modes += [("side", side, i) for i in range(2, self.p + 1)]
        for i in range(2, self.p + 1):
            for j in range(2, self.p + 1):
                modes.append(("internal", i, j))
        object.__setattr__(self, "layout", tuple(modes))

    @property
    def nmodes(self) -> int:
        return len(self.layout)

    def side_slice(self, side: int) -> slice:
        start = 4 + side * (self.p - 1)
        return slice(start, start + self.p - 1)

    @property
    def internal_slice(self) -> slice:
        return slice(4 + 4 * (self.p - 1), self.nmodes)

    def mode_count(self) -> int:
        return 4 + 4 * (self.p - 1) + (self.p - 1) ** 2


def shape_functions(p: int, xi, eta):
    """All modes at the points (xi, eta).

    Returns ``(values, grads)`` with shapes ``(npts, nmodes)`` and
    ``(npts, nmodes, 2)``; reference-coordinate gradients.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    npts = xi.size
    nm = (p + 1) ** 2
    V = np.empty((npts, nm))
    G = np.empty((npts, nm, 2))

    xm, xp = 0.5 * (1 - xi), 0.5 * (1 + xi)
    em, ep = 0.5 * (1 - eta), 0.5 * (1 + eta)
    V[:, 0] = xm * em
    V[:, 1] = xp * em
    V[:, 2] = xp * ep
    V[:, 3] = xm * ep
    G[:, 0, 0], G[:, 0, 1] = -0.5 * em, -0.5 * xm
    G[:, 1, 0], G[:, 1, 1] = 0.5 * em, -0.5 * xp
    G[:, 2, 0], G[:, 2, 1] = 0.5 * ep, 0.5 * xp
    G[:, 3, 0], G[:, 3, 1] = -0.5 * ep, 0.5 * xm
    if p < 2:
        return V, G

    fx, dfx = phi_table(p, xi)  # (p-1, npts)
    fe, dfe = phi_table(p, eta)
    m = p - 1
    s = 4
    # side 0: eta = -1, along xi
    V[:, s:s + m] = (em * fx).T
    G[:, s:s + m, 0] = (em * dfx).T
    G[:, s:s + m, 1] = (-0.5 * fx).T
    s += m
    # side 1: xi = +1, along eta
    V[:, s:s + m] = (xp * fe).T
    G[:, s:s + m, 0] = (0.5 * fe).T
    G[:, s:s + m, 1] = (xp * dfe).T
    s += m
    # side 2: eta = +1, along xi
    V[:, s:s + m] = (ep * fx).T
    G[:, s:s + m, 0] = (ep * dfx).T
    G[:, s:s + m, 1] = (0.5 * fx).T
    s += m
    # side 3: xi = -1, along eta
    V[:, s:s + m] = (xm * fe).T
    G[:, s:s + m, 0] = (-0.5 * fe).T
    G[:, s:s + m, 1] = (xm * dfe).T
    s += m
    # internal, i-major
    V[:, s:] = np.einsum("ip,jp->pij", fx, fe).reshape(npts, m * m)
    G[:, s:, 0] = np.einsum("ip,jp->pij", dfx, fe).reshape(npts, m * m)
    G[:, s:, 1] = np.einsum("ip,jp->pij", fx, dfe).reshape(npts, m * m)
    return V, G


def shape_eval(shapes: ShapeSet, mode: int, xi: float, eta: float):
    """Value and reference gradient of one mode at a single point."""
    if not 0 <= mode < shapes.nmodes:
        raise IndexError(f"mode {mode} out of range for p={shapes.p}")
    V, G = shape_functions(shapes.p, [xi], [eta])
    return V[0, mode], G[0, mode]


@lru_cache(maxsize=None)
def _parity(p: int) -> np.ndarray:
    return np.array([(-1) ** i for i in range(2, p + 1)], dtype=float)


def mode_signs(p: int, side_flags) -> np.ndarray:
    """Per-mode multipliers for an element with side orientation flags +-1.

    Side mode i on a side traversed against the global edge direction picks
    up ``(-1)^i`` since ``phi_i(-x) = (-1)^i phi_i(x)``.
    """
    s = np.ones((p + 1) ** 2)
    if p < 2:
        return s
    par = _parity(p)
    for side, flag in enumerate(side_flags):
        if flag < 0:
            start = 4 + side * (p - 1)
            s[start:start + p - 1] = par
    return s


@lru_cache(maxsize=None)
def gauss_rule(n: int):
    """Tensor Gauss-Legendre rule with n points per direction on [-1,1]^2."""
    x, w = np.polynomial.legendre.leggauss(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return X.ravel(), Y.ravel(), W.ravel()


@lru_cache(maxsize=None)
def reference_tables(p: int, nq: int):
    """Cached shape values and gradients at the tensor Gauss points."""
    X, Y, W = gauss_rule(nq)
    V, G = shape_functions(p, X, Y)
    V.setflags(write=False)
    G.setflags(write=False)
    return X, Y, W, V, G
