"""Closed-form reference maps used to check the solver.

The rectangle [0, 1] x [0, h] is mapped onto the unit disk by an affine
change of variable, the Jacobi elliptic sine (rectangle -> upper half
plane) and a Moebius transformation (half plane -> disk).  Elliptic
functions are computed here from the arithmetic-geometric mean and the
descending Landen transformation only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def agm(a: float, b: float, tol: float = 1e-16) -> float:
    """Arithmetic-geometric mean of two positive numbers."""
    a, b = float(a), float(b)
    if a <= 0 or b <= 0:
        raise ValueError("agm needs positive arguments")
    for _ in range(100):
        if abs(a - b) <= tol * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return a


def ellip_k(k: float) -> float:
    """Complete elliptic integral of the first kind K(k) (modulus k)."""
    if not 0.0 <= k < 1.0:
        raise ValueError("modulus must lie in [0, 1)")
    return math.pi / (2.0 * agm(1.0, math.sqrt((1.0 - k) * (1.0 + k))))


def _complement(k: float) -> float:
    return math.sqrt((1.0 - k) * (1.0 + k))


def ellipj(u, k: float, kp: float | None = None):
    """Jacobi sn, cn, dn for real ``u`` and modulus 0 <= k < 1 (descending Landen).

    ``kp`` is the complementary modulus; pass it when k is close to 1.
    """
    u = np.asarray(u, dtype=float)
    if k == 0.0:
        return np.sin(u), np.cos(u), np.ones_like(u)
    a, b, c = [1.0], [_complement(k) if kp is None else float(kp)], [k]
    while abs(c[-1]) > 1e-17 and len(a) < 60:
        an, bn = a[-1], b[-1]
        a.append(0.5 * (an + bn))
        b.append(math.sqrt(an * bn))
        c.append(0.5 * (an - bn))
    n = len(a) - 1
    phi = (2.0 ** n) * a[n] * u
    phis = [phi]
    for j in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(np.clip(c[j] / a[j] * np.sin(phi), -1.0, 1.0)))
        phis.append(phi)
    phi0 = phis[-1]
    sn, cn = np.sin(phi0), np.cos(phi0)
    # dn > 0 for real u; cn / cos(phi1 - phi0) is 0/0 at the quarter period
    dn = np.sqrt((1.0 - k * sn) * (1.0 + k * sn))
    return sn, cn, dn


def sn_complex(z, k: float, kp: float | None = None):
    """sn(x + iy, k) from real-argument values via the addition formula."""
    z = np.asarray(z, dtype=complex)
    kp = _complement(k) if kp is None else float(kp)
    s, c, d = ellipj(z.real, k, kp)
    s1, c1, d1 = ellipj(z.imag, kp, k)
    den = c1 ** 2 + (k * s * s1) ** 2
    return (s * d1 + 1j * c * d * s1 * c1) / den


@dataclass(frozen=True)
class EllipticParams:
    """Modulus k whose period rectangle has the aspect of [0, 1] x [0, h]."""

    h: float
    k: float
    K: float
    Kp: float
    kp: float  # complementary modulus, kept separately for k near 1

    @classmethod
    def for_height(cls, h: float, tol: float = 1e-13) -> "EllipticParams":
        """Bisection for K'(k) / (2 K(k)) = h.

        The unknown is log k for h >= 1/2 and log k' below, so that the
        small one of k, k' is never formed by cancellation.
        """
        h = float(h)
        if not h > 0:
            raise ValueError("rectangle height must be positive")
        small_k = h >= 0.5

        def periods(lt):
            # K(k) = pi / (2 agm(1, k')) and K'(k) = pi / (2 agm(1, k))
            t = math.exp(lt)
            k, kp = (t, _complement(t)) if small_k else (_complement(t), t)
            return k, kp, math.pi / (2 * agm(1.0, kp)), math.pi / (2 * agm(1.0, k))

        lo, hi = math.log(1e-300), math.log(1.0 - 1e-16)
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            _, _, K, Kp = periods(mid)
            # the ratio decreases in k and increases in k'
            if (Kp / (2 * K) > h) == small_k:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        k, kp, K, Kp = periods(0.5 * (lo + hi))
        p = cls(h, k, K, Kp, kp)
        if abs(Kp / (2 * K) - h) > tol * max(1.0, h):
            raise ArithmeticError("elliptic modulus bisection did not converge")
        return p


def _moebius_three(t, src, dst):
    """The Moebius map sending the three points ``src`` to ``dst``."""
    t1, t2, t3 = src
    w1, w2, w3 = dst
    r = (t - t1) * (t2 - t3) / ((t - t3) * (t2 - t1))
    # solve (w - w1)(w2 - w3) / ((w - w3)(w2 - w1)) = r for w
    A = w2 - w3
    B = w2 - w1
    return (w1 * A - r * w3 * B) / (A - r * B)


def rect_to_disk(params: EllipticParams, z):
    """Conformal map of [0, 1] x [0, h] onto the unit disk.

    Normalized so that 0 -> -1, 1 -> -i and 1 + ih -> 1, i.e. the corners
    (1 + ih, ih, 0, 1) of the canonical rectangle land on the disk corners
    z1..z4 with z1 = 1, z3 = -1, z4 = -i.
    """
    z = np.asarray(z, dtype=complex)
    h = params.h
    tol = 1e-12
    if np.any(z.real < -tol) or np.any(z.real > 1 + tol) or np.any(z.imag < -tol) or np.any(z.imag > h + tol):
        raise ValueError("point outside the rectangle")
    zeta = 2.0 * params.K * z - params.K  # [-K, K] x [0, K']
    t = sn_complex(zeta, params.k, params.kp)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = _moebius_three(t, (-1.0, 1.0, 1.0 / params.k), (-1.0, -1j, 1.0))
    # the corner ih goes to t = -1/k; sn has no pole there but guard exact corners
    return w


def disk_corner_angles(params: EllipticParams):
    """Angles of the images of 1 + ih, ih, 0, 1 (increasing, first = 0)."""
    w = rect_to_disk(params, np.array([1 + 1j * params.h, 1j * params.h, 0, 1]))
    th = np.mod(np.angle(w), 2 * np.pi)
    th[0] = 0.0
    return th


def annulus_potential(radii, z):
    """Harmonic u on r_in < |z| < r_out with u = 1 inside, 0 outside."""
    r_in, r_out = (float(v) for v in radii)
    if not 0 < r_in < r_out:
        raise ValueError("need 0 < r_in < r_out")
    r = np.abs(np.asarray(z, dtype=complex))
    if np.any(r < r_in * (1 - 1e-12)) or np.any(r > r_out * (1 + 1e-12)):
        raise ValueError("point outside the annulus")
    return np.log(r / r_out) / math.log(r_in / r_out)


def annulus_capacity(radii) -> float:
    r_in, r_out = (float(v) for v in radii)
    return 2 * math.pi / math.log(r_out / r_in)


def rectangle_grid(h: float, n: int = 11):
    """n x n uniform grid on the closed rectangle [0, 1] x [0, h]."""
    x, y = np.meshgrid(np.linspace(0.0, 1.0, n), np.linspace(0.0, h, n))
    return (x + 1j * y).ravel()


def elliptic_grid_errors(params: EllipticParams, cmap, n: int = 11):
    """Pointwise errors |f(w) - z| with w = rect_to_disk(z) over an n x n grid.

    ``cmap`` is a computed map of the unit disk with corners at
    :func:`disk_corner_angles`; returns ``(max, mean)``.
    """
    z = rectangle_grid(params.h, n)
    w = rect_to_disk(params, z)
    w = w / np.maximum(np.abs(w), 1.0)  # boundary images may sit 1 ulp outside
    err = np.abs(cmap.evaluate_many(w) - z)
    return float(err.max()), float(err.mean())
