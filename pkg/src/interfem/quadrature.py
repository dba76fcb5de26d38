"""Quadrature rules on segments and triangles, and integration over the two
curved sub-regions of a cut element.

A cut element is split by the chord of the interface into a straight triangle
and a straight quadrilateral; the thin region between the chord and the curve
(the sliver) is integrated with a tensor Gauss rule using the signed height of
the curve above the chord.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_GAUSS_POINTS = 20
MAX_TRIANGLE_DEGREE = 10


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights of a quadrature rule.

    For 1D rules ``points`` has shape (n,), for triangle rules (n, 2).
    Weights are scaled so that their sum equals the measure of the
    reference domain ([-1, 1] or the unit reference triangle).
    """

    points: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def _gauss_legendre_arrays(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gauss_legendre(n):
    """n-point Gauss-Legendre rule on [-1, 1], exact for degree 2n - 1."""
    if not 1 <= n <= MAX_GAUSS_POINTS:
        raise ValueError(f"gauss_legendre: n must be in [1, {MAX_GAUSS_POINTS}], got {n}")
    x, w = _gauss_legendre_arrays(n)
    return QuadratureRule(x.copy(), w.copy())


@lru_cache(maxsize=None)
def _gauss_jacobi10_arrays(n):
    # Golub-Welsch for the weight (1 - x) on [-1, 1].  Recurrence
    # coefficients of the monic Jacobi polynomials with alpha = 1, beta = 0:
    #   a_0 = -1/3,  a_k = -1/((2k+1)(2k+3)),  b_k^2 = k(k+1)/(2k+1)^2.
    k = np.arange(n)
    diag = np.where(k == 0, -1.0 / 3.0, -1.0 / ((2.0 * k + 1.0) * (2.0 * k + 3.0)))
    koff = np.arange(1, n)
    off = np.sqrt(koff * (koff + 1.0)) / (2.0 * koff + 1.0)
    jac = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    nodes, vecs = np.linalg.eigh(jac)
    mu0 = 2.0  # integral of (1 - x) over [-1, 1]
    weights = mu0 * vecs[0, :] ** 2
    return nodes, weights


@lru_cache(maxsize=None)
def _triangle_rule_arrays(degree):
    # Conical product rule on the reference triangle {x, y >= 0, x + y <= 1}:
    # substitute y = (1 - x) u so the x-direction carries a (1 - x) weight,
    # handled exactly by the Gauss-Jacobi rule.  Positive weights, exact for
    # total degree <= `degree`.
    n = (degree + 2) // 2
    xj, wj = _gauss_jacobi10_arrays(n)
    xl, wl = _gauss_legendre_arrays(n)
    x = 0.5 * (1.0 + xj)          # Jacobi nodes mapped to [0, 1]
    wx = 0.25 * wj                # includes the (1 - x) factor
    u = 0.5 * (1.0 + xl)
    wu = 0.5 * wl
    px = np.repeat(x, n)
    pu = np.tile(u, len(x))
    pts = np.column_stack([px, (1.0 - px) * pu])
    wts = np.repeat(wx, n) * np.tile(wu, len(x))
    return pts, wts


def triangle_rule(degree):
    """Rule on the unit reference triangle exact for total degree <= degree."""
    if not 0 <= degree <= MAX_TRIANGLE_DEGREE:
        raise ValueError(
            f"triangle_rule: degree must be in [0, {MAX_TRIANGLE_DEGREE}], got {degree}"
        )
    pts, wts = _triangle_rule_arrays(max(degree, 1))
    return QuadratureRule(pts.copy(), wts.copy())


def map_rule_to_triangle(rule, verts):
    """Map a reference-triangle rule to the physical triangle `verts` (3, 2).

    Returns physical points (n, 2) and weights scaled by the Jacobian, so the
    weights sum to the physical triangle area.
    """
    v0, v1, v2 = np.asarray(verts, dtype=float)
    jac = np.column_stack([v1 - v0, v2 - v0])
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    pts = v0 + rule.points @ jac.T
    return pts, rule.weights * abs(det)


def _split_polygon(poly):
    """Split a convex polygon (3 or 4 CCW vertices) into triangles.

    Quadrilaterals are split along their shorter diagonal for shape quality.
    """
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 3:
        return [poly]
    if len(poly) == 4:
        d02 = np.hypot(*(poly[0] - poly[2]))
        d13 = np.hypot(*(poly[1] - poly[3]))
        if d02 <= d13:
            return [poly[[0, 1, 2]], poly[[0, 2, 3]]]
        return [poly[[0, 1, 3]], poly[[1, 2, 3]]]
    raise ValueError(f"polygon with {len(poly)} vertices is not supported")


def cut_region_quadrature(cut, side, n=4, poly_degree=4):
    """Points and weights integrating over one side (-1 or +1) of a cut
    element.

    The straight polygon between element edges and chord carries a mapped
    triangle rule of exactness `poly_degree`; the sliver between chord and
    curve carries an n-point tensor Gauss rule whose weights are signed by
    the side and by the height of the curve over the chord.
    """
    if side not in (-1, 1):
        raise ValueError(f"side must be -1 or +1, got {side!r}")
    rule = triangle_rule(poly_degree)
    all_pts, all_wts = [], []
    for tri in _split_polygon(cut.polygon(side)):
        pts, wts = map_rule_to_triangle(rule, tri)
        all_pts.append(pts)
        all_wts.append(wts)
    gl = gauss_legendre(n)
    half = 0.5 * cut.chord_length
    for xi, wi in zip(gl.points, gl.weights):
        t = half * xi
        g = cut.gamma(t)
        if g == 0.0:
            continue
        eta_nodes = 0.5 * g * (1.0 + gl.points)
        all_pts.append(cut.chord_to_phys(np.full(n, t), eta_nodes))
        sign = 1.0 if side == -1 else -1.0
        all_wts.append(sign * half * wi * (0.5 * g) * gl.weights)
    return np.concatenate(all_pts), np.concatenate(all_wts)


def integrate_cut_region(cut, side, f, n=4, poly_degree=4):
    """Integrate f over one side (-1 or +1) of a cut element.

    `f` must accept points of shape (m, 2) and return (m,) values.
    """
    pts, wts = cut_region_quadrature(cut, side, n=n, poly_degree=poly_degree)
    return float(wts @ np.asarray(f(pts), dtype=float))


def interface_quadrature(cut, n=4):
    """Points on the interface arc inside a cut element and arc-length
    weights (Gauss rule in the chord parameter with the metric factor
    sqrt(1 + gamma'(t)^2); gamma' via the implicit function theorem)."""
    gl = gauss_legendre(n)
    half = 0.5 * cut.chord_length
    t = half * gl.points
    gam = np.array([cut.gamma(ti) for ti in t])
    pts = cut.chord_to_phys(t, gam)
    dgam = cut.gamma_deriv(t, gam)
    return pts, half * gl.weights * np.sqrt(1.0 + dgam**2)


def integrate_interface_segment(cut, g, n=4):
    """Integrate g along the interface arc inside a cut element."""
    pts, wts = interface_quadrature(cut, n=n)
    return float(wts @ np.asarray(g(pts), dtype=float))
