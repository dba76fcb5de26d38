"""Element-local correction functions.

A correction function is piecewise polynomial of degree k on the two sides
of a cut element.  Its one-sided branches differ by prescribed jumps of
eta-directional derivatives at the projected Gauss points of the chord, and
it vanishes at the Lagrange points of the element (velocity/Poisson variant)
or has vanishing pressure projection (pressure variant).

Construction is sequential in the chord frame: with v(s, r) = sum_j s^j
p_{k-j}(r), level ell determines the degree-ell polynomial p_ell by
interpolation at the ell+1 projected abscissae, using only lower levels.
No local linear system beyond a tiny 1D polynomial fit is solved, so the
construction stays well conditioned for arbitrarily short chords.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import ConstructionError
from .jumps import rotate_jumps_to_eta
from .lagrange import ElementBasis
from .quadrature import integrate_cut_region, map_rule_to_triangle, triangle_rule


@dataclass
class CorrectionFunction:
    """One-sided evaluable correction on a cut element.

    The minus branch is v - P(z), the plus branch -P(z), where z equals v on
    the minus side and 0 on the plus side, and P is the nodal interpolant
    (`kind='nodal'`), the cell mean (`kind='mean'`), a lower-degree nodal
    interpolant (`kind='lagrange'`) or the element L2 projection
    (`kind='l2'`).
    """

    cut: object
    degree: int
    poly: list                    # poly[ell] = coefficients of p_ell in rho
    kind: str
    nodal_values: np.ndarray = None
    basis: ElementBasis = None
    mean_value: float = 0.0

    # -- the chord-frame polynomial v ------------------------------------

    def _rho(self, r):
        return 2.0 * np.asarray(r, dtype=float) / self.cut.chord_length

    def v_value(self, r, s):
        rho = self._rho(r)
        s = np.asarray(s, dtype=float)
        total = np.zeros(np.broadcast(rho, s).shape)
        for j in range(self.degree + 1):
            total += s**j * npoly.polyval(rho, self.poly[self.degree - j])
        return total

    def v_eta_derivative(self, r, s, m):
        """m-th derivative of v in the eta (s) direction."""
        rho = self._rho(r)
        s = np.asarray(s, dtype=float)
        total = np.zeros(np.broadcast(rho, s).shape)
        for j in range(m, self.degree + 1):
            coef = factorial(j) / factorial(j - m)
            total += coef * s**(j - m) * npoly.polyval(rho, self.poly[self.degree - j])
        return total

    def v_grad(self, r, s):
        """Chord-frame gradient (d/dr, d/ds) of v."""
        rho = self._rho(r)
        s = np.asarray(s, dtype=float)
        shape = np.broadcast(rho, s).shape
        dr = np.zeros(shape)
        ds = np.zeros(shape)
        scale = 2.0 / self.cut.chord_length
        for j in range(self.degree + 1):
            p = self.poly[self.degree - j]
            dr += s**j * npoly.polyval(rho, npoly.polyder(p)) * scale
            if j >= 1:
                ds += j * s**(j - 1) * npoly.polyval(rho, p)
        return dr, ds

    # -- the subtracted smooth part --------------------------------------

    def _smooth_value(self, x):
        if self.kind == "mean":
            return np.full(len(np.atleast_2d(x)), self.mean_value)
        return self.basis.eval(x) @ self.nodal_values

    def _smooth_grad(self, x):
        if self.kind == "mean":
            return np.zeros((len(np.atleast_2d(x)), 2))
        g = self.basis.grad(x)
        return np.einsum("nbd,b->nd", g, self.nodal_values)

    # -- public one-sided evaluation -------------------------------------

    def value(self, x, side):
        """Branch value at physical points x (m, 2); side is -1 or +1."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = -self._smooth_value(x)
        if side == -1:
            r, s = self.cut.phys_to_chord(x)
            out = out + self.v_value(r, s)
        return out

    def grad(self, x, side):
        """Branch gradient at physical points x (m, 2) -> (m, 2)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = -self._smooth_grad(x)
        if side == -1:
            r, s = self.cut.phys_to_chord(x)
            dr, ds = self.v_grad(r, s)
            out = out + np.outer(dr, self.cut.tau) + np.outer(ds, self.cut.eta)
        return out

    def eta_jump(self, r, s, m):
        """Jump (plus minus minus) of the m-th eta derivative at chord point."""
        return -self.v_eta_derivative(r, s, m)


def _solve_levels(cut, vdata, k):
    """Sequential construction of the chord-frame polynomials p_0 .. p_k.

    `vdata[(i, ell)]` are the target eta-derivatives of v at the projected
    Gauss points.  Polynomials are represented in the scaled abscissa
    rho = 2 r / r_T, where the level-ell interpolation nodes are exactly the
    (ell+1)-point Gauss nodes.
    """
    polys = []
    for ell in range(k + 1):
        lev = cut.levels[ell]
        rho = 2.0 * lev.chord_r / cut.chord_length
        if len(np.unique(np.round(rho, 14))) != ell + 1:
            raise ConstructionError(
                f"element {cut.elem}: coincident projection abscissae at level {ell}")
        rhs = np.empty(ell + 1)
        for i in range(ell + 1):
            s_i = lev.gamma[i]
            acc = vdata[(i, ell)]
            for m in range(1, ell + 1):
                coef = factorial(k - ell + m) / factorial(m)
                acc -= coef * s_i**m * npoly.polyval(rho[i], polys[ell - m])
            rhs[i] = acc / factorial(k - ell)
        polys.append(npoly.polyfit(rho, rhs, ell))
    return polys


def build_correction(cut, jumps, k, basis):
    """Correction with prescribed derivative jumps, vanishing at the degree-k
    Lagrange points of the element.

    `jumps[(i, ell)]` is the jump (plus-side value minus minus-side value) of
    the (k-ell)-th eta-directional derivative at the level-ell projected
    Gauss point i.  `basis` is the ElementBasis carrying those Lagrange
    points.  The returned branches reproduce exactly these jumps.
    """
    if basis.ref.degree != k:
        raise ValueError("basis degree does not match the correction degree")
    # The minus branch carries v with v = (minus trace) - (plus trace),
    # which is the negated canonical jump.
    vdata = {key: -val for key, val in jumps.items()}
    polys = _solve_levels(cut, vdata, k)
    cf = CorrectionFunction(cut=cut, degree=k, poly=polys, kind="nodal",
                            basis=basis)
    phi = cut.curve.phi(basis.nodes)
    r, s = cut.phys_to_chord(basis.nodes)
    cf.nodal_values = np.where(phi <= 0.0, cf.v_value(r, s), 0.0)
    return cf


def build_pressure_correction(cut, jumps, k, kind="mean", basis=None):
    """Pressure correction: same jump construction, but the subtracted part
    makes the pressure projection vanish instead of the Lagrange values.

    kind='mean'      cellwise-constant projection (cell mean over T is zero);
    kind='lagrange'  interpolatory projection at the degree k-1 points;
    kind='l2'        L2 projection onto degree k-1 polynomials on T.
    """
    vdata = {key: -val for key, val in jumps.items()}
    polys = _solve_levels(cut, vdata, k)
    cf = CorrectionFunction(cut=cut, degree=k, poly=polys, kind=kind)

    if kind == "mean":
        area = cut.area_minus + cut.area_plus
        integral = integrate_cut_region(
            cut, -1, lambda p: cf.v_value(*cut.phys_to_chord(p)),
            n=k + 3, poly_degree=max(2 * k, 2))
        cf.mean_value = integral / area
        return cf

    if kind == "lagrange":
        if k < 2:
            raise ConstructionError("lagrange projection needs degree k >= 2")
        cf.kind = "nodal"
        cf.basis = basis if basis is not None else ElementBasis(cut.verts, k - 1)
        phi = cut.curve.phi(cf.basis.nodes)
        r, s = cut.phys_to_chord(cf.basis.nodes)
        cf.nodal_values = np.where(phi <= 0.0, cf.v_value(r, s), 0.0)
        return cf

    if kind == "l2":
        proj_basis = basis if basis is not None else ElementBasis(cut.verts, max(k - 1, 1))
        rule = triangle_rule(2 * proj_basis.ref.degree + 2)
        pts, wts = map_rule_to_triangle(rule, cut.verts)
        vals = proj_basis.eval(pts)
        mass = np.einsum("q,qa,qb->ab", wts, vals, vals)
        rhs = np.array([
            integrate_cut_region(
                cut, -1,
                lambda p, a=a: cf.v_value(*cut.phys_to_chord(p))
                * proj_basis.eval(p)[:, a],
                n=k + 3, poly_degree=2 * k + 2)
            for a in range(proj_basis.ref.n_basis)])
        cf.kind = "nodal"
        cf.basis = proj_basis
        cf.nodal_values = np.linalg.solve(mass, rhs)
        return cf

    raise ValueError(f"unknown pressure projection kind {kind!r}")


def eval_w(cf, x, side):
    """Value of the chosen one-sided branch at x."""
    return cf.value(x, side)


def eval_grad_w(cf, x, side):
    """Gradient of the chosen one-sided branch at x."""
    return cf.grad(x, side)


def jumps_from_tables(cut, tables, k):
    """Rotate jump tables at the projected Gauss points into eta data.

    `tables[ell][i]` is the JumpTable at the level-ell projection point i;
    returns the dict consumed by `build_correction`.
    """
    out = {}
    for ell in range(k + 1):
        lev = cut.levels[ell]
        for i in range(ell + 1):
            x = lev.curve_points[i]
            n = cut.curve.normal(x)
            t = cut.curve.tangent(x)
            a = float(cut.eta @ n)
            b = float(cut.eta @ t)
            out[(i, ell)] = rotate_jumps_to_eta(tables[ell][i], a, b, k - ell)
    return out
