"""Interface representation and per-cut-element geometry.

The interface is given implicitly by phi (negative on the minus region) and,
optionally, by an arc-length parametrization.  For every element crossed by
the curve we build the chord between its two boundary intersections, the
orthonormal chord frame, the projected Gauss points on the curve and the
signed height of the curve over the chord.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError
from .quadrature import gauss_legendre, integrate_cut_region

# Relative tolerance (times the element size) for "a point sits on the curve".
PROJECTION_TOL = 1e-13
# Intersections closer than this fraction of h_T to a vertex make the cut
# degenerate; the element is then reclassified as uncut on its centroid side.
VERTEX_TOL = 1e-9
# Interior samples per edge when checking that the curve crosses each element
# edge at most once.
EDGE_SAMPLES = 16


class InterfaceCurve:
    """Smooth interface given implicitly, with optional parametrization.

    All point-valued callables accept arrays of shape (..., 2).  The sign
    convention is phi < 0 on the minus region; the unit normal points from
    minus into plus.  Closed curves carry an arc-length parametrization
    ``point_at(s)`` on [0, arc_length); open curves (lines crossing the
    domain boundary) use an unbounded segment parameter.
    """

    def __init__(self, phi, grad_phi, hess_phi=None, curvature=None,
                 point_at=None, param_of_point=None, arc_length=None,
                 name="custom"):
        self._phi = phi
        self._grad = grad_phi
        self._hess = hess_phi
        self._curv = curvature
        self._point_at = point_at
        self._param_of_point = param_of_point
        self.arc_length = arc_length
        self.name = name
        if curvature is None and hess_phi is None:
            raise ValueError("curve needs either a curvature or a Hessian provider")

    def phi(self, x):
        return np.asarray(self._phi(np.asarray(x, dtype=float)), dtype=float)

    def grad_phi(self, x):
        return np.asarray(self._grad(np.asarray(x, dtype=float)), dtype=float)

    def normal(self, x):
        g = self.grad_phi(x)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def tangent(self, x):
        n = self.normal(x)
        return np.stack([-n[..., 1], n[..., 0]], axis=-1)

    def curvature(self, x):
        if self._curv is not None:
            return np.asarray(self._curv(np.asarray(x, dtype=float)), dtype=float)
        g = self.grad_phi(x)
        h = np.asarray(self._hess(np.asarray(x, dtype=float)), dtype=float)
        gx, gy = g[..., 0], g[..., 1]
        num = (h[..., 0, 0] * gy**2 - 2.0 * h[..., 0, 1] * gx * gy
               + h[..., 1, 1] * gx**2)
        return num / (gx**2 + gy**2) ** 1.5

    def point_at(self, s):
        if self._point_at is None:
            raise GeometryError(f"curve {self.name!r} has no parametrization")
        return np.asarray(self._point_at(s), dtype=float)

    def param_of_point(self, x):
        if self._param_of_point is None:
            raise GeometryError(f"curve {self.name!r} has no parametrization")
        return self._param_of_point(np.asarray(x, dtype=float))


def line(a, b, c, name=None):
    """The line a*x + b*y = c, with phi the signed distance (minus side ax+by<c)."""
    norm = np.hypot(a, b)
    if norm == 0.0:
        raise ValueError("line coefficients (a, b) must not both vanish")
    an, bn, cn = a / norm, b / norm, c / norm
    nvec = np.array([an, bn])
    tvec = np.array([-bn, an])
    foot = cn * nvec

    def phi(x):
        return x[..., 0] * an + x[..., 1] * bn - cn

    def grad(x):
        return np.broadcast_to(nvec, x.shape).copy()

    return InterfaceCurve(
        phi, grad,
        curvature=lambda x: np.zeros(np.asarray(x).shape[:-1]),
        point_at=lambda s: foot + np.multiply.outer(np.asarray(s, dtype=float), tvec),
        param_of_point=lambda x: x[..., 0] * tvec[0] + x[..., 1] * tvec[1],
        arc_length=None,
        name=name or f"line{{{a},{b},{c}}}",
    )


def circle(cx, cy, radius, name=None):
    """Circle of given center and radius; the minus region is the interior."""
    if radius <= 0.0:
        raise ValueError("circle radius must be positive")
    center = np.array([cx, cy], dtype=float)
    length = 2.0 * np.pi * radius

    def phi(x):
        return np.hypot(x[..., 0] - cx, x[..., 1] - cy) - radius

    def grad(x):
        d = x - center
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        return d / r

    def point_at(s):
        ang = np.asarray(s, dtype=float) / radius
        return center + radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    def param_of_point(x):
        ang = np.arctan2(x[..., 1] - cy, x[..., 0] - cx)
        return np.mod(ang * radius, length)

    return InterfaceCurve(
        phi, grad,
        curvature=lambda x: np.full(np.asarray(x).shape[:-1], 1.0 / radius),
        point_at=point_at,
        param_of_point=param_of_point,
        arc_length=length,
        name=name or f"circle{{{cx},{cy},{radius}}}",
    )


_CURVE_SPEC = re.compile(r"^(line|circle)\{([^}]*)\}$")


def curve_from_name(spec):
    """Parse a curve from catalog syntax: line{a,b,c} or circle{cx,cy,R}."""
    m = _CURVE_SPEC.match(spec.strip())
    if m is None:
        raise ValueError(f"unrecognized curve spec {spec!r}")
    kind, args = m.group(1), [float(v) for v in m.group(2).split(",")]
    if len(args) != 3:
        raise ValueError(f"curve spec {spec!r} needs 3 parameters")
    return line(*args) if kind == "line" else circle(*args)


@dataclass
class GaussLevel:
    """Level-ell chord Gauss points and their projections onto the curve."""

    chord_r: np.ndarray      # (ell+1,) chord coordinates of the Gauss points
    chord_points: np.ndarray  # (ell+1, 2) physical points on the chord
    curve_points: np.ndarray  # (ell+1, 2) projections on the curve
    gamma: np.ndarray        # (ell+1,) signed heights of the projections


@dataclass
class CutElement:
    """All chord-frame geometry of one element crossed by the interface."""

    elem: int
    verts: np.ndarray          # (3, 2) element vertices, CCW
    curve: InterfaceCurve
    degree: int
    point_minus_edge: np.ndarray  # first intersection y
    point_plus_edge: np.ndarray   # second intersection z
    edge_ids: tuple
    midpoint: np.ndarray
    chord_length: float
    tau: np.ndarray
    eta: np.ndarray
    h_elem: float
    levels: list = field(default_factory=list)
    _polygons: dict = field(default_factory=dict)
    area_minus: float = 0.0
    area_plus: float = 0.0

    def chord_to_phys(self, r, s):
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        return self.midpoint + np.multiply.outer(r, self.tau) + np.multiply.outer(s, self.eta)

    def phys_to_chord(self, x):
        d = np.asarray(x, dtype=float) - self.midpoint
        return d @ self.tau, d @ self.eta

    def gamma(self, t):
        """Signed height of the curve over the chord at chord coordinate t."""
        return _project_to_curve(self, float(t))

    def gamma_deriv(self, t, gam=None):
        """d(gamma)/dt from the implicit function theorem."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if gam is None:
            gam = np.array([self.gamma(ti) for ti in t])
        pts = self.chord_to_phys(t, np.atleast_1d(gam))
        g = self.curve.grad_phi(pts)
        return -(g @ self.tau) / (g @ self.eta)

    def polygon(self, side):
        return self._polygons[side]

    @property
    def area(self):
        return _triangle_area(self.verts)


def _triangle_area(verts):
    v0, v1, v2 = verts
    return 0.5 * ((v1[0] - v0[0]) * (v2[1] - v0[1]) - (v1[1] - v0[1]) * (v2[0] - v0[0]))


def _edge_root(curve, a, b, fa, fb):
    """Root of phi along the segment [a, b] given a sign change fa*fb < 0."""
    ta, tb = 0.0, 1.0
    d = b - a
    for _ in range(200):
        tm = 0.5 * (ta + tb)
        fm = float(curve.phi(a + tm * d))
        if fm == 0.0:
            ta = tb = tm
            break
        if (fm < 0.0) == (fa < 0.0):
            ta = tm
        else:
            tb = tm
        # Newton polish once the bracket is small; fall back to bisection
        # whenever the step leaves the bracket.
        if tb - ta < 1e-4:
            t = 0.5 * (ta + tb)
            for _ in range(40):
                x = a + t * d
                f = float(curve.phi(x))
                df = float(curve.grad_phi(x) @ d)
                if df == 0.0:
                    break
                step = f / df
                tn = t - step
                if not ta - 1e-12 <= tn <= tb + 1e-12:
                    break
                if abs(step) < 1e-17:
                    t = tn
                    break
                t = tn
            return a + t * d, t
    t = 0.5 * (ta + tb)
    return a + t * d, t


def edge_intersections(verts, curve, h_elem=None):
    """Intersections of the curve with the element boundary.

    Returns a list of (point, local_edge_id) pairs with 0 or 2 entries.
    Raises GeometryError when the sign pattern implies more than two
    crossings or two crossings on a single edge.
    """
    verts = np.asarray(verts, dtype=float)
    if h_elem is None:
        h_elem = max(np.linalg.norm(verts[i] - verts[(i + 1) % 3]) for i in range(3))
    hits = []
    for e in range(3):
        a, b = verts[e], verts[(e + 1) % 3]
        ts = np.linspace(0.0, 1.0, EDGE_SAMPLES + 2)
        samples = a + np.multiply.outer(ts, b - a)
        fvals = curve.phi(samples)
        signs = np.sign(fvals)
        crossings = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
        if len(crossings) > 1 or np.any(signs[1:-1] == 0.0):
            raise GeometryError(
                f"interface crosses one edge of an element more than once "
                f"(edge {e}); refine the mesh near the interface"
            )
        if len(crossings) == 1:
            i = crossings[0]
            pt, t_local = _edge_root(curve, samples[i], samples[i + 1],
                                     fvals[i], fvals[i + 1])
            t = (ts[i] + t_local * (ts[i + 1] - ts[i]))
            hits.append((pt, e, t))
    if len(hits) == 0:
        return []
    if len(hits) != 2:
        raise GeometryError(
            f"interface crosses an element boundary at {len(hits)} points; "
            f"refine the mesh near the interface"
        )
    if hits[0][1] == hits[1][1]:
        raise GeometryError(
            "both interface crossings fall on one element edge; "
            "refine the mesh near the interface"
        )
    return [(h[0], h[1]) for h in hits]


def _near_vertex(point, verts, h_elem):
    return min(np.linalg.norm(point - v) for v in verts) < VERTEX_TOL * h_elem


@dataclass
class Classification:
    """Partition of mesh elements against the interface."""

    cut: list
    interior_minus: list
    interior_plus: list
    intersections: dict  # elem -> list of (point, edge_id)


def classify_elements(mesh, curve):
    """Classify every element as cut, interior-minus or interior-plus.

    Uncut elements take the sign of phi at their centroid.  Elements whose
    intersection points hug a vertex closer than 1e-9 h_T are treated as
    uncut; the crossing belongs to the neighbor.
    """
    verts = mesh.vertices[mesh.triangles]          # (NT, 3, 2)
    phi_v = curve.phi(verts)                       # (NT, 3)
    centroids = verts.mean(axis=1)
    phi_c = curve.phi(centroids)
    mids = 0.5 * (verts + np.roll(verts, -1, axis=1))
    phi_m = curve.phi(mids)

    sample_min = np.minimum(phi_v.min(axis=1), np.minimum(phi_m.min(axis=1), phi_c))
    sample_max = np.maximum(phi_v.max(axis=1), np.maximum(phi_m.max(axis=1), phi_c))
    near = VERTEX_TOL * mesh.h_elem
    candidates = np.nonzero((sample_min < near) & (sample_max > -near))[0]

    cut, minus, plus = [], [], []
    intersections = {}
    plain = np.ones(len(mesh.triangles), dtype=bool)
    plain[candidates] = False
    for e in np.nonzero(plain)[0]:
        (minus if phi_c[e] <= 0.0 else plus).append(int(e))

    for e in candidates:
        e = int(e)
        tri = verts[e]
        try:
            hits = edge_intersections(tri, curve, mesh.h_elem[e])
        except GeometryError as err:
            raise GeometryError(f"element {e}: {err}") from None
        degenerate = any(_near_vertex(p, tri, mesh.h_elem[e]) for p, _ in hits)
        if len(hits) == 2 and not degenerate:
            cut.append(e)
            intersections[e] = hits
        else:
            (minus if phi_c[e] <= 0.0 else plus).append(e)
    return Classification(cut, minus, plus, intersections)


def _project_to_curve(cut, t):
    """Root of phi along the eta-line through chord coordinate t."""
    base = cut.midpoint + t * cut.tau
    curve, eta = cut.curve, cut.eta
    tol = PROJECTION_TOL * cut.h_elem

    g = 0.0
    f = float(curve.phi(base))
    if abs(f) <= tol:
        return 0.0
    converged = False
    for _ in range(60):
        x = base + g * eta
        f = float(curve.phi(x))
        if abs(f) <= 1e-2 * tol:
            converged = True
            break
        df = float(curve.grad_phi(x) @ eta)
        if df == 0.0 or abs(g) > cut.h_elem:
            break
        g -= f / df
    if converged and abs(g) <= cut.h_elem:
        return g

    # Newton failed: bracketed bisection over the eta range inside the element.
    span = np.linspace(-cut.h_elem, cut.h_elem, 81)
    vals = curve.phi(base + np.multiply.outer(span, eta))
    sign_change = np.nonzero(vals[:-1] * vals[1:] <= 0.0)[0]
    if len(sign_change) == 0:
        raise GeometryError(
            f"element {cut.elem}: projection onto the curve failed to bracket "
            f"(curve leaves the element through the sliver side)"
        )
    i = sign_change[np.argmin(np.abs(span[sign_change]))]
    lo, hi = span[i], span[i + 1]
    flo = float(vals[i])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = float(curve.phi(base + mid * eta))
        if abs(fm) <= tol or hi - lo < 1e-17 * cut.h_elem:
            return mid
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sliver_height(cut, t):
    """Signed distance from the chord to the curve along eta at coordinate t."""
    if abs(t) > 0.5 * cut.chord_length * (1.0 + 1e-12):
        raise ValueError("chord coordinate outside [-r_T/2, r_T/2]")
    return cut.gamma(t)


def _boundary_chains(verts, hits):
    """Split the element boundary at the two intersections into two chains.

    Walking the boundary CCW and inserting the intersection points yields two
    vertex chains; closing each with the chord gives the two straight
    polygons (one triangle, one quadrilateral in the generic case).
    """
    (p0, e0), (p1, e1) = hits
    cycle = []
    for e in range(3):
        cycle.append(("v", verts[e]))
        if e == e0:
            cycle.append(("cut", p0))
        if e == e1:
            cycle.append(("cut", p1))
    cut_pos = [i for i, (kind, _) in enumerate(cycle) if kind == "cut"]
    i, j = cut_pos
    chain_a = [pt for _, pt in cycle[i:j + 1]]
    chain_b = [pt for _, pt in (cycle[j:] + cycle[:i + 1])]
    return np.array(chain_a), np.array(chain_b)


def cut_element(mesh, elem, curve, degree, hits=None):
    """Build the full cut geometry for one element.

    ``hits`` are the precomputed edge intersections; they are recomputed when
    absent.  The eta axis is oriented with the curve normal at the midpoint
    projection, so it points out of the minus region.
    """
    verts = mesh.vertices[mesh.triangles[elem]]
    h_elem = mesh.h_elem[elem]
    if hits is None:
        hits = edge_intersections(verts, curve, h_elem)
        if len(hits) != 2:
            raise GeometryError(f"element {elem} is not crossed by the interface")
    (y, e0), (z, e1) = hits
    chord = z - y
    r_len = float(np.linalg.norm(chord))
    if r_len < VERTEX_TOL * h_elem:
        raise GeometryError(f"element {elem}: degenerate chord of length {r_len:g}")
    u = chord / r_len
    eta = np.array([u[1], -u[0]])
    mid = 0.5 * (y + z)

    cut = CutElement(
        elem=int(elem), verts=verts, curve=curve, degree=degree,
        point_minus_edge=y, point_plus_edge=z, edge_ids=(e0, e1),
        midpoint=mid, chord_length=r_len, tau=np.array([-eta[1], eta[0]]),
        eta=eta, h_elem=h_elem,
    )
    # Fix the eta orientation against the curve normal at the midpoint
    # projection, then tau = eta rotated +90 degrees.
    g_mid = cut.gamma(0.0)
    n_mid = curve.normal(mid + g_mid * eta)
    if float(n_mid @ eta) < 0.0:
        eta = -eta
        cut.eta = eta
        cut.tau = np.array([-eta[1], eta[0]])

    for ell in range(degree + 1):
        gl = gauss_legendre(ell + 1)
        r = 0.5 * r_len * gl.points
        chord_pts = cut.chord_to_phys(r, np.zeros_like(r))
        gam = np.array([cut.gamma(ri) for ri in r])
        curve_pts = cut.chord_to_phys(r, gam)
        resid = np.abs(curve.phi(curve_pts))
        if np.any(resid > 10.0 * PROJECTION_TOL * max(h_elem, 1.0)):
            raise GeometryError(
                f"element {elem}: Gauss projection residual {resid.max():.2e}"
            )
        cut.levels.append(GaussLevel(r, chord_pts, curve_pts, gam))

    chain_a, chain_b = _boundary_chains(verts, hits)
    phi_a = max(float(curve.phi(p)) for p in chain_a[1:-1])
    cut._polygons[-1 if phi_a <= 0.0 else 1] = chain_a
    cut._polygons[1 if phi_a <= 0.0 else -1] = chain_b

    one = lambda pts: np.ones(len(pts))
    cut.area_minus = integrate_cut_region(cut, -1, one, n=degree + 2, poly_degree=2)
    cut.area_plus = integrate_cut_region(cut, 1, one, n=degree + 2, poly_degree=2)
    return cut


def build_cut_elements(mesh, curve, degree, classification=None):
    """Cut geometry for every crossed element of the mesh."""
    if classification is None:
        classification = classify_elements(mesh, curve)
    return {
        e: cut_element(mesh, e, curve, degree, hits=classification.intersections[e])
        for e in classification.cut
    }
