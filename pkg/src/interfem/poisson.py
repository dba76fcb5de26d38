"""Degree-k Lagrange finite elements for the Poisson interface problem.

The stiffness matrix is the standard one and never sees the interface; the
interface enters only through the right-hand side, via the flux line
integral and the correction-function volume terms on cut elements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .correction import build_correction, jumps_from_tables
from .errors import InterfemError, SolverError
from .geometry import build_cut_elements, classify_elements
from .jumps import build_jump_entries, evaluate_entries
from .lagrange import ElementBasis, reference_basis
from .mesh import build_dof_map
from .quadrature import (cut_region_quadrature, interface_quadrature,
                         map_rule_to_triangle, triangle_rule)
from .sparse import CSRMatrix, constrain_system, solve_spd


class FESpace:
    """Continuous degree-k Lagrange space on a triangulation.

    Caches the reference basis at quadrature points and the per-element
    affine geometry, so assembly and error loops are vectorized across
    elements.
    """

    def __init__(self, mesh, degree):
        self.mesh = mesh
        self.degree = degree
        self.dofmap = build_dof_map(mesh, degree)
        self.ref = reference_basis(degree)

        v = mesh.vertices[mesh.triangles]            # (NT, 3, 2)
        jac = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1]
        inv[:, 0, 1] = -jac[:, 0, 1]
        inv[:, 1, 0] = -jac[:, 1, 0]
        inv[:, 1, 1] = jac[:, 0, 0]
        inv /= det[:, None, None]
        self.v0 = v[:, 0]
        self.jac = jac
        self.jac_inv = inv
        self.det = det
        self.centroids = v.mean(axis=1)
        self.boundary_dofs = np.nonzero(self.dofmap.boundary)[0]
        self._rules = {}

    @property
    def n_dofs(self):
        return self.dofmap.n_nodes

    def rule_data(self, degree):
        """(ref points, weights, basis values, reference gradients)."""
        if degree not in self._rules:
            rule = triangle_rule(degree)
            vals = self.ref.eval(rule.points)
            grads = self.ref.grad(rule.points)
            self._rules[degree] = (rule.points, rule.weights, vals, grads)
        return self._rules[degree]

    def physical_points(self, ref_points):
        """Map reference points to every element: (NT, nq, 2)."""
        return self.v0[:, None, :] + np.einsum("qr,erd->eqd", ref_points, self.jac)

    def element_basis(self, e):
        return ElementBasis(self.mesh.vertices[self.mesh.triangles[e]], self.degree)


@dataclass
class DiscreteField:
    """Coefficient vector over the global Lagrange nodes."""

    coeffs: np.ndarray
    space: FESpace
    corrections: dict = field(default_factory=dict)  # elem -> CorrectionFunction

    def eval_on_elements(self, rule_degree):
        """Values and gradients at the rule points of every element."""
        pts, w, vals, grads = self.space.rule_data(rule_degree)
        nodal = self.coeffs[self.space.dofmap.elem_nodes]          # (NT, nb)
        gphys = np.einsum("qib,ebd->eqid", grads, self.space.jac_inv)
        return (np.einsum("ei,qi->eq", nodal, vals),
                np.einsum("ei,eqid->eqd", nodal, gphys))


@dataclass
class ExactSolution:
    """Two-sided solution providers; gradients optional for interpolation."""

    u_minus: callable
    u_plus: callable
    grad_minus: callable = None
    grad_plus: callable = None

    def side_values(self, points, phi):
        points = np.atleast_2d(points)
        vals = np.empty(len(points))
        neg = phi <= 0.0
        if np.any(neg):
            vals[neg] = self.u_minus(points[neg])
        if np.any(~neg):
            vals[~neg] = self.u_plus(points[~neg])
        return vals

    def side_gradients(self, points, phi):
        points = np.atleast_2d(points)
        out = np.empty((len(points), 2))
        neg = phi <= 0.0
        if np.any(neg):
            out[neg] = self.grad_minus(points[neg])
        if np.any(~neg):
            out[~neg] = self.grad_plus(points[~neg])
        return out


def interpolate(exact, space, curve=None):
    """Nodal interpolant taking minus-side values at nodes on the curve."""
    nodes = space.dofmap.nodes
    if curve is None:
        coeffs = np.asarray(exact.u_minus(nodes), dtype=float)
    else:
        coeffs = exact.side_values(nodes, curve.phi(nodes))
    return DiscreteField(coeffs, space)


def assemble_stiffness(space, constrained=True):
    """Stiffness matrix of the bilinear form grad(u).grad(v).

    With `constrained`, boundary rows and columns are replaced by the
    identity.  The matrix never depends on any interface.
    """
    pts, w, vals, grads = space.rule_data(2 * space.degree)
    gphys = np.einsum("qib,ebd->eqid", grads, space.jac_inv)
    local = np.einsum("q,e,eqid,eqjd->eij", w, np.abs(space.det), gphys, gphys)
    en = space.dofmap.elem_nodes
    nb = en.shape[1]
    rows = np.repeat(en, nb, axis=1).ravel()
    cols = np.tile(en, (1, nb)).ravel()
    mat = CSRMatrix.from_coo(rows, cols, local.ravel(), (space.n_dofs, space.n_dofs))
    if not constrained:
        return mat
    free_rhs = np.zeros(space.n_dofs)
    mat, _ = constrain_system(mat, free_rhs, space.boundary_dofs,
                              np.zeros(len(space.boundary_dofs)))
    return mat


def _beta_values(beta_arc, curve, points):
    s = curve.param_of_point(points)
    return np.array([beta_arc(float(si)) for si in np.atleast_1d(s)])


def assemble_rhs(space, f_minus, f_plus, beta=None, curve=None,
                 classification=None, cuts=None, corrections=None,
                 quad_n=None):
    """Load vector: volume term, interface flux term and correction terms.

    On cut elements the volume term is side-aware; `corrections`, when
    given, must hold a correction function for every cut element.  Boundary
    entries are zeroed (Dirichlet values enter through the system
    constraint).
    """
    k = space.degree
    if quad_n is None:
        quad_n = k + 2
    load_degree = 2 * k + 2
    pts_ref, w, vals, _ = space.rule_data(load_degree)
    phys = space.physical_points(pts_ref)

    cut_ids = list(classification.cut) if classification is not None else []
    if corrections is not None:
        missing = [e for e in cut_ids if e not in corrections]
        if missing:
            raise InterfemError(f"missing correction for cut elements {missing}")

    if curve is None:
        side_minus = np.ones(space.mesh.n_triangles, dtype=bool)
    else:
        side_minus = curve.phi(space.centroids) <= 0.0

    b = np.zeros(space.n_dofs)
    flat = phys.reshape(-1, 2)
    fvals = np.empty(len(flat))
    mask = np.repeat(side_minus, len(w))
    if np.any(mask):
        fvals[mask] = f_minus(flat[mask])
    if np.any(~mask):
        fvals[~mask] = f_plus(flat[~mask])
    fvals = fvals.reshape(phys.shape[:2])
    uncut = np.ones(space.mesh.n_triangles, dtype=bool)
    uncut[cut_ids] = False
    local = np.einsum("q,e,eq,qi->ei", w, np.abs(space.det), fvals, vals)
    local[~uncut] = 0.0
    np.add.at(b, space.dofmap.elem_nodes, local)

    en = space.dofmap.elem_nodes
    for e in cut_ids:
        cut = cuts[e]
        basis = space.element_basis(e)
        bloc = np.zeros(en.shape[1])
        for side, f in ((-1, f_minus), (1, f_plus)):
            qpts, qw = cut_region_quadrature(cut, side, n=quad_n,
                                             poly_degree=load_degree)
            bloc += np.asarray(f(qpts), dtype=float) * qw @ basis.eval(qpts)
            if corrections is not None:
                gw = corrections[e].grad(qpts, side)
                bloc -= np.einsum("q,qd,qid->i", qw, gw, basis.grad(qpts))
        if beta is not None:
            ipts, iw = interface_quadrature(cut, n=quad_n)
            bloc += (_beta_values(beta, curve, ipts) * iw) @ basis.eval(ipts)
        np.add.at(b, en[e], bloc)

    b[space.boundary_dofs] = 0.0
    return b


@dataclass
class PoissonProblem:
    """Everything needed for one interface Poisson solve."""

    mesh: object
    degree: int
    f_minus: callable
    f_plus: callable = None
    curve: object = None
    beta: object = None                 # ArcFunction flux datum
    interface_data: object = None       # InterfaceData for the jump tables
    dirichlet: ExactSolution = None     # None means homogeneous
    corrections_enabled: bool = True
    solver_tol: float = 1e-12
    quad_n: int = None

    def __post_init__(self):
        if self.f_plus is None:
            self.f_plus = self.f_minus


def build_poisson_corrections(mesh, curve, cuts, data, k):
    """Correction functions from the jump recurrence, per cut element."""
    entries = build_jump_entries(data, k)
    corrections = {}
    for e, cut in cuts.items():
        tables = []
        for ell in range(k + 1):
            lev = cut.levels[ell]
            row = []
            for i in range(ell + 1):
                s = float(curve.param_of_point(lev.curve_points[i]))
                row.append(evaluate_entries(entries, curve, s, k))
            tables.append(row)
        jumps = jumps_from_tables(cut, tables, k)
        basis = ElementBasis(mesh.vertices[mesh.triangles[e]], k)
        corrections[e] = build_correction(cut, jumps, k, basis)
    return corrections


@dataclass
class SolveInfo:
    residual: float
    n_dofs: int
    n_cut: int


def solve_poisson(problem):
    """Assemble and solve; returns (DiscreteField, SolveInfo)."""
    space = FESpace(problem.mesh, problem.degree)
    classification = None
    cuts = {}
    corrections = None
    if problem.curve is not None:
        classification = classify_elements(problem.mesh, problem.curve)
        cuts = build_cut_elements(problem.mesh, problem.curve, problem.degree,
                                  classification)
        if problem.corrections_enabled and problem.interface_data is not None:
            corrections = build_poisson_corrections(
                problem.mesh, problem.curve, cuts, problem.interface_data,
                problem.degree)

    a_raw = assemble_stiffness(space, constrained=False)
    b = assemble_rhs(space, problem.f_minus, problem.f_plus, beta=problem.beta,
                     curve=problem.curve, classification=classification,
                     cuts=cuts, corrections=corrections, quad_n=problem.quad_n)

    if problem.dirichlet is None:
        bd_vals = np.zeros(len(space.boundary_dofs))
    else:
        bd_nodes = space.dofmap.nodes[space.boundary_dofs]
        if problem.curve is None:
            bd_vals = np.asarray(problem.dirichlet.u_minus(bd_nodes), dtype=float)
        else:
            bd_vals = problem.dirichlet.side_values(bd_nodes,
                                                    problem.curve.phi(bd_nodes))
    a_c, b_c = constrain_system(a_raw, b, space.boundary_dofs, bd_vals)
    x = solve_spd(a_c, b_c, tol=problem.solver_tol)

    bnorm = float(np.linalg.norm(b_c))
    residual = float(np.linalg.norm(a_c @ x - b_c)) / (bnorm if bnorm else 1.0)
    if residual > max(problem.solver_tol, 1e-12):
        raise SolverError(f"Poisson solve residual {residual:.3e} above tolerance")
    field = DiscreteField(x, space, corrections or {})
    return field, SolveInfo(residual, space.n_dofs, len(cuts))


@dataclass
class ErrorReport:
    l2: float
    linf: float
    h1: float
    w1inf: float

    def as_dict(self, prefix=""):
        return {prefix + "l2": self.l2, prefix + "linf": self.linf,
                prefix + "h1": self.h1, prefix + "w1inf": self.w1inf}


def compute_errors(field, exact, curve=None, mode="vs-interpolant",
                   corrections=None, quad_n=None):
    """Error norms of a discrete field.

    mode='vs-interpolant' measures u_h - I_h u (the quantity whose optimal
    rates the method guarantees); mode='corrected' measures
    u - (u_h + correction) with side-aware quadrature on cut elements.
    """
    space = field.space
    k = space.degree
    rule_degree = 2 * k + 2
    if quad_n is None:
        quad_n = k + 3

    if mode == "vs-interpolant":
        ih = interpolate(exact, space, curve)
        diff = DiscreteField(field.coeffs - ih.coeffs, space)
        vals, grads = diff.eval_on_elements(rule_degree)
        _, w, _, _ = space.rule_data(rule_degree)
        areas = np.abs(space.det)
        l2 = float(np.sqrt(np.einsum("q,e,eq->", w, areas, vals**2)))
        h1 = float(np.sqrt(np.einsum("q,e,eqd->", w, areas, grads**2)))
        return ErrorReport(l2, float(np.abs(vals).max()), h1,
                           float(np.abs(grads).max()))

    if mode != "corrected":
        raise ValueError(f"unknown error mode {mode!r}")
    if curve is None:
        raise ValueError("corrected errors need the interface curve")
    corrections = corrections if corrections is not None else field.corrections

    pts_ref, w, vals_ref, grads_ref = space.rule_data(rule_degree)
    phys = space.physical_points(pts_ref)
    nodal = field.coeffs[space.dofmap.elem_nodes]
    uh_vals = np.einsum("ei,qi->eq", nodal, vals_ref)
    gphys = np.einsum("qib,ebd->eqid", grads_ref, space.jac_inv)
    uh_grads = np.einsum("ei,eqid->eqd", nodal, gphys)

    cls = classify_elements(space.mesh, curve)
    uncut = np.ones(space.mesh.n_triangles, dtype=bool)
    uncut[cls.cut] = False
    side_minus = curve.phi(space.centroids) <= 0.0

    flat = phys.reshape(-1, 2)
    phi_flat = np.where(np.repeat(side_minus, len(w)), -1.0, 1.0)
    ex_vals = exact.side_values(flat, phi_flat).reshape(uh_vals.shape)
    ex_grads = exact.side_gradients(flat, phi_flat).reshape(uh_grads.shape)

    dv = (ex_vals - uh_vals)[uncut]
    dg = (ex_grads - uh_grads)[uncut]
    areas = np.abs(space.det)[uncut]
    l2sq = float(np.einsum("q,e,eq->", w, areas, dv**2))
    h1sq = float(np.einsum("q,e,eqd->", w, areas, dg**2))
    linf = float(np.abs(dv).max()) if dv.size else 0.0
    w1inf = float(np.abs(dg).max()) if dg.size else 0.0

    en = space.dofmap.elem_nodes
    for e in cls.cut:
        cut = field.corrections[e].cut if e in corrections else None
        basis = space.element_basis(e)
        cf = corrections.get(e)
        for side, uf, gf in ((-1, exact.u_minus, exact.grad_minus),
                             (1, exact.u_plus, exact.grad_plus)):
            qpts, qw = cut_region_quadrature(
                cut if cut is not None else _cut_for(space, curve, e, k),
                side, n=quad_n, poly_degree=rule_degree)
            uh = basis.eval(qpts) @ field.coeffs[en[e]]
            guh = np.einsum("qid,i->qd", basis.grad(qpts), field.coeffs[en[e]])
            if cf is not None:
                uh = uh + cf.value(qpts, side)
                guh = guh + cf.grad(qpts, side)
            dvq = np.asarray(uf(qpts), dtype=float) - uh
            dgq = np.asarray(gf(qpts), dtype=float) - guh
            l2sq += float(qw @ dvq**2)
            h1sq += float(np.einsum("q,qd->", qw, dgq**2))
            linf = max(linf, float(np.abs(dvq).max()))
            w1inf = max(w1inf, float(np.abs(dgq).max()))
    return ErrorReport(float(np.sqrt(l2sq)), linf, float(np.sqrt(h1sq)), w1inf)


def _cut_for(space, curve, e, k):
    from .geometry import cut_element
    return cut_element(space.mesh, e, curve, k)
