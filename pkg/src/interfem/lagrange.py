"""Reference Lagrange bases on the triangle and their per-element evaluators."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .mesh import reference_nodes


def _monomial_exponents(k):
    return [(a, b) for a in range(k + 1) for b in range(k + 1 - a)]


@lru_cache(maxsize=None)
def _basis_coefficients(k):
    """Coefficient matrix C with N_i(x) = sum_m C[m, i] x^a y^b."""
    nodes = reference_nodes(k)
    exps = _monomial_exponents(k)
    vand = np.column_stack([nodes[:, 0] ** a * nodes[:, 1] ** b for a, b in exps])
    return np.linalg.inv(vand), exps


class ReferenceBasis:
    """Degree-k Lagrange basis on the unit reference triangle."""

    def __init__(self, k):
        self.degree = k
        self.nodes = reference_nodes(k)
        self.n_basis = len(self.nodes)
        self._coeff, self._exps = _basis_coefficients(k)

    def eval(self, points):
        """Basis values at reference points (m, 2) -> (m, n_basis)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        vand = np.column_stack([p[:, 0] ** a * p[:, 1] ** b for a, b in self._exps])
        return vand @ self._coeff

    def grad(self, points):
        """Basis gradients at reference points -> (m, n_basis, 2)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = p[:, 0], p[:, 1]
        dx = np.column_stack([
            a * x ** max(a - 1, 0) * y ** b if a else np.zeros(len(p))
            for a, b in self._exps])
        dy = np.column_stack([
            b * x ** a * y ** max(b - 1, 0) if b else np.zeros(len(p))
            for a, b in self._exps])
        return np.stack([dx @ self._coeff, dy @ self._coeff], axis=-1)


@lru_cache(maxsize=None)
def reference_basis(k):
    return ReferenceBasis(k)


class ElementBasis:
    """Lagrange basis of one physical element.

    Wraps the reference basis with the affine map of the triangle; `nodes`
    are the physical Lagrange points in the local ordering.
    """

    def __init__(self, verts, k):
        self.verts = np.asarray(verts, dtype=float)
        self.ref = reference_basis(k)
        v0, v1, v2 = self.verts
        self.jac = np.column_stack([v1 - v0, v2 - v0])
        self.jac_inv = np.linalg.inv(self.jac)
        self.det = float(np.linalg.det(self.jac))
        lam = self.ref.nodes
        self.nodes = (np.outer(1.0 - lam[:, 0] - lam[:, 1], v0)
                      + np.outer(lam[:, 0], v1) + np.outer(lam[:, 1], v2))

    def to_reference(self, x):
        return (np.atleast_2d(np.asarray(x, dtype=float)) - self.verts[0]) @ self.jac_inv.T

    def eval(self, x):
        return self.ref.eval(self.to_reference(x))

    def grad(self, x):
        g = self.ref.grad(self.to_reference(x))
        return g @ self.jac_inv
