"""Compressed-row sparse matrices and the two iterative solvers used by the
assembly: preconditioned conjugate gradients for symmetric positive definite
systems and preconditioned MINRES for the symmetric indefinite saddle
systems.  Everything is plain numpy and fully deterministic.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverError


class CSRMatrix:
    """Compressed sparse row matrix with strictly increasing column indices
    per row."""

    def __init__(self, indptr, indices, data, shape):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=float)
        self.shape = tuple(shape)

    @staticmethod
    def from_coo(rows, cols, vals, shape):
        """Build from coordinate triplets, summing duplicates."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if len(rows):
            new = np.empty(len(rows), dtype=bool)
            new[0] = True
            new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.nonzero(new)[0]
            rows, cols = rows[starts], cols[starts]
            vals = np.add.reduceat(vals, starts)
        indptr = np.zeros(shape[0] + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        np.cumsum(indptr, out=indptr)
        return CSRMatrix(indptr, cols, vals, shape)

    def matvec(self, x):
        contrib = self.data * x[self.indices]
        starts = np.minimum(self.indptr[:-1], max(len(contrib) - 1, 0))
        if len(contrib) == 0:
            return np.zeros(self.shape[0])
        out = np.add.reduceat(contrib, starts)
        out[np.diff(self.indptr) == 0] = 0.0
        return out

    def __matmul__(self, x):
        return self.matvec(np.asarray(x, dtype=float))

    def diagonal(self):
        d = np.zeros(min(self.shape))
        rows = np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))
        on_diag = rows == self.indices
        d[rows[on_diag]] = self.data[on_diag]
        return d

    def to_dense(self):
        dense = np.zeros(self.shape)
        rows = np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))
        dense[rows, self.indices] = self.data
        return dense

    def max_asymmetry(self):
        """max |A - A^T| entrywise; meant for tests."""
        at = self.transpose()
        if (not np.array_equal(self.indptr, at.indptr)
                or not np.array_equal(self.indices, at.indices)):
            return np.inf
        if len(self.data) == 0:
            return 0.0
        return float(np.max(np.abs(self.data - at.data)))

    def transpose(self):
        rows = np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))
        return CSRMatrix.from_coo(self.indices, rows, self.data,
                                  (self.shape[1], self.shape[0]))

    def to_matrixmarket(self):
        """Coordinate-format MatrixMarket text (1-based indices)."""
        rows = np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))
        lines = ["%%MatrixMarket matrix coordinate real general",
                 f"{self.shape[0]} {self.shape[1]} {len(self.data)}"]
        for r, c, v in zip(rows, self.indices, self.data):
            lines.append(f"{r + 1} {c + 1} {v:.17g}")
        return "\n".join(lines) + "\n"


def constrain_system(matrix, rhs, fixed_idx, fixed_vals):
    """Symmetric elimination of Dirichlet values.

    Moves coupling with the fixed dofs to the right-hand side, zeroes their
    rows and columns, and puts 1 on their diagonal so the system stays
    symmetric (and definite when the free block is).  Returns (matrix, rhs).
    """
    n = matrix.shape[0]
    fixed = np.zeros(n, dtype=bool)
    fixed[fixed_idx] = True
    g = np.zeros(n)
    g[fixed_idx] = fixed_vals

    rhs = rhs - matrix @ g
    rows = np.repeat(np.arange(n), np.diff(matrix.indptr))
    keep = ~fixed[rows] & ~fixed[matrix.indices]
    rows2 = np.concatenate([rows[keep], np.nonzero(fixed)[0]])
    cols2 = np.concatenate([matrix.indices[keep], np.nonzero(fixed)[0]])
    vals2 = np.concatenate([matrix.data[keep], np.ones(fixed.sum())])
    out = CSRMatrix.from_coo(rows2, cols2, vals2, matrix.shape)
    rhs[fixed] = g[fixed]
    return out, rhs


def solve_spd(matrix, rhs, tol=1e-12, maxiter=None, diag=None):
    """Jacobi-preconditioned conjugate gradients.

    Parameters
    ----------
    matrix : CSRMatrix
        Symmetric positive definite system matrix.
    rhs : array
        Right-hand side.
    tol : float
        Relative residual target |A x - b| <= tol |b|.
    maxiter : int
        Iteration cap, default 10 * dim.
    diag : array, optional
        Preconditioner diagonal; defaults to the matrix diagonal.

    Returns the solution vector; raises SolverError with the residual
    history when the cap is exceeded.
    """
    b = np.asarray(rhs, dtype=float)
    n = len(b)
    if maxiter is None:
        maxiter = 10 * n
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n)
    if diag is None:
        diag = matrix.diagonal()
    inv_diag = 1.0 / diag

    x = np.zeros(n)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    history = []
    for _ in range(maxiter):
        res = float(np.linalg.norm(r))
        history.append(res)
        if res <= tol * bnorm:
            return x
        ap = matrix @ p
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if float(np.linalg.norm(matrix @ x - b)) <= tol * bnorm:
        return x
    raise SolverError(
        f"conjugate gradients: no convergence in {maxiter} iterations "
        f"(relative residual {history[-1] / bnorm:.3e})", residuals=history[-10:])


def solve_saddle(matrix, rhs, tol=1e-10, maxiter=None, precond_diag=None):
    """Preconditioned MINRES for symmetric (indefinite) systems.

    The preconditioner is diagonal and must be positive; pass the velocity
    block diagonal, a pressure mass diagonal and O(1) entries for any
    multiplier rows.  Raises SolverError on breakdown or iteration cap.
    """
    b = np.asarray(rhs, dtype=float)
    n = len(b)
    if maxiter is None:
        maxiter = 10 * n
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n)
    if precond_diag is None:
        m_inv = np.ones(n)
    else:
        precond_diag = np.asarray(precond_diag, dtype=float)
        if np.any(precond_diag <= 0.0):
            raise SolverError("saddle preconditioner diagonal must be positive")
        m_inv = 1.0 / precond_diag

    x = np.zeros(n)
    r1 = b.copy()
    y = m_inv * r1
    beta1 = float(r1 @ y)
    if beta1 < 0.0:
        raise SolverError("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)

    oldb, beta = 0.0, beta1
    dbar, epsln = 0.0, 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1.copy()
    history = []

    for itn in range(1, maxiter + 1):
        s = 1.0 / beta
        v = s * y
        y = matrix @ v
        if itn >= 2:
            y -= (beta / oldb) * r1
        alfa = float(v @ y)
        y -= (alfa / beta) * r2
        r1, r2 = r2, y
        y = m_inv * r2
        oldb, beta = beta, float(r2 @ y)
        if beta < 0.0:
            raise SolverError("preconditioner breakdown in MINRES")
        beta = np.sqrt(beta)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta

        gamma = np.hypot(gbar, beta)
        gamma = max(gamma, np.finfo(float).eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x += phi * w

        history.append(abs(phibar))
        if abs(phibar) <= tol * bnorm:
            true_res = float(np.linalg.norm(matrix @ x - b))
            if true_res <= 10.0 * tol * bnorm:
                return x
    true_res = float(np.linalg.norm(matrix @ x - b))
    if true_res <= tol * bnorm:
        return x
    raise SolverError(
        f"MINRES: no convergence in {maxiter} iterations "
        f"(relative residual {true_res / bnorm:.3e})", residuals=history[-10:])
