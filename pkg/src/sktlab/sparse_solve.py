"""Backward-Euler diffusion matrices and a Jacobi-preconditioned CG solver."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .mesh import Grid

DEFAULT_REL_TOL = 1e-10


class SolverError(RuntimeError):
    """CG did not reach the requested residual."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    residual: float


class _Stencil:
    """CSR pattern of the 2n+1 point operator on a grid, built once per grid."""

    def __init__(self, grid: Grid):
        n = grid.size
        idx = np.arange(n).reshape(grid.shape)
        self.faces = []  # (left, right) flat indices of interior faces, per axis
        rows, cols = [np.arange(n)], [np.arange(n)]
        for k in range(grid.dim):
            lo = np.take(idx, np.arange(grid.cells[k] - 1), axis=k).ravel()
            hi = np.take(idx, np.arange(1, grid.cells[k]), axis=k).ravel()
            self.faces.append((lo, hi))
            rows += [lo, hi]
            cols += [hi, lo]
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        order = np.lexsort((cols, rows))
        self.indptr = np.searchsorted(rows[order], np.arange(n + 1)).astype(np.int32)
        self.indices = cols[order].astype(np.int32)
        # slot[j] = position in the CSR data array of the j-th (row, col) entry
        self.slot = np.empty_like(order)
        self.slot[order] = np.arange(order.size)
        self.n = n
        self.face_shapes = [
            tuple(c - 1 if j == k else c for j, c in enumerate(grid.cells)) for k in range(grid.dim)
        ]

    def build(self, diag: np.ndarray, face_weights: list) -> sp.csr_matrix:
        data = [diag]
        for w in face_weights:
            data += [-w, -w]
        data = np.concatenate(data)
        out = np.empty_like(data)
        out[self.slot] = data
        return sp.csr_matrix((out, self.indices, self.indptr), shape=(self.n, self.n))


@lru_cache(maxsize=64)
def stencil(grid: Grid) -> _Stencil:
    return _Stencil(grid)


def face_average(grid: Grid, cell_values: np.ndarray) -> tuple:
    """Arithmetic mean of neighbouring cell values on every interior face."""
    cell_values = np.asarray(cell_values, dtype=float)
    out = []
    for k in range(grid.dim):
        n = grid.cells[k]
        lo = np.take(cell_values, np.arange(n - 1), axis=k)
        hi = np.take(cell_values, np.arange(1, n), axis=k)
        out.append(0.5 * (lo + hi))
    return tuple(out)


def assemble_implicit_step(grid: Grid, face_diffusivity, cell_reaction, dt: float) -> sp.csr_matrix:
    """``I/dt + K(D) + diag(c)`` for one backward-Euler step with zero-flux walls.

    ``face_diffusivity`` holds one array per axis over the interior faces
    (``cells[k] - 1`` entries along axis ``k``); ``cell_reaction`` is a cell array.
    Rows are scaled per unit cell volume, so face ``f`` between cells ``i`` and
    ``j`` contributes ``D_f / h_k**2`` to both diagonals and ``-D_f / h_k**2``
    off the diagonal.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    st = stencil(grid)
    reaction = np.broadcast_to(np.asarray(cell_reaction, dtype=float), grid.shape).ravel()
    if np.any(reaction < 0):
        raise ValueError("coefficient sign")
    diag = np.full(grid.size, 1.0 / dt) + reaction
    weights = []
    for k, D in enumerate(face_diffusivity):
        D = np.broadcast_to(np.asarray(D, dtype=float), st.face_shapes[k]).ravel()
        if np.any(D < 0):
            raise ValueError("coefficient sign")
        w = D / grid.h[k] ** 2
        lo, hi = st.faces[k]
        diag += np.bincount(lo, w, grid.size) + np.bincount(hi, w, grid.size)
        weights.append(w)
    return st.build(diag, weights)


def is_m_matrix(A: sp.spmatrix, tol: float = 1e-14) -> bool:
    A = sp.csr_matrix(A)
    d = A.diagonal()
    off = A - sp.diags(d)
    scale = max(1.0, float(np.abs(d).max()))
    sym = abs(A - A.T).max() <= tol * scale if A.nnz else True
    row_dom = np.all(d + 1e-12 * scale >= np.abs(off).sum(axis=1).A1)
    return bool(np.all(d > 0) and (off.data <= 0).all() and sym and row_dom)


def solve_spd(A, b, rel_tol: float = DEFAULT_REL_TOL, x0=None, max_iter: int | None = None):
    """Conjugate gradients with Jacobi preconditioning.

    Stops once ``||A x - b||_2 <= rel_tol * ||b||_2`` and returns ``(x, SolveStats)``.
    Raises :class:`SolverError` after ``10 * dim`` iterations without convergence.
    """
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    b = np.asarray(b, dtype=float).ravel()
    n = b.size
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise ValueError("matrix diagonal must be strictly positive")
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveStats(0, 0.0)
    target = rel_tol * bnorm
    inv_diag = 1.0 / diag
    if x0 is None:
        x = np.zeros(n)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float).ravel()
        r = b - A @ x
    rnorm = np.linalg.norm(r)
    if rnorm <= target:
        return x, SolveStats(0, rnorm / bnorm)
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            # recompute the true residual so drift in r cannot fake convergence
            true = np.linalg.norm(b - A @ x)
            if true <= target:
                return x, SolveStats(it, true / bnorm)
            r = b - A @ x
            z = inv_diag * r
            p = z.copy()
            rz = r @ z
            continue
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError("conjugate gradients did not converge", rnorm / bnorm)
