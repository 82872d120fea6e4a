"""Linear parabolic stepping, truncation, discrete weak form and energies.

All steps are backward Euler on the cell-centred grid with zero-flux walls.
Only the principal entries ``A_kk`` of the coefficient matrix enter the
two-point face fluxes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Field, Grid, SpaceTimeField, TensorField, face_gradient
from .sparse_solve import assemble_implicit_step, face_average, solve_spd

# stepping tolerance; tighter than the solver default so that bracket and
# comparison assertions at 1e-10 are not polluted by CG error
STEP_REL_TOL = 1e-13


def implicit_solve(grid: Grid, diffusivity, reaction, rhs, dt, x0=None, rel_tol=STEP_REL_TOL,
                   fixed=None):
    """Solve ``(I/dt + K + diag(reaction)) x = rhs`` on the grid.

    ``diffusivity`` is a tuple of per-axis *cell* coefficients, averaged onto
    faces. ``fixed`` optionally is ``(mask, values)``: masked cells keep the
    given values and only the remaining unknowns are solved for.
    Returns a cell array.
    """
    faces = tuple(face_average(grid, d)[k] for k, d in enumerate(diffusivity))
    M = assemble_implicit_step(grid, faces, reaction, dt)
    b = np.asarray(rhs, dtype=float).ravel()
    if fixed is None:
        x, _ = solve_spd(M, b, rel_tol=rel_tol, x0=None if x0 is None else np.ravel(x0))
        return x.reshape(grid.shape)
    mask, values = fixed
    mask = np.asarray(mask, bool).ravel()
    values = np.asarray(values, dtype=float).ravel()
    free = ~mask
    out = values.copy()
    if free.any():
        Mf = M[free][:, free]
        bf = b[free] - M[free][:, mask] @ values[mask]
        guess = None if x0 is None else np.ravel(x0)[free]
        out[free], _ = solve_spd(Mf, bf, rel_tol=rel_tol, x0=guess)
    return out.reshape(grid.shape)


@dataclass(frozen=True, eq=False)
class LinearProblem:
    """``w_t = div(A grad w) - c w + f`` with initial datum ``g`` (slice 0 used)."""

    A: TensorField
    c: SpaceTimeField
    f: SpaceTimeField
    g: SpaceTimeField
    Lambda: float | None = None

    def __post_init__(self):
        grid = self.c.grid
        for name in ("f", "g"):
            other = getattr(self, name)
            if other.grid != grid or other.axis != self.c.axis:
                raise ValueError(f"{name} does not share the grid/time axis of c")
        if self.A.grid != grid:
            raise ValueError("A lives on a different grid")
        if self.A.time_dependent and self.A.axis != self.c.axis:
            raise ValueError("A lives on a different time axis")
        if np.any(self.c.values < 0):
            raise ValueError("c must be non-negative")
        if self.Lambda is not None and not self.A.is_elliptic(self.Lambda):
            raise ValueError("A violates the ellipticity bound")

    @property
    def grid(self) -> Grid:
        return self.c.grid

    @property
    def axis(self):
        return self.c.axis


def linear_step(problem: LinearProblem, w_prev: Field, slice_index: int, rel_tol=STEP_REL_TOL) -> Field:
    """Advance from slice ``slice_index - 1`` to ``slice_index``.

    The reaction ``c w`` sits on the diagonal; ``A``, ``c`` and ``f`` are all
    read at the new slice, ``f`` being a known source.
    """
    m = int(slice_index)
    if not 1 <= m <= problem.axis.steps:
        raise IndexError("slice_index must lie in 1..steps")
    dt = problem.axis.dt
    prev = getattr(w_prev, "values", w_prev)
    rhs = prev / dt + problem.f.values[m]
    w = implicit_solve(problem.grid, problem.A.diagonal(m), problem.c.values[m], rhs, dt,
                       x0=prev, rel_tol=rel_tol)
    return Field(problem.grid, w)


def linear_solve(problem: LinearProblem, rel_tol=STEP_REL_TOL) -> SpaceTimeField:
    """March ``linear_step`` through every slice starting from ``g`` at ``t0``."""
    out = np.empty((problem.axis.steps + 1,) + problem.grid.shape)
    out[0] = problem.g.values[0]
    for m in range(1, problem.axis.steps + 1):
        out[m] = linear_step(problem, out[m - 1], m, rel_tol).values
    return SpaceTimeField(problem.grid, problem.axis, out)


def truncate(c: SpaceTimeField, f: SpaceTimeField, k: float):
    """Pointwise ``(min(c, k), min(f, k))``."""
    if not k > 0:
        raise ValueError("truncation level must be positive")
    return (SpaceTimeField(c.grid, c.axis, np.minimum(c.values, k)),
            SpaceTimeField(f.grid, f.axis, np.minimum(f.values, k)))


def _face_products(grid, coeff_cells, u_vals, phi_vals):
    """sum over interior faces of D_f * grad u * grad phi * cell volume, per slice."""
    gu = face_gradient(u_vals, grid)
    gp = face_gradient(phi_vals, grid)
    total = 0.0
    for k in range(grid.dim):
        D = face_average(grid, coeff_cells[k])[k]
        inner = [slice(None)] * u_vals.ndim
        inner[u_vals.ndim - grid.dim + k] = slice(1, -1)
        total = total + (D * gu[k][tuple(inner)] * gp[k][tuple(inner)]).sum()
    return total * grid.cell_volume


def weak_residual(u: SpaceTimeField, params, A: TensorField, c: SpaceTimeField,
                  test: SpaceTimeField, source: SpaceTimeField | None = None) -> float:
    """Discrete weak form of ``u_t = div((1+a*lam*u) A grad u) + th^2 u(1-lam u) - lam th c u + f``.

    Summed over slices ``1..steps`` with backward differences in time and
    the same face fluxes as the solvers, so a converged discrete solution
    gives zero up to solver and fixed-point tolerance.
    """
    grid, axis = u.grid, u.axis
    for other in (c, test) + (() if source is None else (source,)):
        if other.grid != grid or other.axis != axis:
            raise ValueError("shape mismatch between u and the other fields")
    if A.grid != grid:
        raise ValueError("shape mismatch between u and A")
    alpha, lam, theta = params.alpha, params.lam, params.theta
    dt, vol = axis.dt, grid.cell_volume
    U, phi = u.values, test.values
    total = 0.0
    for m in range(1, axis.steps + 1):
        um, pm = U[m], phi[m]
        reaction = theta ** 2 * um * (1 - lam * um) - lam * theta * c.values[m] * um
        if source is not None:
            reaction = reaction + source.values[m]
        cell_terms = ((um - U[m - 1]) - dt * reaction) * pm
        coeff = tuple((1 + alpha * lam * um) * a for a in A.diagonal(m))
        total += vol * cell_terms.sum() + dt * _face_products(grid, coeff, um, pm)
    return float(total)


@dataclass(frozen=True)
class EnergyReport:
    lhs: float
    domain_measure: float
    c_norm2: float
    g_norm2: float

    @property
    def rhs_terms(self) -> tuple:
        return self.domain_measure, self.c_norm2, self.g_norm2

    @property
    def rhs_sum(self) -> float:
        return sum(self.rhs_terms)


def energy_report(u: SpaceTimeField, c: SpaceTimeField | None = None, g=None) -> EnergyReport:
    """``max_t int u^2 + int_0^T int |grad u|^2`` and the data terms bounding it.

    The gradient term uses interior face differences, slices ``1..steps``.
    ``g`` defaults to the initial slice of ``u``.
    """
    grid, axis = u.grid, u.axis
    vol, dt = grid.cell_volume, axis.dt
    sup_l2 = float((u.values ** 2).sum(axis=tuple(range(1, grid.dim + 1))).max()) * vol
    grads = face_gradient(u.values[1:], grid)
    grad_term = sum(float((g_ ** 2).sum()) for g_ in grads) * vol * dt
    c_norm2 = 0.0 if c is None else float((c.values[1:] ** 2).sum()) * vol * dt
    if g is None:
        g_vals = u.values[0]
    else:
        g_vals = getattr(g, "values", g)
        if np.ndim(g_vals) == grid.dim + 1:
            g_vals = g_vals[0]
    g_norm2 = float((np.asarray(g_vals) ** 2).sum()) * vol
    return EnergyReport(sup_l2 + grad_term, grid.measure, c_norm2, g_norm2)
