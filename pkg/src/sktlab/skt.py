"""Time stepping for the restricted SKT competition system

    u_t = div((d1 + 2 a11 u + a12 v) grad u + a12 u grad v) + u (a1 - b1 u - c1 v)
    v_t = div((d2 + 2 a22 v) grad v) + v (a2 - c2 v) - b2 u v

with zero-flux walls. Each step advances v first and then u with the fresh v.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .mesh import Field, Grid, SpaceTimeField, TimeAxis, face_gradient
from .parabolic import STEP_REL_TOL, implicit_solve

NEG_TOL = 1e-12

MONITOR_COLUMNS = ("t", "normW1p_u", "normW1p_v", "min_u", "max_u", "min_v", "max_v", "mass_u", "mass_v")


class BlowupDetected(RuntimeError):
    """A slice went non-finite or negative beyond round-off."""

    def __init__(self, slice_index: int, reason: str, partial=None):
        super().__init__(f"blow-up detected at slice {slice_index}: {reason}")
        self.slice_index = slice_index
        self.reason = reason
        self.partial = partial


@dataclass(frozen=True)
class SKTParams:
    d1: float = 1.0
    d2: float = 1.0
    a11: float = 1.0
    a12: float = 1.0
    a22: float = 1.0
    a1: float = 1.0
    a2: float = 1.0
    b1: float = 1.0
    b2: float = 1.0
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite")
        for name in ("d1", "d2", "a1", "a2", "b1", "b2", "c1", "c2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("a11", "a12", "a22"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "SKTParams":
        known = {f.name for f in fields(cls)}
        return cls(**{k: float(v) for k, v in d.items() if k in known})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True, eq=False)
class SKTState:
    u: SpaceTimeField
    v: SpaceTimeField
    params: SKTParams
    flags: tuple = field(default=())


def m0_bound(params: SKTParams, v0) -> float:
    """``max(a2/c2, max v0)``: the maximum-principle ceiling for v."""
    vals = np.asarray(getattr(v0, "values", v0), dtype=float)
    if vals.min() < 0:
        raise ValueError("v0 must be non-negative")
    return max(params.a2 / params.c2, float(vals.max()))


def _face_velocity(grid: Grid, v: np.ndarray, a12: float) -> list:
    """Advection velocity ``-a12 dv/dx_k`` on interior faces, per axis."""
    out = []
    for k in range(grid.dim):
        out.append(-a12 * np.diff(v, axis=k) / grid.h[k])
    return out


def _upwind_split(grid: Grid, vel: list, u_prev: np.ndarray):
    """Outflow rate per cell (implicit) and inflow mass rate per cell (explicit)."""
    outflow = np.zeros(grid.shape)
    inflow = np.zeros(grid.shape)
    for k in range(grid.dim):
        n = grid.cells[k]
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[k] = slice(0, n - 1)
        hi[k] = slice(1, n)
        lo, hi = tuple(lo), tuple(hi)
        rate_pos = np.maximum(vel[k], 0.0) / grid.h[k]   # lo -> hi
        rate_neg = np.maximum(-vel[k], 0.0) / grid.h[k]  # hi -> lo
        outflow[lo] += rate_pos
        outflow[hi] += rate_neg
        inflow[hi] += rate_pos * u_prev[lo]
        inflow[lo] += rate_neg * u_prev[hi]
    return outflow, inflow


def _check_slice(m, *arrays):
    for name, a in zip(("u", "v"), arrays):
        if not np.all(np.isfinite(a)):
            return f"{name} is not finite"
        if a.min() < -NEG_TOL:
            return f"{name} went negative ({a.min():.3e})"
    return None


def skt_step(params: SKTParams, grid: Grid, u: np.ndarray, v: np.ndarray, dt: float,
             rel_tol: float = STEP_REL_TOL):
    """One step: v with frozen coefficients, then u with the new v."""
    p = params
    dv = p.d2 + 2 * p.a22 * v
    v_new = implicit_solve(grid, (dv,) * grid.dim, p.c2 * v + p.b2 * u, v / dt + p.a2 * v, dt,
                           x0=v, rel_tol=rel_tol)
    du = p.d1 + 2 * p.a11 * u + p.a12 * v_new
    outflow, inflow = _upwind_split(grid, _face_velocity(grid, v_new, p.a12), u)
    reaction = p.b1 * u + p.c1 * v_new + outflow
    rhs = u / dt + p.a1 * u + inflow
    u_new = implicit_solve(grid, (du,) * grid.dim, reaction, rhs, dt, x0=u, rel_tol=rel_tol)
    return u_new, v_new


def skt_run(params: SKTParams, u0: Field, v0: Field, axis: TimeAxis,
            rel_tol: float = STEP_REL_TOL) -> SKTState:
    """March the system over ``axis``.

    Raises :class:`BlowupDetected` with the offending slice index when a slice
    is non-finite or negative beyond ``1e-12``. A run with ``a11 == 0`` is
    allowed and carries the flag ``"a11_zero"``.
    """
    grid = u0.grid
    if v0.grid != grid:
        raise ValueError("u0 and v0 live on different grids")
    if u0.values.min() < 0 or v0.values.min() < 0:
        raise ValueError("initial data must be non-negative")
    flags = ("a11_zero",) if params.a11 == 0 else ()
    shape = (axis.steps + 1,) + grid.shape
    U = np.empty(shape)
    V = np.empty(shape)
    U[0], V[0] = u0.values, v0.values
    for m in range(1, axis.steps + 1):
        with np.errstate(all="ignore"):
            try:
                U[m], V[m] = skt_step(params, grid, U[m - 1], V[m - 1], axis.dt, rel_tol)
            except (ValueError, ArithmeticError, RuntimeError) as exc:
                raise BlowupDetected(m, str(exc), (U[:m], V[:m])) from exc
        reason = _check_slice(m, U[m], V[m])
        if reason:
            raise BlowupDetected(m, reason, (U[:m + 1], V[:m + 1]))
    return SKTState(SpaceTimeField(grid, axis, U), SpaceTimeField(grid, axis, V), params, flags)


def w1p_norm(values: np.ndarray, grid: Grid, p: float) -> np.ndarray:
    """``(int |f|^p + int |grad f|^p)^(1/p)`` per leading slice.

    Cell values by the midpoint rule; gradients as face differences.
    """
    values = np.asarray(values, dtype=float)
    space = tuple(range(values.ndim - grid.dim, values.ndim))
    total = (np.abs(values) ** p).sum(axis=space)
    for g in face_gradient(values, grid):
        total = total + (np.abs(g) ** p).sum(axis=space)
    return (total * grid.cell_volume) ** (1.0 / p)


def blowup_monitor(state: SKTState, p0: float) -> np.ndarray:
    """``||u(t)||_{W^{1,p0}} + ||v(t)||_{W^{1,p0}}`` for every slice."""
    if not p0 > 2:
        raise ValueError("p0 must exceed 2")
    g = state.u.grid
    return w1p_norm(state.u.values, g, p0) + w1p_norm(state.v.values, g, p0)


def monitor_rows(state: SKTState, p0: float) -> list:
    g = state.u.grid
    space = tuple(range(1, g.dim + 1))
    U, V = state.u.values, state.v.values
    cols = (
        state.u.axis.times,
        w1p_norm(U, g, p0),
        w1p_norm(V, g, p0),
        U.min(axis=space), U.max(axis=space),
        V.min(axis=space), V.max(axis=space),
        U.sum(axis=space) * g.cell_volume,
        V.sum(axis=space) * g.cell_volume,
    )
    return [dict(zip(MONITOR_COLUMNS, map(float, row))) for row in zip(*cols)]


def write_monitor_csv(path, rows: list) -> None:
    """Monitor table as CSV, written to a temporary file and renamed into place."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=MONITOR_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(r[k]) for k in MONITOR_COLUMNS})
    tmp.replace(path)
