"""Fixed-point construction for the scalar self-diffusion model

    u_t = div((1 + alpha*lam*u) A grad u) + theta^2 u (1 - lam u) - lam*theta*c*u

on a grid with zero-flux walls, plus the frozen-coefficient reference problem
on a parabolic cube and the gaps between the two.

The Picard map acts on whole space-time iterates. Given ``v`` with
``0 <= lam v <= 1`` it returns the backward-Euler solution ``w`` of

    w_t = div((1 + alpha*lam*v) A grad w) - (lam*theta*c + theta^2) w
          + theta^2 (2 v - lam v^2),

whose fixed points solve the model equation. The source lies in
``[0, theta^2/lam]`` and is dominated by the diagonal term, so every iterate
stays in ``[0, 1/lam]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .mesh import Grid, ParabolicCube, SpaceTimeField, TensorField, TimeAxis, Field, face_gradient
from .parabolic import STEP_REL_TOL, implicit_solve

BRACKET_TOL = 1e-10


class ConvergenceError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 1.0
    lam: float = 1.0
    theta: float = 1.0
    Lambda: float = 1.0

    def __post_init__(self):
        vals = (self.alpha, self.lam, self.theta, self.Lambda)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("model parameters must be finite")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.Lambda < 1:
            raise ValueError("Lambda must be at least 1")


@dataclass(frozen=True)
class PicardConfig:
    max_iterations: int = 200
    l2_tolerance: float = 1e-9
    relaxation: float = 1.0

    def __post_init__(self):
        if not self.l2_tolerance > 0:
            raise ValueError("l2_tolerance must be positive")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


class PicardResult(NamedTuple):
    u: SpaceTimeField
    history: list
    bounds: list  # (min, max) of every iterate, in iteration order


def _l2_space_time(grid: Grid, axis: TimeAxis, vals: np.ndarray) -> float:
    return math.sqrt(float((vals[1:] ** 2).sum()) * grid.cell_volume * axis.dt)


def _picard(grid, axis, params, diag_at, c_vals, u0, cfg, v, fixed=None, rel_tol=STEP_REL_TOL):
    alpha, lam, theta = params.alpha, params.lam, params.theta
    dt = axis.dt
    history, bounds = [], []
    for _ in range(cfg.max_iterations):
        w = np.empty_like(v)
        w[0] = u0
        for m in range(1, axis.steps + 1):
            vm = v[m]
            diff = tuple((1 + alpha * lam * vm) * a for a in diag_at(m))
            reaction = theta ** 2 + (0.0 if c_vals is None else lam * theta * c_vals[m])
            rhs = w[m - 1] / dt + theta ** 2 * (2 * vm - lam * vm ** 2)
            fx = None if fixed is None else (fixed[0], fixed[1][m])
            w[m] = implicit_solve(grid, diff, reaction, rhs, dt, x0=vm, rel_tol=rel_tol, fixed=fx)
        if cfg.relaxation != 1.0:
            w = (1 - cfg.relaxation) * v + cfg.relaxation * w
        gap = _l2_space_time(grid, axis, w - v)
        history.append(gap)
        bounds.append((float(w.min()), float(w.max())))
        v = w
        if gap <= cfg.l2_tolerance:
            return v, history, bounds
    raise ConvergenceError(
        f"no convergence after {cfg.max_iterations} iterations (last gap {history[-1]:.3e})", history)


def _check_bracket(vals, lam, what):
    if vals.min() < -BRACKET_TOL or lam * vals.max() > 1 + BRACKET_TOL:
        raise ValueError(f"{what} must satisfy 0 <= lam*u <= 1")


def picard_solve(params: ModelParams, A: TensorField, c: SpaceTimeField | None, u0: Field,
                 cfg: PicardConfig = PicardConfig(), initial=None, axis: TimeAxis | None = None,
                 rel_tol: float = STEP_REL_TOL) -> PicardResult:
    """Iterate the frozen-coefficient map to its fixed point.

    ``initial`` is the starting iterate: ``None`` repeats ``u0`` over every
    slice, a number gives a constant iterate, or pass a :class:`SpaceTimeField`.
    The time axis comes from ``c`` unless ``c`` is ``None``.

    Raises :class:`ConvergenceError` (carrying the gap history) when
    ``cfg.max_iterations`` is exhausted.
    """
    grid = u0.grid
    if c is not None:
        axis = c.axis
        if c.grid != grid:
            raise ValueError("c and u0 live on different grids")
        if np.any(c.values < 0):
            raise ValueError("c must be non-negative")
    if axis is None:
        raise ValueError("a time axis is required when c is None")
    if A.grid != grid:
        raise ValueError("A and u0 live on different grids")
    if A.time_dependent and A.axis != axis:
        raise ValueError("A lives on a different time axis")
    if not A.is_elliptic(params.Lambda):
        raise ValueError("A violates the ellipticity bound Lambda")
    _check_bracket(u0.values, params.lam, "initial data")

    shape = (axis.steps + 1,) + grid.shape
    if initial is None:
        v = np.broadcast_to(u0.values, shape).copy()
    elif isinstance(initial, SpaceTimeField):
        v = np.array(initial.values)
    else:
        v = np.full(shape, float(initial))
    _check_bracket(v, params.lam, "initial iterate")
    v[0] = u0.values
    vals, history, bounds = _picard(grid, axis, params, A.diagonal,
                                    None if c is None else c.values, u0.values, cfg, v,
                                    rel_tol=rel_tol)
    return PicardResult(SpaceTimeField(grid, axis, vals), history, bounds)


# --------------------------------------------------------------------------
# cubes

@dataclass(frozen=True)
class CubeWindow:
    """Bounding sub-grid and slice range of a cube on a host grid."""

    grid: Grid
    axis: TimeAxis
    index: tuple  # per-axis slices into the host grid
    m0: int
    m1: int
    ball: np.ndarray  # ball membership on the sub-grid

    def take(self, values: np.ndarray) -> np.ndarray:
        return values[(slice(self.m0, self.m1 + 1),) + self.index]


def cube_window(grid: Grid, axis: TimeAxis, cube: ParabolicCube) -> CubeWindow:
    """Locate ``cube`` on ``grid x axis``; raises if it leaves the domain."""
    lo = [y - cube.radius for y in cube.center]
    hi = [y + cube.radius for y in cube.center]
    if not grid.contains_box(lo, hi):
        raise ValueError("cube leaves the spatial domain")
    a, b = cube.time_interval
    eps = 1e-9
    m0 = math.ceil((a - axis.t0) / axis.dt - eps)
    m1 = math.floor((b - axis.t0) / axis.dt + eps)
    if m0 < 0 or m1 > axis.steps:
        raise ValueError("cube leaves the time interval")
    if m1 <= m0:
        raise ValueError("cube is thinner than one time step")
    mask = cube.space_mask(grid)
    if not mask.any():
        raise ValueError("cube contains no cell centre")
    index = []
    for k in range(grid.dim):
        other = tuple(j for j in range(grid.dim) if j != k)
        hit = np.flatnonzero(mask.any(axis=other) if other else mask)
        index.append(slice(int(hit[0]), int(hit[-1]) + 1))
    index = tuple(index)
    lower = tuple(grid.lower[k] + s.start * grid.h[k] for k, s in enumerate(index))
    upper = tuple(grid.lower[k] + s.stop * grid.h[k] for k, s in enumerate(index))
    cells = tuple(s.stop - s.start for s in index)
    if min(cells) < 2:
        raise ValueError("cube is narrower than two cells")
    sub = Grid(lower, upper, cells)
    sub_axis = TimeAxis(axis.t0 + m0 * axis.dt, axis.t0 + m1 * axis.dt, m1 - m0)
    return CubeWindow(sub, sub_axis, index, m0, m1, mask[index])


def restrict(u: SpaceTimeField, cube: ParabolicCube) -> SpaceTimeField:
    """``u`` on the bounding window of ``cube``."""
    win = cube_window(u.grid, u.axis, cube)
    return SpaceTimeField(win.grid, win.axis, win.take(u.values))


def _interior(ball: np.ndarray) -> np.ndarray:
    """Ball cells all of whose axis neighbours are ball cells too."""
    inner = ball.copy()
    for k in range(ball.ndim):
        padded = np.pad(ball, [(1, 1) if j == k else (0, 0) for j in range(ball.ndim)])
        n = ball.shape[k]
        left = np.take(padded, np.arange(0, n), axis=k)
        right = np.take(padded, np.arange(2, n + 2), axis=k)
        inner &= left & right
    return inner


def reference_solve(params: ModelParams, A: TensorField, cube: ParabolicCube, u: SpaceTimeField,
                    cfg: PicardConfig = PicardConfig(), rel_tol: float = STEP_REL_TOL) -> SpaceTimeField:
    """Frozen-coefficient, reaction-only problem on ``cube`` with ``u`` as boundary data.

    Solves ``v_t = div((1 + alpha*lam*v) Abar(t) grad v) + theta^2 v (1 - lam v)``
    where ``Abar(t)`` is the mean of ``A(., t)`` over the ball cells. Ball cells
    touching the outside of the ball, and every cell of the bounding window
    outside the ball, are copied from ``u``; the first slice of the window is
    ``u`` too. The result lives on the window grid returned by :func:`cube_window`.
    """
    if A.grid != u.grid:
        raise ValueError("A and u live on different grids")
    win = cube_window(u.grid, u.axis, cube)
    data = win.take(u.values)
    _check_bracket(data, params.lam, "boundary data")
    ball = win.ball
    free = _interior(ball)
    fixed_mask = ~free

    def diag_at(m):
        a = A.at(win.m0 + m)[win.index]
        abar = a[ball].mean(axis=0)
        return tuple(np.full(win.grid.shape, abar[k, k]) for k in range(win.grid.dim))

    v0 = data.copy()
    vals, _, _ = _picard(win.grid, win.axis, params, diag_at, None, data[0], cfg, v0,
                         fixed=(fixed_mask, data), rel_tol=rel_tol)
    return SpaceTimeField(win.grid, win.axis, vals)


def approximation_gap(u: SpaceTimeField, v: SpaceTimeField, cube: ParabolicCube) -> tuple:
    """``(||u - v||^2, ||grad u - grad v||^2)`` over the cube, by midpoint quadrature.

    Both fields must share grid and time axis. The gradient term sums interior
    faces whose two cells lie in the ball.
    """
    if u.grid != v.grid or u.axis != v.axis:
        raise ValueError("u and v must share grid and time axis")
    grid = u.grid
    ball = cube.space_mask(grid)
    tmask = cube.time_mask(u.axis)
    diff = (u.values - v.values)[tmask]
    w = grid.cell_volume * u.axis.dt
    l2 = float((diff[:, ball] ** 2).sum()) * w
    h1 = 0.0
    grads = face_gradient(diff, grid)
    for k in range(grid.dim):
        n = grid.cells[k]
        both = np.take(ball, np.arange(n - 1), axis=k) & np.take(ball, np.arange(1, n), axis=k)
        inner = [slice(None)] * diff.ndim
        inner[1 + k] = slice(1, -1)
        g = grads[k][tuple(inner)]
        h1 += float((g[:, both] ** 2).sum()) * w
    return l2, h1
