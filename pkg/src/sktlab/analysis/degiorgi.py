"""Level-truncation energies on shrinking cubes (De Giorgi iteration).

All norms are measured in reference units: the cube ``Q_rho`` is mapped to
``B_4 x (-16, 16]`` by ``x -> 4 (x - y)/rho``, ``t -> 16 (t - s)/rho^2``. The
nested cubes ``Q_{r_j}`` with ``r_j = 3 + 2^(-j-2)`` shrink towards ``Q_3``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from ..mesh import ParabolicCube, SpaceTimeField, face_gradient

B_RATIO = 16.0


def exponents(n: int) -> tuple:
    """``(r, mu)`` with ``r = 2(n+2)/n`` and ``mu = 2(1 - 2/r)``."""
    r = 2.0 * (n + 2) / n
    return r, 2.0 * (1.0 - 2.0 / r)


def c2_constant(Lambda: float, M0: float, M1: float, theta: float, C1: float = 1.0) -> float:
    return math.sqrt(8 * Lambda * C1 ** 2 * (1 + (1 + M0 + M1 ** 2) * Lambda ** 3 + theta ** 2))


def level(K: float, j: int) -> float:
    return K * (1.0 - 2.0 ** (-j))


def ref_radius(j: int) -> float:
    return 3.0 + 2.0 ** (-j - 2)


def _ref_weight(f: SpaceTimeField, cube: ParabolicCube) -> float:
    n = f.grid.dim
    rho = cube.radius
    return f.grid.cell_volume * f.axis.dt * (4.0 / rho) ** n * (16.0 / rho ** 2)


def _sub_cube(cube: ParabolicCube, r_ref: float) -> ParabolicCube:
    return ParabolicCube(cube.center, cube.s, cube.radius * r_ref / 4.0, cube.variant)


def _cube_mask(f: SpaceTimeField, cube: ParabolicCube) -> np.ndarray:
    return cube.time_mask(f.axis).reshape((-1,) + (1,) * f.grid.dim) & cube.space_mask(f.grid)


def _check_inside(f: SpaceTimeField, cube: ParabolicCube):
    lo = [c - cube.radius for c in cube.center]
    hi = [c + cube.radius for c in cube.center]
    if not f.grid.contains_box(lo, hi):
        raise ValueError("cube leaves the spatial domain")
    a, b = cube.time_interval
    eps = 1e-9 * f.axis.dt
    if a < f.axis.t0 - eps or b > f.axis.T + eps:
        raise ValueError("cube leaves the time interval")


def ref_l2(f: SpaceTimeField, cube: ParabolicCube, values=None) -> float:
    vals = f.values if values is None else values
    mask = np.broadcast_to(_cube_mask(f, cube), vals.shape)
    return math.sqrt(float((vals[mask] ** 2).sum()) * _ref_weight(f, cube))


def sobolev_ratio(phi: SpaceTimeField, cube: ParabolicCube) -> float:
    """``||phi||_{L^r(Q)} / (max_t ||phi||_{L^2(B)} + ||grad phi||_{L^2(Q)})`` in reference units."""
    grid = phi.grid
    n = grid.dim
    r, _ = exponents(n)
    rho = cube.radius
    ball = cube.space_mask(grid)
    tmask = cube.time_mask(phi.axis)
    vals = phi.values[tmask]
    w = _ref_weight(phi, cube)
    num = (float((np.abs(vals[:, ball]) ** r).sum()) * w) ** (1.0 / r)
    slice_l2 = np.sqrt((vals[:, ball] ** 2).sum(axis=1) * grid.cell_volume * (4.0 / rho) ** n)
    grad2 = 0.0
    for k, g in enumerate(face_gradient(vals, grid)):
        nk = grid.cells[k]
        both = np.take(ball, np.arange(nk - 1), axis=k) & np.take(ball, np.arange(1, nk), axis=k)
        inner = [slice(None)] * vals.ndim
        inner[1 + k] = slice(1, -1)
        g = g[tuple(inner)] * (rho / 4.0)  # reference-unit gradient
        grad2 += float((g[:, both] ** 2).sum())
    den = float(slice_l2.max()) + math.sqrt(grad2 * w)
    return num / den if den > 0 else 0.0


def calibrate_sobolev_constant(f: SpaceTimeField, cube: ParabolicCube) -> float:
    """Largest Sobolev ratio over a family of space-time bumps on ``f``'s grid."""
    return _calibrate(f.grid, f.axis, cube)


@lru_cache(maxsize=32)
def _calibrate(grid, axis, cube) -> float:
    rho = cube.radius
    xs = [(c - y) * 4.0 / rho for c, y in zip(grid.centers, cube.center)]
    t = (axis.times - cube.s) * 16.0 / rho ** 2
    t = t.reshape((-1,) + (1,) * grid.dim)
    best = 0.0
    for a in (0.75, 1.5, 3.0, 4.0):
        for b in (2.0, 8.0, 16.0):
            for shift in (0.0, 1.5):
                for tau in (-8.0, 0.0, 8.0):
                    d2 = (xs[0] - shift) ** 2 + sum(x ** 2 for x in xs[1:])
                    space = np.maximum(1 - d2 / a ** 2, 0.0)
                    time = np.maximum(1 - (t - tau) ** 2 / b ** 2, 0.0)
                    phi = SpaceTimeField(grid, axis, space * time)
                    best = max(best, sobolev_ratio(phi, cube))
    if best == 0.0:
        raise ValueError("cube too coarse to calibrate the Sobolev constant")
    return best


@dataclass
class DeGiorgiTrace:
    K: float
    levels: list
    radii: list  # reference radii r_j
    Y: list
    r: float
    mu: float
    C0: float
    C1: float
    C2: float
    A: float
    B: float
    threshold: float
    resolved_levels: int  # number of distinct cell sets among the nested cubes
    exceed_inner: int = 0  # cells of the inner cube Q_3 where w > K
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def decays_after_threshold(self, floor: float = 1e-10, within: int = 20) -> bool:
        """Once some ``Y_j`` is below the threshold, is one of the next ``within`` levels below ``floor``?"""
        for j, y in enumerate(self.Y):
            if y <= self.threshold:
                return any(v <= floor for v in self.Y[j:j + within + 1])
        return False

    def non_increasing(self, rtol: float = 1e-12) -> bool:
        return all(b <= a * (1 + rtol) + 1e-300 for a, b in zip(self.Y, self.Y[1:]))


def degiorgi_trace(w: SpaceTimeField, cube: ParabolicCube, K: float | None = None, n: int | None = None,
                   Lambda: float = 1.0, M0: float = 0.0, M1: float = 0.0, theta: float = 1.0,
                   j_max: int = 20, C0: float | None = None, C1: float = 1.0) -> DeGiorgiTrace:
    """Energies ``Y_j = ||(w - k_j)^+||_{L^2(Q_{r_j})}`` with ``k_j = K (1 - 2^-j)``.

    ``cube`` is the outer cube ``Q_4`` (centred). When ``K`` is omitted it is
    chosen as ``||w||_{L^2(Q_4)} 16^(1/mu^2) (32 C0 C2)^(1/mu)``. ``C0`` defaults
    to the calibrated Sobolev constant on ``w``'s grid.
    """
    if cube.variant != "centered":
        raise ValueError("the outer cube must be centred")
    _check_inside(w, cube)
    n = w.grid.dim if n is None else int(n)
    r, mu = exponents(n)
    C2 = c2_constant(Lambda, M0, M1, theta, C1)
    if C0 is None:
        C0 = calibrate_sobolev_constant(w, cube)
    if K is None:
        K = ref_l2(w, cube) * B_RATIO ** (1 / mu ** 2) * (32 * C0 * C2) ** (1 / mu)
    if not K > 0:
        raise ValueError("K must be positive (w vanishes on the cube when K comes from the formula)")

    masks = []
    for j in range(j_max + 1):
        m = _cube_mask(w, _sub_cube(cube, ref_radius(j)))
        if not m.any():
            last = j - 1
            raise ValueError(f"grid too coarse for {j_max} nested cubes; max feasible j = {last}")
        masks.append(m)
    inner = _cube_mask(w, _sub_cube(cube, 3.0))
    if not inner.any():
        raise ValueError("inner cube contains no cell")

    weight = _ref_weight(w, cube)
    levels, Y = [], []
    resolved, prev = 0, None
    for j, m in enumerate(masks):
        k = level(K, j)
        mask = np.broadcast_to(m, w.values.shape)
        trunc = np.maximum(w.values[mask] - k, 0.0)
        levels.append(k)
        Y.append(math.sqrt(float((trunc ** 2).sum()) * weight))
        if prev is None or not np.array_equal(prev, m):
            resolved += 1
        prev = m
    A = 32 * C0 * C2 / K ** mu
    threshold = A ** (-1 / mu) * B_RATIO ** (-1 / mu ** 2)
    exceed = int(np.count_nonzero(w.values[np.broadcast_to(inner, w.values.shape)] > K))
    return DeGiorgiTrace(K, levels, [ref_radius(j) for j in range(j_max + 1)], Y, r, mu, C0, C1, C2,
                         A, B_RATIO, threshold, resolved, exceed)
