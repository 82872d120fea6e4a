"""Parabolic maximal functions, level-set sums and the BMO seminorm.

Cubes are clipped to the grid: a cell belongs to ``Q_rho(x, t)`` when its
centre lies in the open ball of radius ``rho`` around ``x`` and its slice time
lies in ``(t - rho^2, t + rho^2]`` (centred) or ``(t - rho^2, t]`` (backward).
Every slice, including the initial one, is a time cell here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..mesh import MEMBERSHIP_EPS, Grid, ParabolicCube, SpaceTimeField, TensorField, TimeAxis


@dataclass(frozen=True)
class MaximalConfig:
    """Radius set of the maximal operator; ``None`` means :func:`default_radii`."""

    radii: tuple | None = None
    variant: str = "centered"

    def __post_init__(self):
        if self.variant not in ("centered", "backward"):
            raise ValueError("variant must be 'centered' or 'backward'")
        if self.radii is not None:
            r = tuple(float(x) for x in self.radii)
            if not r:
                raise ValueError("empty radius set")
            if min(r) <= 0 or list(r) != sorted(r):
                raise ValueError("radii must be positive and sorted ascending")
            object.__setattr__(self, "radii", r)

    def resolve(self, grid: Grid, axis: TimeAxis) -> tuple:
        return self.radii if self.radii is not None else default_radii(grid, axis)


def default_radii(grid: Grid, axis: TimeAxis) -> tuple:
    """A host-only radius, then ``h * 2^k`` up to the domain diameter.

    The first radius is small enough that its cube holds only the host cell,
    which makes ``Mf >= |f|`` hold pointwise.
    """
    h = min(grid.h)
    host = 0.5 * min(h, math.sqrt(axis.dt))
    diam = math.sqrt(sum((b - a) ** 2 for a, b in zip(grid.lower, grid.upper)))
    radii = [host]
    r = h
    while r <= diam * (1 + 1e-12):
        if r > host:
            radii.append(r)
        r *= 2
    return tuple(radii)


def ball_kernel(grid: Grid, rho: float) -> np.ndarray:
    """0/1 array of integer offsets whose centre distance is below ``rho``."""
    reach = [int(math.ceil(rho / h)) for h in grid.h]
    axes = [np.arange(-K, K + 1) * h for K, h in zip(reach, grid.h)]
    mesh = np.meshgrid(*axes, indexing="ij")
    d2 = sum(m ** 2 for m in mesh)
    return (d2 < rho ** 2 * (1 - MEMBERSHIP_EPS)).astype(float)


def time_kernel(axis: TimeAxis, rho: float, variant: str) -> np.ndarray:
    """0/1 weights over slice offsets ``-K..K`` covering the cube's time window."""
    r2 = rho ** 2
    K = int(math.floor(r2 / axis.dt)) + 1
    off = np.arange(-K, K + 1) * axis.dt
    eps = MEMBERSHIP_EPS * axis.dt
    top = r2 if variant == "centered" else 0.0
    return ((off > -r2 + eps) & (off <= top + eps)).astype(float)


def _window_sum(values: np.ndarray, grid: Grid, axis: TimeAxis, rho: float, variant: str) -> np.ndarray:
    """Sum of ``values`` over every clipped cube of radius ``rho``."""
    out = ndimage.correlate1d(values, time_kernel(axis, rho, variant), axis=0, mode="constant")
    return ndimage.correlate(out, ball_kernel(grid, rho)[None], mode="constant")


def _region_mask(f: SpaceTimeField, U) -> np.ndarray:
    if U is None:
        return np.ones(f.values.shape, bool)
    if isinstance(U, ParabolicCube):
        return U.time_mask(f.axis).reshape((-1,) + (1,) * f.grid.dim) & U.space_mask(f.grid)
    U = np.asarray(U, bool)
    return np.broadcast_to(U, f.values.shape)


def parabolic_maximal(f: SpaceTimeField, U=None, cfg: MaximalConfig = MaximalConfig()) -> SpaceTimeField:
    """``M_U f``: at each grid point, the largest clipped-cube average of ``|f| chi_U``.

    ``U`` is ``None`` (whole grid), a :class:`ParabolicCube` or a boolean mask.
    """
    if not np.all(np.isfinite(f.values)):
        raise ValueError("field must be finite")
    radii = cfg.resolve(f.grid, f.axis)
    if not radii:
        raise ValueError("empty radius set")
    g = np.abs(f.values) * _region_mask(f, U)
    ones = np.ones_like(g)
    best = np.zeros_like(g)
    for rho in radii:
        s = _window_sum(g, f.grid, f.axis, rho, cfg.variant)
        n = _window_sum(ones, f.grid, f.axis, rho, cfg.variant)
        np.maximum(best, s / n, out=best)
    return SpaceTimeField(f.grid, f.axis, best)


def level_set_sum(f: SpaceTimeField, delta: float, N: float, q: float, j_max: int,
                  U=None, cfg: MaximalConfig = MaximalConfig()) -> tuple:
    """Both sides of the level-set bound for ``M = M_U(f^2)``.

    ``sum = sum_{j=0}^{j_max} (N^q - 1) delta^q N^(q(j-1)) |{M > delta N^j}|`` and
    ``bound = int M^q``, measured over slices ``1..steps``.
    """
    if not delta > 0 or not N > 1 or not q > 1:
        raise ValueError("need delta > 0, N > 1 and q > 1")
    sq = SpaceTimeField(f.grid, f.axis, np.asarray(f.values) ** 2)
    M = parabolic_maximal(sq, U, cfg).values[1:]
    w = f.grid.cell_volume * f.axis.dt
    total = 0.0
    for j in range(int(j_max) + 1):
        measure = np.count_nonzero(M > delta * N ** j) * w
        total += (N ** q - 1) * delta ** q * N ** (q * (j - 1)) * measure
    return total, float((M ** q).sum() * w)


def bmo_radii(grid: Grid, R: float) -> tuple:
    h = min(grid.h)
    kmax = int(math.floor(R / h * (1 + 1e-12)))
    if kmax < 1:
        raise ValueError("R is below the smallest radius h")
    return tuple(k * h for k in range(1, kmax + 1))


def bmo_seminorm(A: TensorField, R: float, radii=None, variant: str = "centered") -> float:
    """Largest cube average of ``|A - mean_{B_rho(y) cap grid} A(t)|_F^2`` over ``rho <= R``.

    The sum over the clipped cube is divided by the full (unclipped) discrete
    cube volume. Radii default to ``h, 2h, ...`` up to ``R``.
    """
    grid = A.grid
    radii = bmo_radii(grid, R) if radii is None else tuple(radii)
    vals = np.asarray(A.values) if A.time_dependent else np.asarray(A.values)[None]
    n = grid.dim
    comps = vals.reshape(vals.shape[: 1 + n] + (n * n,))
    # the seminorm ignores constant shifts; removing one cell's value per slice
    # makes spatially constant fields give exactly zero
    comps = comps - comps[(slice(None),) + (0,) * n][(slice(None),) + (None,) * n]
    best = 0.0
    for rho in radii:
        ball = ball_kernel(grid, rho)
        reach = [(s - 1) // 2 for s in ball.shape]
        centre_ones = np.ones(grid.shape)
        count = ndimage.correlate(centre_ones, ball, mode="constant")
        pad = [(0, 0)] + [(K, K) for K in reach]
        padded = np.pad(comps, pad + [(0, 0)])
        valid = np.pad(centre_ones, pad[1:])
        means = np.stack([ndimage.correlate(comps[m, ..., c], ball, mode="constant")
                          for m in range(comps.shape[0]) for c in range(n * n)])
        means = means.reshape((comps.shape[0], n * n) + grid.shape)
        means = np.moveaxis(means, 1, -1) / count[..., None]
        dev = np.zeros(comps.shape[: 1 + n])
        for off in zip(*np.nonzero(ball)):
            sl = tuple(slice(o, o + c) for o, c in zip(off, grid.cells))
            shifted = padded[(slice(None),) + sl]
            dev += valid[sl] * ((shifted - means) ** 2).sum(axis=-1)
        if A.time_dependent:
            tk = time_kernel(A.axis, rho, variant)
            dev = ndimage.correlate1d(dev, tk, axis=0, mode="constant")
            full = ball.sum() * tk.sum()
        else:
            full = ball.sum()
        best = max(best, float(dev.max()) / full)
    return best
