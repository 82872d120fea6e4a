"""Quadrature norms and the sweep ratios used to probe a-priori estimates."""
from __future__ import annotations

import math

import numpy as np

from ..mesh import Field, ParabolicCube, SpaceTimeField, gradient_magnitude


def _masks(f, region):
    """Spatial and (for space-time fields) temporal masks plus the quadrature weight."""
    grid = f.grid
    if isinstance(region, np.ndarray):
        mask = region.astype(bool)
        if mask.shape != f.values.shape:
            raise ValueError("region mask shape does not match the field")
        weight = grid.cell_volume * (f.axis.dt if isinstance(f, SpaceTimeField) else 1.0)
        return mask, weight
    smask = np.ones(grid.shape, bool) if region is None else region.space_mask(grid)
    if isinstance(f, SpaceTimeField):
        tmask = np.arange(f.axis.steps + 1) >= 1 if region is None else region.time_mask(f.axis)
        mask = tmask.reshape((-1,) + (1,) * grid.dim) & smask
        return mask, grid.cell_volume * f.axis.dt
    return smask, grid.cell_volume


def lp_norm(f, p: float, region=None) -> float:
    """``(sum |f|^p * vol)^(1/p)`` over the domain, a cube or a boolean mask.

    Space-time fields use slices ``1..steps`` when no region is given.
    """
    if not (p >= 1 and math.isfinite(p)):
        raise ValueError("p must be finite and >= 1")
    mask, weight = _masks(f, region)
    vals = np.abs(np.asarray(f.values))[np.broadcast_to(mask, f.values.shape)]
    return float((vals ** p).sum() * weight) ** (1.0 / p)


def estimate_ratio(u: SpaceTimeField, params, c: SpaceTimeField | None, p: float, t_bar: float) -> float:
    """``int_{t >= t_bar} |grad u|^p`` over ``max(theta/lam, ||u||_2)^p + int |c|^p``."""
    if not p > 2:
        raise ValueError("p must exceed 2")
    axis = u.axis
    if not axis.t0 < t_bar < axis.T:
        raise ValueError("t_bar must lie strictly inside the time interval")
    w = u.grid.cell_volume * axis.dt
    late = (axis.times >= t_bar - 1e-12 * axis.dt) & (np.arange(axis.steps + 1) >= 1)
    num = float((gradient_magnitude(u.values[late], u.grid) ** p).sum()) * w
    base = max(params.theta / params.lam, lp_norm(u, 2))
    den = base ** p
    if c is not None:
        den += lp_norm(c, p) ** p
    return num / den


def w1infty_ratio(vbar: SpaceTimeField, inner: ParabolicCube, outer: ParabolicCube) -> float:
    """``max_{inner} |grad v|^2`` over the ``outer`` average of ``|grad v|^2``.

    Gradients are cell-centred face averages. Returns 0 when both sides vanish.
    """
    if inner.radius > outer.radius:
        raise ValueError("inner cube must not exceed the outer cube")
    g2 = gradient_magnitude(vbar.values, vbar.grid) ** 2
    g2 = SpaceTimeField(vbar.grid, vbar.axis, g2)
    imask, _ = _masks(g2, inner)
    omask, _ = _masks(g2, outer)
    imask = np.broadcast_to(imask, g2.values.shape)
    omask = np.broadcast_to(omask, g2.values.shape)
    if not imask.any() or not omask.any():
        raise ValueError("empty region")
    num = float(g2.values[imask].max())
    den = float(g2.values[omask].mean())
    if den == 0.0:
        if num == 0.0:
            return 0.0
        raise ZeroDivisionError("outer gradient average vanishes while the inner maximum does not")
    return num / den
