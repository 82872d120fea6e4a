"""Parabolic rescaling ``u'(x, t) = u(s x, s^2 t) / s``."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..mesh import Grid, SpaceTimeField, TensorField, TimeAxis


def _check_factor(s: float) -> None:
    if not s > 0:
        raise ValueError("scale factor must be positive")
    for x in (s, 1.0 / s):
        if abs(x - round(x)) <= 1e-12 * max(1.0, x):
            return
    raise ValueError("scale factor must be an integer or the reciprocal of one")


def rescale_grid(grid: Grid, axis: TimeAxis, s: float) -> tuple:
    _check_factor(s)
    g = Grid(tuple(a / s for a in grid.lower), tuple(b / s for b in grid.upper), grid.cells)
    return g, TimeAxis(axis.t0 / s ** 2, axis.T / s ** 2, axis.steps)


def regrid(f, s: float):
    """Carry a field to the rescaled grid without changing its values (``f'(x,t) = f(sx, s^2 t)``)."""
    if isinstance(f, TensorField):
        if f.time_dependent:
            g, ax = rescale_grid(f.grid, f.axis, s)
            return TensorField(g, f.values, ax)
        _check_factor(s)
        g = Grid(tuple(a / s for a in f.grid.lower), tuple(b / s for b in f.grid.upper), f.grid.cells)
        return TensorField(g, f.values)
    g, ax = rescale_grid(f.grid, f.axis, s)
    return SpaceTimeField(g, ax, f.values)


def scale_transform(u: SpaceTimeField, params, s: float) -> tuple:
    """``(u', params')`` with ``lam' = lam s`` and ``theta' = theta s``.

    The cell count is unchanged, so ``u'`` is an exact index remap. Coefficient
    fields ``A`` and ``c`` carry over with :func:`regrid`.
    """
    g, ax = rescale_grid(u.grid, u.axis, s)
    u2 = SpaceTimeField(g, ax, np.asarray(u.values) / s)
    return u2, replace(params, lam=params.lam * s, theta=params.theta * s)
