"""Flattening a boundary given as the graph ``x_2 > gamma(x_1)``.

``Phi(x1, x2) = (x1, x2 - gamma(x1))`` straightens the graph and
``Psi(y1, y2) = (y1, y2 + gamma(y1))`` undoes it. ``gamma`` is piecewise linear
through samples at the cell centres of a 1D grid, extended linearly to the
grid ends, so every Jacobian is exact away from the sample points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import Field, TensorField


@dataclass(frozen=True, eq=False)
class LipschitzGraph:
    gamma: Field
    delta: float = 1.0  # declared Lipschitz bound
    R: float = math.inf  # locality radius

    def __post_init__(self):
        if self.gamma.grid.dim != 1:
            raise ValueError("gamma must live on a 1D grid")
        if self.lip > self.delta * (1 + 1e-12):
            raise ValueError(f"measured Lipschitz constant {self.lip:.6g} exceeds delta={self.delta}")

    @property
    def nodes(self) -> np.ndarray:
        return self.gamma.grid.axis_centers(0)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.gamma.values) / np.diff(self.nodes)

    @property
    def lip(self) -> float:
        return float(np.abs(self.slopes).max())

    def _segment(self, x1):
        x1 = np.asarray(x1, dtype=float)
        g = self.gamma.grid
        tol = 1e-12 * max(1.0, abs(g.upper[0]), abs(g.lower[0]))
        if np.any(x1 < g.lower[0] - tol) or np.any(x1 > g.upper[0] + tol):
            raise ValueError("point lies outside the graph extent")
        idx = np.searchsorted(self.nodes, x1, side="right") - 1
        return x1, np.clip(idx, 0, len(self.nodes) - 2)

    def __call__(self, x1):
        x1, i = self._segment(x1)
        return self.gamma.values[i] + self.slopes[i] * (x1 - self.nodes[i])

    def derivative(self, x1):
        _, i = self._segment(x1)
        return self.slopes[i]


def flatten_map(graph: LipschitzGraph, point):
    """``Phi``: works on a single point or on arrays ``(x1, x2)`` of equal shape."""
    x1, x2 = point
    return np.asarray(x1, dtype=float), np.asarray(x2, dtype=float) - graph(x1)


def unflatten_map(graph: LipschitzGraph, point):
    """``Psi = Phi^{-1}``."""
    y1, y2 = point
    return np.asarray(y1, dtype=float), np.asarray(y2, dtype=float) + graph(y1)


def flatten_jacobian(graph: LipschitzGraph, x1) -> np.ndarray:
    """``grad Phi = [[1, 0], [-gamma', 1]]`` (one matrix per entry of ``x1``)."""
    d = np.asarray(graph.derivative(x1), dtype=float)
    J = np.zeros(d.shape + (2, 2))
    J[..., 0, 0] = J[..., 1, 1] = 1.0
    J[..., 1, 0] = -d
    return J


def unflatten_jacobian(graph: LipschitzGraph, y1) -> np.ndarray:
    """``grad Psi = [[1, 0], [gamma', 1]]``."""
    J = flatten_jacobian(graph, y1)
    J[..., 1, 0] *= -1
    return J


def triangular_det(J: np.ndarray) -> np.ndarray:
    """Determinant of lower-triangular Jacobians: product of the diagonal, exact in floats."""
    return np.prod(np.diagonal(J, axis1=-2, axis2=-1), axis=-1)


def distortion(graph: LipschitzGraph) -> float:
    """``max |grad Phi|_F^2 = n + max gamma'^2`` with ``n = 2``."""
    return 2.0 + float((graph.slopes ** 2).max())


def ellipticity_window(n: int, Lambda: float) -> tuple:
    return 1.0 / ((n + 1) * Lambda), (n + 1) * Lambda


def pushforward_coefficient(A: TensorField, graph: LipschitzGraph) -> TensorField:
    """``Ahat(y, t) = grad Phi(Psi y) A(Psi y, t) grad Phi(Psi y)^T`` on ``A``'s grid.

    ``A`` is looked up at the cell nearest to ``Psi(y)`` (clamped to the grid).
    Rejects graphs with ``Lip(gamma) > 1``.
    """
    grid = A.grid
    if grid.dim != 2:
        raise ValueError("pushforward needs a 2D coefficient field")
    if graph.lip > 1 + 1e-12:
        raise ValueError("Lip(gamma) > 1 is outside the flattening regime")
    y1, y2 = grid.centers
    x1, x2 = unflatten_map(graph, (y1, y2))
    i = np.clip(np.floor((x1 - grid.lower[0]) / grid.h[0]).astype(int), 0, grid.cells[0] - 1)
    j = np.clip(np.floor((x2 - grid.lower[1]) / grid.h[1]).astype(int), 0, grid.cells[1] - 1)
    J = flatten_jacobian(graph, x1)
    vals = np.asarray(A.values)
    if A.time_dependent:
        Ax = vals[:, i, j]
        out = J @ Ax @ np.swapaxes(J, -1, -2)
    else:
        Ax = vals[i, j]
        out = J @ Ax @ np.swapaxes(J, -1, -2)
    out = 0.5 * (out + np.swapaxes(out, -1, -2))
    return TensorField(grid, out, A.axis)
