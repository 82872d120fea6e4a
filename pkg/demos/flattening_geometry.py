"""Flatten a Lipschitz boundary graph and push a coefficient field through the map.

Run: python3 demos/flattening_geometry.py
"""
import numpy as np

from sktlab.geometry import (LipschitzGraph, distortion, ellipticity_window, flatten_jacobian, flatten_map,
                             pushforward_coefficient, triangular_det, unflatten_map)
from sktlab.mesh import Field, Grid, TensorField

line = Grid((0.0,), (1.0,), (16,))
gamma = LipschitzGraph(Field(line, 0.15 * np.abs(np.sin(2 * np.pi * line.axis_centers(0)))), delta=1.0)
print(f"Lip(gamma) = {gamma.lip:.3f}, distortion bound = {distortion(gamma):.3f}")

x = (np.array([0.1, 0.5, 0.9]), np.array([0.4, 0.4, 0.4]))
y = flatten_map(gamma, x)
print("flattened heights:", np.round(y[1], 4), " round trip ok:",
      np.allclose(unflatten_map(gamma, y)[1], x[1]))
print("Jacobian determinants:", triangular_det(flatten_jacobian(gamma, x[0])))

grid = Grid.unit(16, 16)
Lambda = 2.0
A = TensorField.isotropic(grid, np.where(grid.centers[1] > 0.5, Lambda, 1 / Lambda))
ev = np.linalg.eigvalsh(pushforward_coefficient(A, gamma).values)
lo, hi = ellipticity_window(2, Lambda)
print(f"pushed-forward eigenvalues in [{ev.min():.3f}, {ev.max():.3f}], window [{lo:.3f}, {hi:.3f}]")
