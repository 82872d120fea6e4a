"""Frozen-coefficient reference problem, its De Giorgi energies, and the exponent ladder.

Run: python3 demos/degiorgi_and_ladder.py
"""
import numpy as np

from sktlab.analysis import bootstrap_ladder, degiorgi_trace, mu_exponent
from sktlab.fixedpoint import ModelParams, approximation_gap, picard_solve, reference_solve, restrict
from sktlab.mesh import Field, Grid, ParabolicCube, SpaceTimeField, TensorField, TimeAxis

grid = Grid.unit(24, 24)
axis = TimeAxis(0.0, 0.5, 48)
params = ModelParams(alpha=1.0, lam=2.0, theta=0.6, Lambda=2.0)
cube = ParabolicCube((0.5, 0.5), 0.25, 0.3)
u0 = Field.from_function(grid, lambda x, y: 0.05 + 0.4 * np.exp(-10 * ((x - 0.45) ** 2 + (y - 0.55) ** 2)))

print("oscillation   ||u - v||^2 on the cube")
for amp in (0.4, 0.2, 0.05):
    A = TensorField.isotropic(grid, 1 + amp * np.sin(8 * np.pi * grid.centers[0]) * np.sin(8 * np.pi * grid.centers[1]))
    u = picard_solve(params, A, SpaceTimeField.constant(grid, axis, 0.0), u0).u
    v = reference_solve(params, A, cube, u)
    print(f"{amp:10.2f}   {approximation_gap(restrict(u, cube), v, cube)[0]:.3e}")

trace = degiorgi_trace(v, ParabolicCube((0.5, 0.5), 0.25, 0.28), Lambda=params.Lambda,
                       M0=float(v.values.max()), theta=params.theta)
print(f"\nK = {trace.K:.3g}, calibrated C0 = {trace.C0:.3f}, threshold = {trace.threshold:.3g}")
print("Y_j:", " ".join(f"{y:.2e}" for y in trace.Y[:6]), "...")
print("cells of the inner cube above K:", trace.exceed_inner)

for n in (3, 4, 5):
    lad = bootstrap_ladder(n)
    print(f"n = {n}: ladder {lad.terms}, unbounded at index {lad.unbounded_index}, "
          f"mu(q=2) = {mu_exponent(2.0, n):.4f}")
