"""Parabolic maximal function, the level-set inequality and the BMO seminorm.

Run: python3 demos/maximal_and_bmo.py
"""
import numpy as np

from sktlab.analysis import bmo_seminorm, default_radii, level_set_sum, parabolic_maximal
from sktlab.mesh import Grid, SpaceTimeField, TensorField, TimeAxis

grid = Grid.unit(16, 16)
axis = TimeAxis(0.0, 0.5, 16)
rng = np.random.default_rng(0)

# A spike: the maximal function spreads it out, decaying with distance.
vals = np.zeros((axis.steps + 1,) + grid.shape)
vals[8, 8, 8] = 1.0
M = parabolic_maximal(SpaceTimeField(grid, axis, vals)).values
print("radii used:", ", ".join(f"{r:.3f}" for r in default_radii(grid, axis)))
print("Mf along the row through the spike:", np.round(M[8, 8, :], 4))

# Level-set sums never exceed the integral of (M f^2)^q.
f = SpaceTimeField(grid, axis, rng.normal(size=vals.shape))
for q in (1.5, 2.0, 3.0):
    total, bound = level_set_sum(f, delta=0.1, N=2.0, q=q, j_max=20)
    print(f"q = {q}: level-set sum {total:.4f} <= {bound:.4f}")

# BMO: zero for constants, growing with the oscillation amplitude.
X, Y = grid.centers
for amp in (0.0, 0.1, 0.3, 0.6):
    A = TensorField.isotropic(grid, 1 + amp * np.sin(8 * np.pi * X) * np.sin(8 * np.pi * Y))
    print(f"oscillation {amp:.1f}: BMO seminorm at R = 0.2 is {bmo_seminorm(A, 0.2):.4f}")
