"""March the restricted SKT competition system and watch its monitors.

Run: python3 demos/skt_competition.py
"""
import numpy as np

from sktlab.mesh import Field, Grid, TimeAxis
from sktlab.skt import SKTParams, blowup_monitor, m0_bound, monitor_rows, skt_run

grid = Grid.unit(32, 32)
axis = TimeAxis(0.0, 4.0, 256)
params = SKTParams(d1=0.5, d2=1.0, a11=0.2, a12=1.0, a22=0.2, a1=2.0, a2=1.5, b1=1.0, b2=0.5, c1=0.5, c2=1.0)

u0 = Field.from_function(grid, lambda x, y: 1 + 0.8 * np.cos(2 * np.pi * x) * np.cos(np.pi * y))
v0 = Field.from_function(grid, lambda x, y: 2 * np.exp(-20 * ((x - 0.3) ** 2 + (y - 0.7) ** 2)))

state = skt_run(params, u0, v0, axis)
M0 = m0_bound(params, v0)
print(f"v ceiling M0 = {M0:.3f}; observed max v = {state.v.values.max():.3f}")
print(f"smallest u, v: {state.u.values.min():.3e}, {state.v.values.min():.3e}")

series = blowup_monitor(state, p0=4.0)
for m in range(0, axis.steps + 1, 32):
    print(f"t = {axis.times[m]:4.2f}   W1,4 monitor = {series[m]:.4f}")

rows = monitor_rows(state, 4.0)
print(f"u mass {rows[0]['mass_u']:.4f} -> {rows[-1]['mass_u']:.4f}, "
      f"v mass {rows[0]['mass_v']:.4f} -> {rows[-1]['mass_v']:.4f}")
