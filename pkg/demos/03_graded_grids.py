"""Graded time grids: geometry and invariants.

The grids realize tau_n ~ (t_{n-1}/T)^alpha * tau with a tiny first step
tau_1 = T (tau/T)^(1/(1-alpha)), which resolves the t=0 singularity of
rough initial data at the cost of a uniform-grid step count.
"""

import numpy as np

from nsfem.timestepper import build_graded_grid

for alpha in (0.51, 0.55, 0.75):
    grid = build_graded_grid(0.1, 1 / 40, alpha)
    ratios = grid.steps[1:] / grid.steps[:-1]
    print(f"alpha={alpha}: N={grid.N:3d}  tau_1={grid.steps[0]:.3e}  "
          f"tau_max={grid.steps.max():.3e}  "
          f"neighbor ratios in [{ratios.min():.2f}, {ratios.max():.2f}]")
    grid.validate()

grid = build_graded_grid(0.1, 1 / 40, 0.55)
print("\nalpha=0.55, tau=1/40, T=0.1:")
print("   n        t_n        tau_n   tau_n/(t_{n-1}/T)^a/tau")
target = np.concatenate([[np.nan],
                         (grid.times[1:-1] / 0.1) ** 0.55 * (1 / 40)])
for n in range(1, grid.N + 1):
    grading = grid.steps[n - 1] / target[n - 1] if n >= 2 else float("nan")
    print(f"  {n:2d}  {grid.times[n]:.6f}  {grid.steps[n - 1]:.6f}"
          f"   {grading:8.3f}")
