"""Approximating an SDE path with a knot budget k.

The combined methods run a coarse Euler scheme and add optimal Brownian
splines inside each coarse cell. The "dagger" variant spends knots in
proportion to sigma**2, "star" spends them evenly, and the Euler
interpolant uses k equidistant knots.
"""
import numpy as np

from freeknot_sde.paths import FineGrid, SeedSpec, sample_wiener
from freeknot_sde.sde import (build_combined, build_euler_interp, preset, reference_solution, sigma_norms,
                              xbar_process)

sde = preset("ramp-sigma")  # dX = -X dt + (1 + 2t) dW
seed = SeedSpec(5)
path = sample_wiener(FineGrid(2**18), seed)
x = reference_solution(sde, path).values

k = 256
dagger = build_combined(sde, path, k, allocation="dagger")
star = build_combined(sde, path, k, allocation="star")
euler = build_euler_interp(sde, path, k)

print(f"coarse cells n = {dagger.scheme.n}")
print("pieces per cell, first and last:  dagger", dagger.budget.m[:3], dagger.budget.m[-3:],
      "  star", star.budget.m[:3])
for name, spline in (("dagger", dagger.spline), ("star", star.spline), ("euler", euler)):
    err = np.max(np.abs(x - spline.grid_values(path.grid.steps)))
    print(f"{name:>7}: {spline.knots:>4} knots, sup error {err:.4f}")

# The combined spline differs from the frozen-coefficient process only
# through the Brownian splines, cell by cell.
xbar = xbar_process(sde, path, dagger.scheme.n).values
total = np.max(np.abs(xbar - dagger.spline.grid_values(path.grid.steps)))
cells = np.max(np.abs(dagger.scheme.sigma_values) * dagger.cell_errors)
print(f"\nsup |Xbar - dagger| = {total:.6f},  max_l |sigma_l| * cell error = {cells:.6f}")
l2, sup = sigma_norms(sde)
print(f"||sigma||_2 = {l2:.4f}, ||sigma||_inf = {sup:.4f}, ratio {l2 / sup:.4f}")
