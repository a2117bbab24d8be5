"""Pathwise optimal free-knot splines with a fixed number of pieces.

gamma_k is the smallest sup error that k pieces can reach on the path.
It shrinks like k**-1/2, and the greedy cover at that level gives the
spline itself.
"""
import numpy as np

from freeknot_sde.freeknot import gamma_k, optimal_spline, sup_distance
from freeknot_sde.paths import FineGrid, SeedSpec, sample_wiener

path = sample_wiener(FineGrid(2**18), SeedSpec(11))

print("   k   gamma_k (r=0)  sqrt(k)*gamma   gamma_k (r=1)")
for k in (8, 32, 128, 512):
    g0 = gamma_k(path, k, 0).gamma
    g1 = gamma_k(path, k, 1).gamma
    print(f"{k:>4}   {g0:.5f}        {np.sqrt(k) * g0:.4f}          {g1:.5f}")

spline = optimal_spline(path, 32, 1)
print(f"\n32-piece linear spline: {len(spline.pieces)} pieces, sup distance {sup_distance(spline, path):.5f}")
print("first breakpoints:", np.round(spline.breakpoints[:6], 4))
print("value at t=0.5:", spline(0.5), "path:", path.values[path.grid.nearest_index(0.5)])
