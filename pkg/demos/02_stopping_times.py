"""Greedy stopping times on a Brownian path.

At level eps the path is cut into maximal pieces that a constant (or a
line) fits within eps. Each piece's length behaves like eps**2 times a
fixed random variable, which the second half of this script checks.
"""
import numpy as np

from freeknot_sde.freeknot import stopping_times, xi_samples
from freeknot_sde.paths import FineGrid, SeedSpec, sample_wiener

path = sample_wiener(FineGrid(2**16), SeedSpec(2024))

for r in (0, 1):
    for eps in (0.2, 0.1, 0.05):
        seq = stopping_times(path, eps, r)
        print(f"r={r} eps={eps:<5} pieces={seq.pieces:>4}  pieces*eps^2={seq.pieces * eps**2:.3f}")

# First piece lengths, rescaled by eps**-2, have one law for every eps.
grid = FineGrid(2**16, 8.0)
for eps in (1.0, 0.5):
    xs = xi_samples(0, eps, 400, grid, SeedSpec(7 if eps == 1.0 else 8))
    scaled = xs.observed / eps**2
    print(f"eps={eps}: mean of xi/eps^2 = {scaled.mean():.3f} +- {scaled.std() / np.sqrt(scaled.size):.3f}")
