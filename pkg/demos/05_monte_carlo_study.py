"""A small convergence study, the same one the command line runs.

Equivalent to

    freeknot-sde converge --method dagger,star,euler --sde ou --k 32,64,128 \
        --paths 40 --grid-exp 14 --tau-paths 2000 --out conv.csv

but kept small enough to finish in well under a minute. The ratio column
compares sqrt(k) * e_1 with its predicted limit; it approaches 1 only
slowly in k.
"""
import csv
import io

from freeknot_sde.harness import RunConfig, convergence_study, estimate_tau_moments
from freeknot_sde.paths import FineGrid, SeedSpec

tau = estimate_tau_moments(0, 2000, FineGrid(2**16, 8.0), SeedSpec(1))
print(f"E(tau_11) for r=0: {tau.mean:.4f} +- {tau.mean_std_error:.4f}")

cfg = RunConfig(sde="ou", methods=["dagger", "star", "euler"], ks=[32, 64, 128], qs=[1.0],
                grid_exponent=14, n_paths=40, tau_mean=tau.mean, master_seed=3).validate()
table = convergence_study(cfg)
for row in csv.DictReader(io.StringIO(table)):
    print(f"{row['method']:>7} k={row['k']:>4}  e1={float(row['e_q_hat']):.4f}  "
          f"sqrt(k)*e1={float(row['sqrt_k_times_eq']):.3f}  ratio={float(row['ratio']):.3f}")
