"""Best sup-norm polynomial fits on sampled data.

Fits a noisy sine with polynomials of increasing degree, checks each fit
against the linear-programming formulation, and shows the alternating
residual pattern that certifies optimality.
"""
import numpy as np

from freeknot_sde.minimax import ApproxWorkspace, best_poly, equioscillation_count, eval_piece, lp_oracle_best_poly

rng = np.random.default_rng(0)
t = np.linspace(0.0, 1.0, 60)
v = np.sin(2 * np.pi * t) + 0.05 * rng.normal(size=t.size)

print("degree  sup error     LP error      alternations")
for r in range(5):
    fit = best_poly(t, v, r)
    lp = lp_oracle_best_poly(t, v, r)
    alt = equioscillation_count(v - eval_piece(fit, t), fit.sup_error)
    print(f"{r:>6}  {fit.sup_error:.10f}  {lp.sup_error:.10f}  {alt:>3} (need {r + 2})")

# A workspace grows the sample set one point at a time. For degree 1 the
# error comes from two convex hulls and never needs a refit.
ws = ApproxWorkspace(1)
errors = [ws.append(ti, vi) for ti, vi in zip(t, v)]
print("\nline fit error on growing prefixes:", np.round(errors[::10], 4))
