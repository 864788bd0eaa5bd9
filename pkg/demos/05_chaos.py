"""
Iterating the chaos equation
============================

Y = sum_j Y'_j xi_j with independent copies Y'_j is a fixed-point problem
for a law.  A particle population stands in for the law.
"""

# %%
import numpy as np

from matcascade import IIDEntries, PointMass, Uniform, chaos_diagnose, chaos_iterate
from matcascade.chaos import ParticlePopulation

pop = ParticlePopulation.constant(np.array([[1.0, 2.0], [0.5, 3.0]]), 1000)
out = chaos_iterate(pop, PointMass(np.eye(2) / 3), 3, 1000, seed=0)
print("exact fixed point kept bit for bit:", np.array_equal(out.particles, pop.particles))

# %%
# Drift of log E||Y_t|| with b = 3 copies of 2x2 matrices.  Entries are
# uniform on [0, c/3], so lambda = c/3 and lambda*b = c while lambda*d =
# 2c/3.  Watch which product sits at 1 when the drift vanishes.
for c in (0.6, 1.0, 1.4):
    law = IIDEntries(2, Uniform(0.0, c / 3))
    rep = chaos_diagnose(law, 3, 15, m=5000, seed=1)
    print(f"scale {c}: slope {rep.slope:+.4f} {rep.verdict:12s} lambda*b = {rep.lambda_b:.3f}  "
          f"lambda*d = {rep.lambda_d:.3f}")
