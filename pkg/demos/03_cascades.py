"""
Streaming a matrix cascade level by level
=========================================

Each vertex carries the product of edge matrices along its root path, the
newest edge on the left.  Levels are kept as unit-norm matrices plus log
scales, so depth never overflows.
"""

# %%
import math

import numpy as np

from matcascade import (Constant, Environment, FiniteSupport, IIDEntries, PointMass, Uniform, expected_psi,
                        lambda_shortcut, mc_mean_psi, run_cascade)
from matcascade.cascade import level_frame

series = run_cascade(Constant(2), PointMass([[0.25]]), seed=0, n_max=20)
print("Z_20 =", math.exp(series.log_Z[-1]), " tail slope =", series.tail_slope, math.log(0.5))

# %%
# Noncommuting atoms: the order of multiplication matters and is checked
# against a product multiplied out by hand.
a = np.array([[0.6, 0.1], [0.2, 0.3]])
b = np.array([[0.1, 0.5], [0.4, 0.2]])
env = Environment(FiniteSupport([a, b], [0.5, 0.5]), 42)
frame = level_frame(Constant(2), env, 2)
word, unit, log_scale = next(frame.entries())
by_hand = env.edge_matrix(word) @ env.edge_matrix(word[:1])
print(word, np.allclose(math.exp(log_scale) * unit, by_hand))

# %%
# Averaged over environments, the level sum has a closed form.
law = IIDEntries(2, Uniform(0.05, 0.15))
mc = mc_mean_psi(Constant(2), law, 5, reps=200, seed=7)
print(f"MC {mc.mean:.5f} +/- {mc.std_err:.5f}   closed form {expected_psi(law, 2, 5):.5f}")

# %%
# Quenched series below and at the threshold lambda * b = 1.  With
# entries below 1/d the level sums grow like (lambda * b)^n.
for hi in (0.15, 0.45):
    law = IIDEntries(2, Uniform(0.05, hi))
    lam = lambda_shortcut(law)
    s = run_cascade(Constant(2), law, seed=3, n_max=18)
    print(f"lambda*b = {2 * lam:.2f}: tail slope {s.tail_slope:+.3f} vs log(lambda*b) "
          f"{math.log(2 * lam):+.3f}, log Z_18 = {s.log_Z[-1]:.3f}")
