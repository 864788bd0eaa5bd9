"""
Norm moments of random matrix products
======================================

k(s) is the exponential growth rate of E||g_n ... g_1||^s.  Its minimum
over [0, 1] is the number that decides the phase of everything else here.
"""

# %%
import numpy as np

from matcascade import IIDEntries, TwoPoint, Uniform, estimate_k, estimate_lambda, lambda_shortcut

# In one dimension the moment is explicit: k(s) = E xi^s.
law = IIDEntries(1, TwoPoint(0.25, 0.5, 2.0))
for s in (0.0, 0.25, 0.5, 0.75, 1.0):
    est = estimate_k(law, s, seed=1)
    print(f"s={s:4}  k_hat={est.k_hat:.5f} +/- {est.std_err:.5f}  exact={(0.25 ** s + 2 ** s) / 2:.5f}")

# %%
lam = estimate_lambda(law, seed=1)
grid = np.linspace(0, 1, 100_001)
print("lambda_hat", lam.lambda_hat, "at s", round(lam.s_star, 4))
print("dense grid", ((0.25 ** grid + 2 ** grid) / 2).min())

# %%
# With entries below 1/d the minimum sits at s = 1 and equals the Perron
# root of the mean matrix.
law2 = IIDEntries(2, Uniform(0.1, 0.4))
print("shortcut", lambda_shortcut(law2))
print("estimate", estimate_lambda(law2, seed=2).lambda_hat)

# %%
# Two estimators are available.  The direct average of independent products
# is fine for short horizons; the cloning estimator keeps a resampled
# population and stays accurate where the direct average is dominated by
# rare products.
heavy = IIDEntries(2, Uniform(0.01, 2.0))
for method in ("direct", "cloning"):
    est = estimate_k(heavy, 1.0, n_list=(20, 40, 80, 160), seed=3, method=method)
    print(method, est.k_hat, est.std_err)
