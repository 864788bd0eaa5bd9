"""
Trees from branching functions
==============================

A tree is never built.  Every question is answered from the branching
rule and a vertex word.
"""

# %%
import math

from matcascade import Constant, Explicit, Periodic, branching_number, children, growth_rates, level_size

binary = Constant(2)
alternating = Periodic([2, 3])
print(children(binary, ()))
print(children(alternating, (1,)))

# %%
# Level sizes are exact integers; the alternating tree multiplies by 2 then 3.
for n in range(7):
    print(n, level_size(binary, n), level_size(alternating, n))

# %%
# Depth-only rules get their growth rate in closed form: the geometric mean
# over one period.
print(growth_rates(alternating, 20), math.sqrt(6))

# %%
# A listed vertex breaks spherical symmetry.  Here the root has three
# children, the first of which is a binary tree and the others are rays.
spec = Explicit({(): 3, (1,): 2, (1, 1): 2, (1, 2): 2}, default=1)
for n in range(6):
    print(n, level_size(spec, n))

# %%
# The branching number comes from a min-cutset bisection on a depth-limited
# truncation.  Rays contribute nothing in the limit, so deeper truncations
# drift down toward 1.
for depth in (10, 20, 40, 80):
    print(depth, round(branching_number(spec, n_max=depth, tol=1e-8), 5))
