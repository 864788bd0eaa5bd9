"""
The bindweed walk on either side of the threshold
=================================================

A word of symbols grows down the tree and shrinks back.  With downward
rates small relative to upward ones the walk keeps coming home; with
them equal on a binary tree it escapes.
"""

# %%
from matcascade import Constant, Environment, Fixed, RateLaw, Uniform, exact_stationary_truncated
from matcascade.bindweed import excursions, recurrence_experiment, summarize_excursions
from matcascade.cascade import run_cascade

tree = Constant(2)
recurrent = Environment(RateLaw(1, Fixed(0.1), Fixed(1.0)), 1)
rep = recurrence_experiment(recurrent, tree, horizons=[100, 1000], reps=1000, seed=1, depths=(4, 8))
print("predicted", rep.predicted, " lambda*gr =", rep.lambda_gr)
for row in rep.rows:
    print(row)
print("exact truncated mean return times", rep.exact_mean_return)

# %%
# The escaping regime.  Unfinished excursions sit at a depth that keeps
# pace with the horizon.
transient = Environment(RateLaw(1, Fixed(1.0), Fixed(1.0)), 2)
trajs = excursions(transient, tree, seed=2, reps=30, horizon=3000, checkpoints=(30, 300, 3000))
for row in summarize_excursions(trajs, (30, 300, 3000)):
    print(f"horizon {row.horizon:6.0f}: {row.returned}/{row.excursions} returned, "
          f"mean depth of the rest {row.mean_depth_alive:.1f}")

# %%
# On a truncation the stationary law is exact, and its level masses are
# the cascade sums of the same environment.
env = Environment(RateLaw(2, Uniform(0.2, 1.0), Uniform(0.5, 2.0)), 5)
st = exact_stationary_truncated(env, tree, 4)
series = run_cascade(tree, env, n_max=4)
print("TV(recursion, solve) =", st.tv_discrepancy)
print("level masses", st.level_mass)
print("cascade     ", [round(2.718281828459045 ** x, 12) for x in series.log_psi])
