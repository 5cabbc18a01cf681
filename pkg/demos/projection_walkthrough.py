"""
Projecting onto an optimistic decision set
==========================================

Two arms, one constraint. The raw mirror-descent point leans on arm 0, but
the estimated constraint says arm 0 may be played at most as often as arm 1.
"""

import math

import numpy as np

from conbandit.core import make_rng
from conbandit.env import RoundFeedback
from conbandit.estimators import ConstraintEstimator
from conbandit.omd import DecisionSet, build_decision_set, feasibility_check, kl_project

# x0 <= x1 written as a single row (1, -1)
ds = DecisionSet(np.array([[1.0, -1.0]]))
res = kl_project(np.array([0.8, 0.2]), ds, record=True)
print("point      ", res.point)
print("multiplier ", res.multipliers, " (ln 2 =", round(math.log(2), 6), ")")
print("status     ", res.status, "after", res.iterations, "Newton steps")
print("dual trace ", np.round(res.dual_history, 6))

# %%
# Where the rows come from: a bandit-mode estimator after a handful of pulls.
# Early on the capped radius (2) makes the set the whole simplex; as counts grow
# the rows tighten toward the empirical means.
rng = make_rng(0)
T, K, m = 5000, 3, 1
true_means = np.array([0.4, -0.3, 0.1])
est = ConstraintEstimator("bandit", T, K, m)
for n in range(1, T + 1):
    arm = int(rng.integers(K))
    g = np.where(rng.random(K) < (1 + true_means) / 2, 1.0, -1.0)[None, :]
    est.update(RoundFeedback.observe(np.zeros(K), g, arm, False, False))
    if n in (10, 100, 1000, 5000):
        d = build_decision_set(est)
        f = feasibility_check(d)
        print(f"t={n:5d} counts={est.counts} rows={np.round(d.rows[0], 3)} best slack={f.value:+.3f}")

# %%
# Projecting the uniform point onto the final set.
final = kl_project(np.ones(K) / K, build_decision_set(est))
print("projected uniform:", np.round(final.point, 4), final.status)
