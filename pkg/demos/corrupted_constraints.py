"""
Learning under corrupted constraints
====================================

Four cheap arms break the constraint and one expensive arm is safe, so the
best fixed strategy mixes. A spread corruption budget of sqrt(T) makes arm 0
look safer than it is. We compare the full-feedback learner with the
explore-then-optimize learner and check the alpha-mixed comparator against
every decision set that was built.
"""

import math

import numpy as np

from conbandit.algorithms import AlgoParams, run_conomd_fs, run_expopt
from conbandit.core import make_rng
from conbandit.diagnostics import alpha_membership
from conbandit.env import build_instance, compute_corruption
from conbandit.offline import solve_offline
from conbandit.scenarios import cheap_unsafe

T = 4096
inst = build_instance(cheap_unsafe(T, math.isqrt(T)), make_rng(0))
off = solve_offline(inst)
corr = compute_corruption(inst)
print(f"OPT={off.opt_value:.1f}  x*={np.round(off.opt_strategy, 3)}")
print(f"rho (mixed)={off.rho:.3f}  rho (arm {off.rho_arm})={off.rho_arm_value:.3f}  C={corr.C}")

# %%
params = AlgoParams(beta=0.5, record_rows=True)
for name, fn, mode in (("full feedback", run_conomd_fs, "full"), ("explore/optimize", run_expopt, "bandit")):
    R, V, member = [], [], 0
    for seed in range(5):
        rec = fn(inst, params, seed, opt=off.opt_value)
        R.append(rec.regret)
        V.append(rec.violation)
        member += alpha_membership(rec.rows, off, corr.C, mode, 0.5).all_member
    print(f"{name:17s} R_T={np.mean(R):8.1f}  V_T={np.mean(V):7.1f}  comparator inside every set: {member}/5")

# %%
# Negative regret is expected here: optimistic sets let the learner spend
# part of the horizon on cheap unsafe arms, and that shows up as violation.
