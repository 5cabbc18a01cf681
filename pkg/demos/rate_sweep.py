"""
Regret growth on switching losses
=================================

Arms 0 and 1 trade the lead every 16 rounds and no constraint binds at the
optimum. Mean regret of the full-feedback learner over a few horizons, with
a log-log slope fit.
"""

import numpy as np

from conbandit.algorithms import AlgoParams, run_conomd_fs
from conbandit.core import make_rng
from conbandit.env import build_instance
from conbandit.metrics import fit_scaling_exponent
from conbandit.offline import solve_offline
from conbandit.scenarios import switching_stochastic

points = []
for T in (2**10, 2**11, 2**12, 2**13):
    inst = build_instance(switching_stochastic(T), make_rng(0))
    opt = solve_offline(inst).opt_value
    R = [run_conomd_fs(inst, AlgoParams(), s, opt=opt).regret for s in range(8)]
    points.append((T, float(np.mean(R))))
    print(f"T={T:5d}  mean R_T={points[-1][1]:7.1f}  R_T/sqrt(T)={points[-1][1] / np.sqrt(T):.2f}")

fit = fit_scaling_exponent(points)
print(f"slope={fit.slope:.3f}  r2={fit.r2:.3f}  points used={fit.n_points}")
