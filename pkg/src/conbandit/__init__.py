"""Constrained multi-armed bandits whose constraints drift or are corrupted."""

from .algorithms import ALGORITHMS, AlgoParams, RunRecord, run_conomd_fs, run_conomd_fs_ix, run_expopt, run_known_c_baseline
from .core import make_rng
from .env import EnvConfig, InfeasibleInstance, InvalidConfig, ProblemInstance, build_instance, compute_corruption
from .offline import solve_offline, solve_opt

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "AlgoParams",
    "EnvConfig",
    "InfeasibleInstance",
    "InvalidConfig",
    "ProblemInstance",
    "RunRecord",
    "build_instance",
    "compute_corruption",
    "make_rng",
    "run_conomd_fs",
    "run_conomd_fs_ix",
    "run_expopt",
    "run_known_c_baseline",
    "solve_offline",
    "solve_opt",
]
