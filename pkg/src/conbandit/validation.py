"""Oracle-equivalence and coverage suites behind ``conbandit validate``.

Each suite returns a SuiteReport; the mutation knobs (``proj_tol``,
``radius_scale``) let a caller confirm that a suite can actually fail.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import xlogy

from .core import make_rng, spawn
from .diagnostics import coverage_count, estimator_trajectory
from .env import CorruptionSchedule, InfeasibleInstance, ProblemInstance, compute_corruption
from .offline import compute_rho, grid_oracle, solve_opt, unique_rows
from .omd import PROJ_TOL, DecisionSet, kl_project


@dataclass
class SuiteReport:
    suite: str
    passed: bool
    cases: int
    failures: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)
    elapsed_s: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, default=float)


def kl_objective(raw):
    """Vectorized D(x || raw/sum(raw)) over rows of an (N, K) array."""
    log_q = np.log(np.asarray(raw, dtype=float) / np.sum(raw))
    return lambda P: xlogy(P, P).sum(axis=1) - P @ log_q


def projection_suite(n: int = 200, seed: int = 0, proj_tol: float = PROJ_TOL, l1_tol: float = 1e-3, step: float = 1e-3) -> SuiteReport:
    t0 = time.perf_counter()
    rng = make_rng(seed)
    fails, checked = [], 0
    for case in range(n):
        K = int(rng.integers(2, 4))
        m = int(rng.integers(1, 3))
        raw = rng.uniform(0.05, 1.0, K)
        rows = rng.uniform(-1.0, 1.0, (m, K))
        ref = grid_oracle(kl_objective(raw), rows, step=step, K=K, refine=2)
        if not ref.feasible:
            continue
        checked += 1
        got = kl_project(raw, DecisionSet(rows), tol=proj_tol)
        dist = float(np.abs(got.point - ref.point).sum())
        if got.status == "fallback" or dist > l1_tol:
            fails.append({"case": case, "K": K, "m": m, "l1": dist, "status": got.status})
    return SuiteReport("projection", not fails, checked, fails, {"skipped_empty": n - checked}, time.perf_counter() - t0)


def rho_oracle(rows: np.ndarray, step: float = 1e-3) -> float:
    """max_x min_r -(row_r . x) by lattice search, then exact ties among near-active rows."""
    rows = np.atleast_2d(rows)
    K = rows.shape[1]
    f = lambda P: (P @ rows.T).max(axis=1)  # noqa: E731
    first = grid_oracle(f, None, step=step, K=K)
    near = rows[rows @ first.point >= first.value - 0.05]
    H = [a - b for i, a in enumerate(near) for b in near[i + 1 :]]
    H = np.array(H).reshape(-1, K)
    second = grid_oracle(f, None, step=step, K=K, faces=(H, np.zeros(len(H))))
    return -min(first.value, second.value)


def random_small_instance(rng, T_max: int = 20, K_max: int = 3, m_max: int = 2, g_high: float = 0.6) -> ProblemInstance:
    T = int(rng.integers(1, T_max + 1))
    K = int(rng.integers(2, K_max + 1))
    m = int(rng.integers(1, m_max + 1))
    return ProblemInstance(T, K, m, rng.uniform(0, 1, (T, K)), rng.uniform(-1, g_high, (m, T, K)))


def lp_suite(n: int = 200, seed: int = 1, value_tol: float = 1e-3) -> SuiteReport:
    t0 = time.perf_counter()
    rng = make_rng(seed)
    fails = []
    worst = {"opt": 0.0, "rho_mixed": 0.0, "rho_arm": 0.0}
    for case in range(n):
        inst = random_small_instance(rng)
        lsum = inst.loss_means.sum(axis=0)
        gbar = inst.constraint_means.mean(axis=1)
        ref = grid_oracle(lsum, gbar, step=1e-2)
        try:
            opt, _ = solve_opt(inst)
        except InfeasibleInstance:
            opt = math.inf
        if ref.feasible != math.isfinite(opt):
            fails.append({"case": case, "what": "opt feasibility", "lp": opt, "grid": ref.value})
        elif ref.feasible:
            err = abs(opt - ref.value)
            worst["opt"] = max(worst["opt"], err)
            if err > value_tol:
                fails.append({"case": case, "what": "opt", "lp": opt, "grid": ref.value})
        U = unique_rows(inst)
        rm = compute_rho(inst, "mixed").rho
        err = abs(rm - rho_oracle(U))
        worst["rho_mixed"] = max(worst["rho_mixed"], err)
        if err > value_tol:
            fails.append({"case": case, "what": "rho_mixed", "lp": rm, "err": err})
        ra = compute_rho(inst, "arm").rho
        vert = grid_oracle(lambda P: (P @ U.T).max(axis=1), None, step=1.0, K=inst.K)
        err = abs(ra - (-vert.value))
        worst["rho_arm"] = max(worst["rho_arm"], err)
        if err > value_tol:
            fails.append({"case": case, "what": "rho_arm", "lp": ra, "err": err})
    return SuiteReport("lp", not fails, n, fails, {"max_abs_error": worst}, time.perf_counter() - t0)


def anchor_grid_search(inst: ProblemInstance, step: float = 1e-3) -> float:
    """max_i sum_a min over a grid on [-1, 1] of sum_t |g_t(a) - g|."""
    grid = np.linspace(-1.0, 1.0, int(round(2.0 / step)) + 1)
    g = inst.constraint_means  # (m, T, K)
    best = np.abs(g[..., None] - grid).sum(axis=1).min(axis=-1)  # (m, K)
    return float(best.sum(axis=1).max())


def corruption_suite(n: int = 100, seed: int = 2, tol: float = 1e-2) -> SuiteReport:
    t0 = time.perf_counter()
    rng = make_rng(seed)
    fails = []
    worst = 0.0
    for case in range(n):
        inst = random_small_instance(rng, T_max=15, g_high=1.0)
        corr = compute_corruption(inst)
        ref = anchor_grid_search(inst)
        err = abs(corr.C - ref)
        worst = max(worst, err)
        if err > tol:
            fails.append({"case": case, "what": "grid", "exact": corr.C, "grid": ref})
        # anchor vs time average, in l1 per constraint: never more than C/T
        gap = np.abs(corr.anchors - inst.constraint_means.mean(axis=1)).sum(axis=1).max()
        if gap > corr.C / inst.T + 1e-12:
            fails.append({"case": case, "what": "anchor_vs_average", "gap": float(gap), "bound": corr.C / inst.T})
    return SuiteReport("corruption", not fails, n, fails, {"max_abs_error": worst}, time.perf_counter() - t0)


def coverage_instance(level: str = "heavy", T: int = 2000, K: int = 10, m: int = 10, seed: int = 3) -> ProblemInstance:
    """Many (arm, constraint) paths near zero mean with corruption on every constraint.

    ``heavy`` spends T^0.75 in one burst; ``light`` spends a budget of 1
    spread out, so the noise term of the bound does all the work.
    """
    rng = make_rng(seed)
    base = rng.uniform(-0.1, 0.1, (m, K))
    delta = rng.uniform(-0.5, 0.5, K)
    if level == "heavy":
        sched = CorruptionSchedule.from_preset(base, T, "burst", target=T**0.75, constraint="all", delta=delta)
    elif level == "light":
        sched = CorruptionSchedule.from_preset(base, T, "spread", target=1.0, constraint="all", delta=delta)
    else:
        raise ValueError(f"unknown corruption level {level!r}")
    return ProblemInstance(T, K, m, np.full((T, K), 0.5), sched.materialize(T))


def coverage_suite(seeds: int = 200, delta: float = 0.1, radius_scale: float = 4.0, threshold: float | None = None, seed: int = 4) -> SuiteReport:
    t0 = time.perf_counter()
    threshold = 1.0 - delta if threshold is None else threshold
    detail, fails = {}, []
    for k, level in enumerate(("light", "heavy")):
        inst = coverage_instance(level)
        C = compute_corruption(inst).C
        detail[f"{level}_C"] = C
        for j, mode in enumerate(("full", "bandit")):
            streams = spawn(make_rng(seed + 2 * k + j), seeds)
            trajs = (estimator_trajectory(inst, mode, r) for r in streams)
            frac = coverage_count(trajs, inst, "average", delta, C, radius_scale=radius_scale)
            detail[f"{level}_{mode}"] = frac
            if frac < threshold:
                fails.append({"instance": level, "mode": mode, "coverage": frac, "threshold": threshold})
    return SuiteReport("coverage", not fails, 4 * seeds, fails, detail, time.perf_counter() - t0)


SUITES = {
    "projection": projection_suite,
    "lp": lp_suite,
    "corruption": corruption_suite,
    "coverage": coverage_suite,
}
