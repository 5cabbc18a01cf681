"""The learners: full-feedback OMD with fixed share, its IX variant,
explore-then-optimize for bandit constraints, and a known-C baseline.

Every run draws its realizations from one child stream and its arm
choices from another, both spawned from the run's seed, so different
algorithms given the same seed face the same world.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import make_rng, sample_arm, spawn, strategy_uniform
from .env import InvalidConfig, ProblemInstance, RoundFeedback, sample_all
from .estimators import ConstraintEstimator, ix_estimate
from .metrics import MetricsAccumulator
from .offline import solve_opt
from .omd import PROJ_TOL, build_decision_set, fixed_share_mix, kl_project, unconstrained_md_point

STATUS_CODES = {"none": 0, "interior": 1, "boundary": 2, "fallback": 3}
TINY = np.finfo(float).tiny


@dataclass
class AlgoParams:
    delta: float = 0.1
    beta: float = 0.5
    eta_override: float | None = None
    gamma_override: float | None = None
    known_c: float | None = None
    proj_tol: float = PROJ_TOL
    record_rows: bool = False  # keep every decision set, (T, m, K)
    record_estimates: bool = False  # keep estimator means/counts per round

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise InvalidConfig("delta must lie in (0, 1)")
        if not 0 <= self.beta <= 1:
            raise InvalidConfig("beta must lie in [0, 1]")


@dataclass
class RunRecord:
    algorithm: str
    T: int
    eta: float
    gamma: float | None
    T0: int
    strategies: np.ndarray  # (T, K), x_t used at round t
    arms: np.ndarray  # (T,)
    losses: np.ndarray  # (T,) realized loss of the pulled arm
    expected_violation: np.ndarray  # (T, m), g_bar_{t,i} . x_t
    status: np.ndarray  # (T,) STATUS_CODES of the projection made at the end of round t
    multipliers: np.ndarray  # (T, m)
    opt: float
    regret: float = 0.0
    violation: float = 0.0
    fallbacks: int = 0
    cumulative_loss: float = 0.0
    rows: np.ndarray | None = None  # (T, m, K) decision set built at round t
    est_means: np.ndarray | None = None  # (T, m, K)
    est_counts: np.ndarray | None = None  # (T, K)
    loss_vectors: np.ndarray | None = field(default=None, repr=False)  # (T, K) realized, for switching regret

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "T": self.T,
            "opt": self.opt,
            "regret": self.regret,
            "violation": self.violation,
            "fallbacks": self.fallbacks,
        }


def default_eta(K: int, T: int, bandit_losses: bool) -> float:
    if bandit_losses:
        return math.sqrt(math.log(K * T) / (K * T))
    return math.sqrt(math.log(K * T) / T)


def exploration_length(T: int, beta: float) -> int:
    """ceil(T^beta), guarded against float noise on exact powers."""
    return max(1, math.ceil(T**beta - 1e-9))


def _rng(rng):
    return make_rng(rng) if isinstance(rng, (int, np.integer)) else rng


class _Recorder:
    def __init__(self, algorithm, inst: ProblemInstance, params: AlgoParams, opt, eta, gamma, T0):
        T, K, m = inst.T, inst.K, inst.m
        if opt is None:
            opt = solve_opt(inst)[0]
        self.inst = inst
        self.acc = MetricsAccumulator(inst, opt)
        self.rec = RunRecord(
            algorithm=algorithm,
            T=T,
            eta=eta,
            gamma=gamma,
            T0=T0,
            strategies=np.empty((T, K)),
            arms=np.empty(T, dtype=np.int64),
            losses=np.empty(T),
            expected_violation=np.empty((T, m)),
            status=np.zeros(T, dtype=np.int8),
            multipliers=np.zeros((T, m)),
            opt=float(opt),
            rows=np.full((T, m, K), np.nan) if params.record_rows else None,
            est_means=np.empty((T, m, K)) if params.record_estimates else None,
            est_counts=np.empty((T, K), dtype=np.int64) if params.record_estimates else None,
        )

    def act(self, t, x, a, loss):
        r = self.rec
        r.strategies[t - 1] = x
        r.arms[t - 1] = a
        r.losses[t - 1] = loss
        r.expected_violation[t - 1] = self.acc.update_round(t, x, loss)

    def estimator(self, t, est):
        if self.rec.est_means is not None:
            self.rec.est_means[t - 1] = est.means
            self.rec.est_counts[t - 1] = est.counts

    def projection(self, t, ds, proj):
        r = self.rec
        r.status[t - 1] = STATUS_CODES[proj.status]
        r.multipliers[t - 1] = proj.multipliers
        if r.rows is not None:
            r.rows[t - 1] = ds.rows

    def done(self, loss_vectors=None):
        r = self.rec
        r.regret, r.violation = self.acc.finalize()
        r.cumulative_loss = self.acc.loss_sum
        r.fallbacks = int((r.status == STATUS_CODES["fallback"]).sum())
        r.loss_vectors = loss_vectors
        return r


def _run_fixed_share(name, inst, params, rng, opt, bandit_losses):
    T, K, m = inst.T, inst.K, inst.m
    eta = params.eta_override if params.eta_override is not None else default_eta(K, T, bandit_losses)
    gamma = None
    if bandit_losses:
        gamma = params.gamma_override if params.gamma_override is not None else eta / 2
    world, arm_rng = spawn(_rng(rng), 2)
    L, G = sample_all(inst, world)
    est = ConstraintEstimator("full", T, K, m, params.delta)
    out = _Recorder(name, inst, params, opt, eta, gamma, 0)
    x = strategy_uniform(K)
    lam = None
    for t in range(1, T + 1):
        a = sample_arm(x, arm_rng)
        out.act(t, x, a, L[t - 1, a])
        fb = RoundFeedback.observe(L[t - 1], G[:, t - 1, :], a, not bandit_losses, True)
        est.update(fb)
        out.estimator(t, est)
        ds = build_decision_set(est)
        lvec = ix_estimate(gamma, a, fb.loss, x) if bandit_losses else fb.loss
        proj = kl_project(unconstrained_md_point(x, lvec, eta), ds, tol=params.proj_tol, warm=lam)
        lam = proj.multipliers
        out.projection(t, ds, proj)
        x = fixed_share_mix(proj.point, T, K)
    return out.done(L)


def run_conomd_fs(inst: ProblemInstance, params: AlgoParams, rng, opt: float | None = None) -> RunRecord:
    """Full feedback on losses and constraints; fixed-share OMD over the optimistic sets."""
    return _run_fixed_share("conomd_fs", inst, params, rng, opt, bandit_losses=False)


def run_conomd_fs_ix(inst: ProblemInstance, params: AlgoParams, rng, opt: float | None = None) -> RunRecord:
    """Bandit losses through the IX estimate, constraints still observed in full."""
    return _run_fixed_share("conomd_fs_ix", inst, params, rng, opt, bandit_losses=True)


def _run_explore_optimize(name, inst, params, rng, opt, n0, radii_fn):
    T, K, m = inst.T, inst.K, inst.m
    T0 = K * n0
    if T0 > T:
        raise InvalidConfig(f"exploration needs K*ceil(T^beta) = {T0} rounds but T = {T}")
    eta = params.eta_override if params.eta_override is not None else default_eta(K, T, True)
    gamma = params.gamma_override if params.gamma_override is not None else eta / 2
    world, arm_rng = spawn(_rng(rng), 2)
    L, G = sample_all(inst, world)
    est = ConstraintEstimator("bandit", T, K, m, params.delta)
    out = _Recorder(name, inst, params, opt, eta, gamma, T0)
    eye = np.eye(K)
    for t in range(1, T0 + 1):
        a = (t - 1) // n0
        out.act(t, eye[a], a, L[t - 1, a])
        est.update(RoundFeedback.observe(L[t - 1], G[:, t - 1, :], a, False, False))
        out.estimator(t, est)
    x = strategy_uniform(K)
    lam = None
    for t in range(T0 + 1, T + 1):
        a = sample_arm(x, arm_rng)
        out.act(t, x, a, L[t - 1, a])
        fb = RoundFeedback.observe(L[t - 1], G[:, t - 1, :], a, False, False)
        est.update(fb)
        out.estimator(t, est)
        ds = build_decision_set(est, radii_fn(est))
        raw = unconstrained_md_point(x, ix_estimate(gamma, a, fb.loss, x), eta)
        proj = kl_project(raw, ds, tol=params.proj_tol, warm=lam)
        lam = proj.multipliers
        out.projection(t, ds, proj)
        # no fixed share here, so keep every entry representable as positive
        x = np.maximum(proj.point, TINY)
        x /= x.sum()
    return out.done(L)


def run_expopt(inst: ProblemInstance, params: AlgoParams, rng, opt: float | None = None) -> RunRecord:
    """Round-robin blocks of ceil(T^beta) pulls per arm, then IX-OMD over bandit decision sets."""
    n0 = exploration_length(inst.T, params.beta)
    return _run_explore_optimize("expopt", inst, params, rng, opt, n0, lambda est: est.radii())


def run_known_c_baseline(inst: ProblemInstance, params: AlgoParams, rng, opt: float | None = None) -> RunRecord:
    """One forced pull per arm, then IX-OMD with radii widened by the known corruption."""
    C = params.known_c
    if C is None or C < 0:
        raise InvalidConfig("known_c must be a non-negative number")
    return _run_explore_optimize("known_c", inst, params, rng, opt, 1, lambda est: est.radii_known_c(C))


ALGORITHMS = {
    "conomd_fs": run_conomd_fs,
    "conomd_fs_ix": run_conomd_fs_ix,
    "expopt": run_expopt,
    "known_c": run_known_c_baseline,
}
