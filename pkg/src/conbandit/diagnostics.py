"""Post-hoc checks against ground truth: alpha-mixed comparators,
doubling phases, and confidence-bound coverage of the estimators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import spawn
from .env import ProblemInstance, compute_corruption, sample_all
from .estimators import RADIUS_CAP
from .metrics import MEMBERSHIP_TOL, SwitchBenchmark
from .offline import OfflineSolution

DIAGNOSTICS_HEADER = ["seed", "t", "alpha", "member", "worst_row_slack"]


class MissingGroundTruth(ValueError):
    pass


def alpha_schedule(rho: float, C: float, mode: str, T: int, beta: float | None = None) -> np.ndarray:
    """Mixing weight per round: rho / (rho + 2C/t) in full mode, a constant
    rho / (rho + 2C/T^beta) in bandit mode."""
    if rho <= 0:
        raise ValueError(f"need a positive Slater margin, got {rho}")
    if C < 0:
        raise ValueError("corruption must be non-negative")
    if mode == "full":
        t = np.arange(1, T + 1)
        return rho / (rho + 2.0 * C / t)
    if mode == "bandit":
        if beta is None:
            raise ValueError("bandit mode needs beta")
        return np.full(T, rho / (rho + 2.0 * C / T**beta))
    raise ValueError(f"mode must be 'full' or 'bandit', got {mode!r}")


def _slater_point(offline: OfflineSolution, mode: str, K: int):
    if mode == "full":
        return offline.rho, np.asarray(offline.rho_strategy, dtype=float)
    return offline.rho_arm_value, np.eye(K)[offline.rho_arm]


def build_alpha_benchmark(offline: OfflineSolution, C: float, mode: str, T: int, beta: float | None = None) -> np.ndarray:
    """(T, K) comparators (1 - alpha_t) x_safe + alpha_t x_opt.

    The safe point is the mixed Slater witness in full mode and the
    safest single arm in bandit mode.
    """
    xs = np.asarray(offline.opt_strategy, dtype=float)
    rho, xd = _slater_point(offline, mode, xs.size)
    a = alpha_schedule(rho, C, mode, T, beta)[:, None]
    return (1.0 - a) * xd[None, :] + a * xs[None, :]


@dataclass
class AlphaDiagnostic:
    mode: str
    rounds: np.ndarray  # 1-based rounds that had a decision set
    alpha: np.ndarray
    member: np.ndarray  # bool per round
    worst_row_slack: np.ndarray  # max_i rows_i . comparator

    @property
    def all_member(self) -> bool:
        return bool(self.member.all())

    def csv_rows(self, seed: int):
        for t, a, m, w in zip(self.rounds, self.alpha, self.member, self.worst_row_slack):
            yield [seed, int(t), repr(float(a)), int(bool(m)), repr(float(w))]


def alpha_membership(rows: np.ndarray, offline: OfflineSolution, C: float, mode: str, beta: float | None = None, tol: float = MEMBERSHIP_TOL) -> AlphaDiagnostic:
    """Check the comparator against every recorded decision set.

    ``rows`` is the (T, m, K) record of decision sets; rounds without a set
    (exploration) are NaN and skipped.
    """
    if rows is None:
        raise MissingGroundTruth("run was not recorded with decision sets")
    T = rows.shape[0]
    U = build_alpha_benchmark(offline, C, mode, T, beta)
    alpha = alpha_schedule(_slater_point(offline, mode, U.shape[1])[0], C, mode, T, beta)
    have = ~np.isnan(rows).any(axis=(1, 2))
    worst = np.einsum("tik,tk->ti", rows[have], U[have]).max(axis=1)
    return AlphaDiagnostic(mode, np.flatnonzero(have) + 1, alpha[have], worst <= tol, worst)


def write_diagnostics_csv(path, diagnostics: dict) -> None:
    """``diagnostics`` maps seed -> AlphaDiagnostic."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAGNOSTICS_HEADER)
        for seed in sorted(diagnostics):
            w.writerows(diagnostics[seed].csv_rows(seed))


def doubling_partition(T: int) -> list[tuple[int, int]]:
    """Phases [1,1], [2,3], [4,7], ... with the last one cut at T."""
    if T < 1:
        raise ValueError("T must be >= 1")
    out, s = [], 1
    while s <= T:
        out.append((s, min(2 * s - 1, T)))
        s *= 2
    return out


def doubling_benchmark(offline: OfflineSolution, C: float, T: int) -> SwitchBenchmark:
    """Per-phase comparator frozen at the alpha of the phase's first round."""
    phases = doubling_partition(T)
    U = build_alpha_benchmark(offline, C, "full", T)
    return SwitchBenchmark(phases, np.array([U[s - 1] for s, _ in phases]))


@dataclass
class EstimatorTrajectory:
    mode: str
    means: np.ndarray  # (T, m, K) estimate after round t
    counts: np.ndarray  # (T, K)


def estimator_trajectory(inst: ProblemInstance, mode: str, rng, arms=None) -> EstimatorTrajectory:
    """Estimator snapshots after every round, computed with cumulative sums.

    In bandit mode the pulled arms default to i.i.d. uniform draws; any
    sequence can be passed through ``arms``.
    """
    world, pick = spawn(rng, 2)
    _, G = sample_all(inst, world)  # (m, T, K)
    T, K = inst.T, inst.K
    if mode == "full":
        counts = np.broadcast_to(np.arange(1, T + 1)[:, None], (T, K)).copy()
        sums = np.cumsum(G, axis=1)
    elif mode == "bandit":
        if arms is None:
            arms = pick.integers(0, K, size=T)
        onehot = np.zeros((T, K))
        onehot[np.arange(T), np.asarray(arms)] = 1.0
        counts = np.cumsum(onehot, axis=0).astype(np.int64)
        sums = np.cumsum(G * onehot[None], axis=1)
    else:
        raise ValueError(f"mode must be 'full' or 'bandit', got {mode!r}")
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts[None] > 0, sums / np.maximum(counts, 1)[None], 0.0)
    return EstimatorTrajectory(mode, np.transpose(means, (1, 0, 2)), counts)


def coverage_count(
    trajectories,
    inst: ProblemInstance | None,
    bound: str = "average",
    delta: float = 0.1,
    C: float | None = None,
    radius_scale: float = 4.0,
    bound_scale: float = 1.0,
) -> float:
    """Fraction of trajectories whose estimate stays inside the bound at every (t, a, i).

    ``average``: |ghat - time-average mean| <= min(radius + C/N + C/T, 2).
    ``anchor``:  |ghat - median anchor|     <= min(radius + C/N, 2).
    ``radius_scale`` and ``bound_scale`` exist for mutation checks.
    """
    if inst is None:
        raise MissingGroundTruth("coverage needs the instance's true means")
    corr = compute_corruption(inst)
    C = corr.C if C is None else C
    T, K, m = inst.T, inst.K, inst.m
    if bound == "average":
        target = inst.constraint_means.mean(axis=1)  # (m, K)
        extra_T = C / T
    elif bound == "anchor":
        target = corr.anchors
        extra_T = 0.0
    else:
        raise ValueError(f"unknown bound {bound!r}")
    L = math.log(T * K * m / delta)
    hits = 0
    trajectories = list(trajectories)
    for tr in trajectories:
        n = tr.counts.astype(float)  # (T, K)
        with np.errstate(divide="ignore", invalid="ignore"):
            b = radius_scale * np.sqrt(L / n) + C / n + extra_T
        b = np.where(n > 0, np.minimum(b, RADIUS_CAP), RADIUS_CAP) * bound_scale
        dev = np.abs(tr.means - target[None])  # (T, m, K)
        hits += bool((dev <= b[:, None, :] + 1e-12).all())
    return hits / len(trajectories)
