"""Regret, positive violation, switching regret and power-law fits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .env import ProblemInstance

MEMBERSHIP_TOL = 1e-6


class InvalidBenchmark(ValueError):
    pass


class InvalidFit(ValueError):
    pass


class MetricsAccumulator:
    """Running sums for R_T and V_T against ground-truth means."""

    def __init__(self, inst: ProblemInstance, opt_value: float):
        self.inst = inst
        self.opt_value = float(opt_value)
        self.loss_sum = 0.0
        self.pos_violation = np.zeros(inst.m)
        self.rounds = 0

    def update_round(self, t: int, x, realized_loss: float) -> np.ndarray:
        """Fold round t (1-based) in; returns the expected violations g_bar_{t,i} . x."""
        if not 1 <= t <= self.inst.T:
            raise IndexError(f"round {t} outside [1, {self.inst.T}]")
        v = self.inst.constraint_means[:, t - 1, :] @ x
        self.loss_sum += float(realized_loss)
        self.pos_violation += np.maximum(v, 0.0)
        self.rounds += 1
        return v

    def finalize(self) -> tuple[float, float]:
        return self.loss_sum - self.opt_value, float(self.pos_violation.max())


def positive_violation(inst: ProblemInstance, strategies: np.ndarray) -> float:
    """V_T for a (T, K) array of played strategies."""
    v = np.einsum("itk,tk->it", inst.constraint_means, strategies)
    return float(np.maximum(v, 0.0).sum(axis=1).max())


@dataclass
class SwitchBenchmark:
    phases: list  # [(start, end)] 1-based inclusive, covering 1..T
    comparators: np.ndarray  # (S, K)

    def per_round(self, T: int) -> np.ndarray:
        out = np.empty((T, self.comparators.shape[1]))
        for (s, e), u in zip(self.phases, self.comparators):
            out[s - 1 : e] = u
        return out

    def violations(self, rows: np.ndarray, tol: float = MEMBERSHIP_TOL) -> list[int]:
        """Rounds (1-based) whose decision set excludes the phase comparator."""
        U = self.per_round(rows.shape[0])
        worst = np.einsum("tik,tk->ti", rows, U).max(axis=1)
        return [int(t) + 1 for t in np.flatnonzero(worst > tol)]


def switching_regret(strategies, benchmark: SwitchBenchmark, losses, rows=None) -> float:
    """sum_t l_t . x_t - l_t . u_t over realized loss vectors.

    When ``rows`` (T, m, K) is given, every comparator must lie in the
    decision sets of its phase.
    """
    X = np.asarray(strategies)
    L = np.asarray(losses)
    T = X.shape[0]
    covered = sorted(r for s, e in benchmark.phases for r in range(s, e + 1))
    if covered != list(range(1, T + 1)):
        raise InvalidBenchmark("phases must partition 1..T")
    if rows is not None:
        bad = benchmark.violations(np.asarray(rows))
        if bad:
            raise InvalidBenchmark(f"comparator outside the decision set at {len(bad)} rounds, first t={bad[0]}")
    U = benchmark.per_round(T)
    return float(np.einsum("tk,tk->", L, X - U))


class ScalingFit(NamedTuple):
    slope: float
    intercept: float
    r2: float
    n_points: int


def _loglog(T, v):
    x, y = np.log(T), np.log(v)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), r2


def fit_scaling_exponent(points) -> ScalingFit:
    """Least squares of ln(value) on ln(T).

    If r^2 < 0.9 the smallest horizon is dropped and the fit redone once
    (only while at least three points remain).
    """
    pts = sorted((float(T), float(v)) for T, v in points)
    if len(pts) < 3:
        raise InvalidFit("need at least 3 points")
    T = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    if np.any(v <= 0) or np.any(T <= 0):
        raise InvalidFit("horizons and values must be positive")
    fit = _loglog(T, v)
    if fit[2] < 0.9 and len(pts) > 3:
        return ScalingFit(*_loglog(T[1:], v[1:]), len(pts) - 1)
    return ScalingFit(*fit, len(pts))
