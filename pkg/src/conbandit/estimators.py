"""Empirical constraint means, confidence radii, and the IX loss estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import RoundFeedback

RADIUS_CAP = 2.0


class ModeMismatch(ValueError):
    pass


class ConstraintEstimator:
    """Running means of observed violations.

    In ``full`` mode every arm is observed each round and the count is the
    shared round counter t; in ``bandit`` mode only the pulled arm's sums
    and count move. Unpulled arms report a mean of 0 and the capped radius.
    """

    def __init__(self, mode: str, T: int, K: int, m: int, delta: float = 0.1):
        if mode not in ("full", "bandit"):
            raise ValueError(f"mode must be 'full' or 'bandit', got {mode!r}")
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        self.mode = mode
        self.T, self.K, self.m, self.delta = T, K, m, delta
        self.sums = np.zeros((m, K))
        self.counts = np.zeros(K, dtype=np.int64)
        self.log_term = math.log(T * K * m / delta)

    def update(self, fb: RoundFeedback) -> "ConstraintEstimator":
        if (self.mode == "full") != fb.full_constraints:
            raise ModeMismatch(f"{self.mode}-mode estimator fed {'full' if fb.full_constraints else 'bandit'} feedback")
        if self.mode == "full":
            self.sums += fb.violations
            self.counts += 1
        else:
            self.sums[:, fb.chosen_arm] += fb.violations
            self.counts[fb.chosen_arm] += 1
        return self

    @property
    def means(self) -> np.ndarray:
        n = np.maximum(self.counts, 1)
        return np.where(self.counts > 0, self.sums / n, 0.0)

    def radii(self, scale: float = 4.0) -> np.ndarray:
        """Per-arm min(scale * sqrt(ln(TKm/delta) / N(a)), 2)."""
        n = self.counts.astype(float)
        with np.errstate(divide="ignore"):
            r = scale * np.sqrt(self.log_term / n)
        return np.minimum(np.where(n > 0, r, RADIUS_CAP), RADIUS_CAP)

    def radius(self, arm: int) -> float:
        return float(self.radii()[arm])

    def radii_known_c(self, C: float) -> np.ndarray:
        if C < 0:
            raise ValueError("corruption level must be non-negative")
        n = self.counts.astype(float)
        with np.errstate(divide="ignore"):
            r = 4.0 * np.sqrt(self.log_term / n) + C / n + C / self.T
        return np.minimum(np.where(n > 0, r, RADIUS_CAP), RADIUS_CAP)

    def radius_known_c(self, arm: int, C: float) -> float:
        return float(self.radii_known_c(C)[arm])


def ix_estimate(gamma: float, chosen: int, loss: float, x: np.ndarray) -> np.ndarray:
    """Implicit-exploration estimate: loss / (x[chosen] + gamma) at the pulled arm."""
    out = np.zeros(len(x))
    out[chosen] = loss / (x[chosen] + gamma)
    return out


@dataclass(frozen=True)
class LossEstimatorIX:
    gamma: float

    def __call__(self, chosen: int, loss: float, x: np.ndarray) -> np.ndarray:
        return ix_estimate(self.gamma, chosen, loss, x)
