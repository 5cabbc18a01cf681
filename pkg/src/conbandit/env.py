"""Problem instances: mean sequences, corruption schedules, feedback sampling.

Losses are two-point {0, 1} draws and violations two-point {-1, +1} draws
matching the prescribed means, so every realization has the bounded
support the algorithms assume while carrying maximal variance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

LOSS_PATTERNS = ("constant", "sinusoidal-drift", "switching-best-arm")
CORRUPTION_PRESETS = ("none", "burst", "spread", "front-loaded")


class InvalidConfig(ValueError):
    pass


class InfeasibleInstance(ValueError):
    pass


@dataclass(frozen=True)
class ProblemInstance:
    """Ground-truth means. Rounds are stored 0-based along the time axis."""

    T: int
    K: int
    m: int
    loss_means: np.ndarray  # (T, K) in [0, 1]
    constraint_means: np.ndarray  # (m, T, K) in [-1, 1]

    def __post_init__(self):
        lm = np.asarray(self.loss_means, dtype=float)
        cm = np.asarray(self.constraint_means, dtype=float)
        if self.T < 1 or self.K < 1 or self.m < 1:
            raise InvalidConfig(f"need T, K, m >= 1, got {(self.T, self.K, self.m)}")
        if lm.shape != (self.T, self.K):
            raise InvalidConfig(f"loss_means shape {lm.shape} != {(self.T, self.K)}")
        if cm.shape != (self.m, self.T, self.K):
            raise InvalidConfig(f"constraint_means shape {cm.shape} != {(self.m, self.T, self.K)}")
        if np.any(lm < 0) or np.any(lm > 1):
            raise InvalidConfig("loss means must lie in [0, 1]")
        if np.any(cm < -1) or np.any(cm > 1):
            raise InvalidConfig("constraint means must lie in [-1, 1]")
        lm.setflags(write=False)
        cm.setflags(write=False)
        object.__setattr__(self, "loss_means", lm)
        object.__setattr__(self, "constraint_means", cm)

    def to_json(self) -> str:
        # repr-based float output is the shortest string that round-trips bit-exactly
        doc = {
            "T": self.T,
            "K": self.K,
            "m": self.m,
            "loss_means": self.loss_means.tolist(),
            "constraint_means": self.constraint_means.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        doc = json.loads(text)
        return cls(
            T=int(doc["T"]),
            K=int(doc["K"]),
            m=int(doc["m"]),
            loss_means=np.array(doc["loss_means"], dtype=float),
            constraint_means=np.array(doc["constraint_means"], dtype=float),
        )


@dataclass(frozen=True)
class RoundFeedback:
    """What the learner sees after round t.

    Bandit channels carry only the chosen arm's entry: a float loss and an
    (m,) violation vector. Full channels carry the (K,) loss vector and the
    (m, K) violation matrix.
    """

    chosen_arm: int
    loss: np.ndarray | float
    violations: np.ndarray
    full_loss: bool
    full_constraints: bool

    @classmethod
    def observe(cls, loss_vec, viol_mat, arm: int, full_loss: bool, full_constraints: bool) -> "RoundFeedback":
        loss = np.asarray(loss_vec) if full_loss else float(loss_vec[arm])
        viol = np.asarray(viol_mat) if full_constraints else np.asarray(viol_mat)[:, arm]
        return cls(int(arm), loss, viol, full_loss, full_constraints)


@dataclass
class CorruptionSchedule:
    """Stationary anchor plus sparse per-round perturbations (1-based rounds)."""

    base_constraint_means: np.ndarray  # (m, K)
    perturbations: list[tuple[int, int, np.ndarray]] = field(default_factory=list)
    target_budget: float = 0.0

    @classmethod
    def from_preset(
        cls,
        base,
        T: int,
        preset: str = "none",
        target: float = 0.0,
        constraint: int | str = 0,
        delta=None,
        start: int | None = None,
    ) -> "CorruptionSchedule":
        """Place enough copies of ``delta`` to spend ``target`` l1 budget.

        ``burst`` uses a contiguous window (starting at ``start``, default
        T//4 + 1), ``spread`` n evenly spaced rounds, ``front-loaded`` the
        first n rounds. The final copy is scaled to hit the target exactly.
        """
        base = np.atleast_2d(np.asarray(base, dtype=float))
        m, K = base.shape
        if preset not in CORRUPTION_PRESETS:
            raise InvalidConfig(f"unknown corruption preset {preset!r}")
        if target < 0:
            raise InvalidConfig("corruption target must be non-negative")
        if preset == "none" or target == 0:
            return cls(base, [], float(target))
        d = np.asarray(delta if delta is not None else np.eye(K)[0], dtype=float)
        if d.shape != (K,):
            raise InvalidConfig(f"corruption delta must have {K} entries")
        norm = float(np.abs(d).sum())
        if norm == 0:
            raise InvalidConfig("corruption delta must be non-zero")
        n = min(T, math.ceil(target / norm - 1e-12))
        if preset == "front-loaded":
            rounds = list(range(1, n + 1))
        elif preset == "burst":
            s = T // 4 + 1 if start is None else int(start)
            s = max(1, min(s, T - n + 1))
            rounds = list(range(s, s + n))
        else:
            # n distinct, evenly spaced rounds (a fixed ceil(T/n) stride can run out before n)
            rounds = [1 + (k * T) // n for k in range(n)]
        if constraint == "all":
            targets = list(range(m))
        else:
            if not 0 <= int(constraint) < m:
                raise InvalidConfig(f"corruption constraint index {constraint} out of range")
            targets = [int(constraint)]
        perturbations = []
        remaining = float(target)
        for r in rounds:
            scale = min(1.0, remaining / norm)
            remaining -= scale * norm
            for i in targets:
                perturbations.append((r, i, scale * d))
        return cls(base, perturbations, float(target))

    def materialize(self, T: int) -> np.ndarray:
        m, K = self.base_constraint_means.shape
        out = np.broadcast_to(self.base_constraint_means[:, None, :], (m, T, K)).copy()
        for r, i, d in self.perturbations:
            if not 1 <= r <= T:
                raise InvalidConfig(f"perturbation round {r} outside [1, {T}]")
            out[i, r - 1] += d
        return np.clip(out, -1.0, 1.0)


@dataclass
class EnvConfig:
    T: int
    K: int
    m: int
    loss_base: list
    constraint_base: list
    loss_pattern: str = "constant"
    loss_amplitude: float = 0.2
    loss_period: int = 100
    switch_arms: list | None = None
    switch_loss: float = 0.1
    loss_jitter: float = 0.0
    corruption: dict | None = None
    rho_min: float | None = 0.05


def _loss_means(cfg: EnvConfig, rng: np.random.Generator) -> np.ndarray:
    T, K = cfg.T, cfg.K
    base = np.asarray(cfg.loss_base, dtype=float)
    if base.shape != (K,):
        raise InvalidConfig(f"loss_base must have {K} entries")
    if cfg.loss_pattern == "constant":
        out = np.tile(base, (T, 1))
    elif cfg.loss_pattern == "sinusoidal-drift":
        t = np.arange(1, T + 1)[:, None]
        phase = 2 * np.pi * np.arange(K) / K
        out = base + cfg.loss_amplitude * np.sin(2 * np.pi * t / cfg.loss_period + phase)
    elif cfg.loss_pattern == "switching-best-arm":
        arms = list(range(K)) if cfg.switch_arms is None else [int(a) for a in cfg.switch_arms]
        if not arms or any(not 0 <= a < K for a in arms):
            raise InvalidConfig("switch_arms must list valid arm indices")
        if cfg.loss_period < 1:
            raise InvalidConfig("loss_period must be >= 1")
        out = np.tile(base, (T, 1))
        block = np.arange(T) // cfg.loss_period
        best = np.asarray(arms)[block % len(arms)]
        out[np.arange(T), best] = cfg.switch_loss
    else:
        raise InvalidConfig(f"unknown loss pattern {cfg.loss_pattern!r}; expected one of {LOSS_PATTERNS}")
    if cfg.loss_jitter > 0:
        out = out + rng.uniform(-cfg.loss_jitter, cfg.loss_jitter, size=out.shape)
    return np.clip(out, 0.0, 1.0)


def arm_slack(constraint_means: np.ndarray) -> tuple[float, int]:
    """max_a min_{t,i} -g(a), with the lowest-index maximizer."""
    worst = (-constraint_means).min(axis=(0, 1))
    a = int(np.argmax(worst))
    return float(worst[a]), a


def build_instance(config: EnvConfig, rng: np.random.Generator) -> ProblemInstance:
    if config.T < 1:
        raise InvalidConfig("horizon T must be >= 1")
    if config.K < 1:
        raise InvalidConfig("arm count K must be >= 1")
    if config.m < 1:
        raise InvalidConfig("constraint count m must be >= 1")
    base = np.asarray(config.constraint_base, dtype=float)
    if base.shape != (config.m, config.K):
        raise InvalidConfig(f"constraint_base must be {config.m}x{config.K}")
    loss = _loss_means(config, rng)
    corr = dict(config.corruption or {})
    unknown = set(corr) - {"preset", "target", "constraint", "delta", "start"}
    if unknown:
        raise InvalidConfig(f"unknown corruption keys {sorted(unknown)}")
    schedule = CorruptionSchedule.from_preset(base, config.T, **corr)
    cons = schedule.materialize(config.T)
    if config.rho_min is not None:
        rho, _ = arm_slack(cons)
        if rho < config.rho_min:
            raise InfeasibleInstance(
                f"no arm satisfies every constraint at every round with margin {config.rho_min} "
                f"(best margin {rho:.4g})"
            )
    return ProblemInstance(config.T, config.K, config.m, loss, cons)


class Corruption(NamedTuple):
    C: float
    per_constraint: np.ndarray  # (m,)
    anchors: np.ndarray  # (m, K)


def compute_corruption(inst: ProblemInstance) -> Corruption:
    """Exact C = max_i min_g sum_t ||g_{t,i} - g||_1.

    The l1 objective separates per coordinate, so the lower median over
    rounds is a minimizer for every (i, a).
    """
    g = inst.constraint_means
    anchors = np.sort(g, axis=1)[:, (inst.T - 1) // 2, :]
    per = np.abs(g - anchors[:, None, :]).sum(axis=(1, 2))
    return Corruption(float(per.max()), per, anchors)


def sample_round(inst: ProblemInstance, t: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Loss vector (K,) and violation matrix (m, K) for round t (1-based)."""
    if not 1 <= t <= inst.T:
        raise IndexError(f"round {t} outside [1, {inst.T}]")
    lm = inst.loss_means[t - 1]
    gm = inst.constraint_means[:, t - 1, :]
    loss = (rng.random(inst.K) < lm).astype(float)
    viol = np.where(rng.random((inst.m, inst.K)) < (1.0 + gm) / 2.0, 1.0, -1.0)
    return loss, viol


def sample_all(inst: ProblemInstance, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Every round's realizations at once: losses (T, K), violations (m, T, K)."""
    loss = (rng.random((inst.T, inst.K)) < inst.loss_means).astype(float)
    viol = np.where(rng.random((inst.m, inst.T, inst.K)) < (1.0 + inst.constraint_means) / 2.0, 1.0, -1.0)
    return loss, viol
