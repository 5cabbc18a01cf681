"""Strategies on the simplex, arm sampling and the seeded RNG contract."""

from __future__ import annotations

import numpy as np

SIMPLEX_ATOL = 1e-9


class InvalidDimension(ValueError):
    pass


class InvalidStrategy(ValueError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator owned by exactly one run.

    Philox keyed through a SeedSequence, so distinct seeds (and spawned
    children) never share a stream.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def spawn(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Independent child streams, deterministic given the parent's seed."""
    return [np.random.Generator(np.random.Philox(s)) for s in rng.bit_generator.seed_seq.spawn(n)]


def strategy_uniform(K: int) -> np.ndarray:
    if K < 1:
        raise InvalidDimension(f"arm count must be >= 1, got {K}")
    return np.full(K, 1.0 / K)


def check_strategy(x, atol: float = SIMPLEX_ATOL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise InvalidStrategy("strategy must be a non-empty vector")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise InvalidStrategy(f"strategy has negative or non-finite entries: {x}")
    if abs(x.sum() - 1.0) > atol:
        raise InvalidStrategy(f"strategy sums to {x.sum()!r}, not 1")
    return x


def renormalize(x: np.ndarray) -> np.ndarray:
    x = np.maximum(x, 0.0)
    return x / x.sum()


def sample_arm(x, rng: np.random.Generator) -> int:
    """Draw one arm from ``x`` using exactly one uniform.

    Arm ``a`` owns the half-open slice ``(cum[a-1], cum[a]]`` of ``(0, 1]``,
    so a draw landing on a boundary goes to the lower index and zero-mass
    arms are never returned.
    """
    x = check_strategy(x)
    u = 1.0 - rng.random()  # (0, 1]
    cum = np.cumsum(x)
    a = int(np.searchsorted(cum, u, side="left"))
    if a >= x.size:
        # float drift left cum[-1] slightly below u
        a = int(np.flatnonzero(x > 0)[-1])
    return a
