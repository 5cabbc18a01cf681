"""Named instances used by the demos, the shipped configs and the acceptance runs."""

from __future__ import annotations

import math

from .env import EnvConfig


def switching_stochastic(T: int) -> EnvConfig:
    """K=5, m=2, no corruption. Arms 0 and 1 trade the lead every 16 rounds;
    the two unsafe arms are also the expensive ones, so no constraint binds at
    the optimum and regret is not masked by optimistic infeasible play."""
    return EnvConfig(
        T=T,
        K=5,
        m=2,
        loss_base=[0.5, 0.5, 0.6, 0.8, 0.8],
        constraint_base=[[-0.3, -0.2, -0.4, 0.3, 0.2], [-0.2, -0.3, -0.1, 0.2, 0.4]],
        loss_pattern="switching-best-arm",
        switch_arms=[0, 1],
        loss_period=16,
        switch_loss=0.2,
    )


def cheap_unsafe(T: int, C_target: float = 0.0, preset: str = "spread") -> EnvConfig:
    """K=5, m=1. Four cheap arms violate the constraint, one expensive arm is
    safe, so the optimum mixes. Corruption lowers arm 0's constraint mean
    (it looks safer than it is on average) and never touches the safe arm,
    which keeps the per-round Slater margin at 0.5."""
    corruption = None
    if C_target > 0:
        corruption = {"preset": preset, "target": float(C_target), "delta": [-1.0, 0.0, 0.0, 0.0, 0.0]}
    return EnvConfig(
        T=T,
        K=5,
        m=1,
        loss_base=[0.1, 0.1, 0.1, 0.1, 0.9],
        constraint_base=[[0.5, 0.5, 0.5, 0.5, -0.5]],
        corruption=corruption,
    )


def corruption_levels(T: int) -> list[int]:
    """0, floor(sqrt T), floor(T^0.75)."""
    return [0, math.isqrt(T), math.floor(T**0.75)]
