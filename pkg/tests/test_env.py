import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conbandit.core import make_rng
from conbandit.env import (
    CorruptionSchedule,
    EnvConfig,
    InfeasibleInstance,
    InvalidConfig,
    ProblemInstance,
    RoundFeedback,
    build_instance,
    compute_corruption,
    sample_all,
    sample_round,
)


def test_constant_pattern():
    inst = build_instance(EnvConfig(T=10, K=2, m=1, loss_base=[0.3, 0.7], constraint_base=[[-1, -1]]), make_rng(0))
    assert np.all(inst.loss_means == [0.3, 0.7])
    assert np.all(inst.constraint_means == -1)


@pytest.mark.parametrize("field,val", [("T", 0), ("K", 0), ("m", 0)])
def test_empty_dimensions_rejected(field, val):
    cfg = dict(T=5, K=2, m=1, loss_base=[0.1, 0.2], constraint_base=[[-1, -1]])
    cfg[field] = val
    with pytest.raises(InvalidConfig):
        build_instance(EnvConfig(**cfg), make_rng(0))


def test_slater_enforced():
    cfg = EnvConfig(T=5, K=2, m=1, loss_base=[0.1, 0.2], constraint_base=[[0.2, -0.01]])
    with pytest.raises(InfeasibleInstance):
        build_instance(cfg, make_rng(0))


def test_zero_perturbations_are_stationary():
    base = np.array([[0.1, -0.4]])
    sched = CorruptionSchedule(base, [])
    cm = sched.materialize(12)
    assert np.all(cm == base[:, None, :])
    inst = ProblemInstance(12, 2, 1, np.zeros((12, 2)), cm)
    assert compute_corruption(inst).C == 0.0


def test_two_round_perturbation_costs_one():
    sched = CorruptionSchedule(np.zeros((1, 2)), [(1, 0, np.array([0.5, 0])), (2, 0, np.array([0.5, 0]))])
    for T in (5, 8, 13):
        inst = ProblemInstance(T, 2, 1, np.zeros((T, 2)), sched.materialize(T))
        assert compute_corruption(inst).C == pytest.approx(1.0)


@pytest.mark.parametrize("seq,anchor,C", [((0.0, 0.5, 1.0), 0.5, 1.0), ((0.2, 0.2, 0.8), 0.2, 0.6)])
def test_median_anchor(seq, anchor, C):
    inst = ProblemInstance(3, 1, 1, np.zeros((3, 1)), np.array(seq).reshape(1, 3, 1))
    corr = compute_corruption(inst)
    assert corr.anchors[0, 0] == pytest.approx(anchor)
    assert corr.C == pytest.approx(C)


def test_anchor_is_minimal_against_random_vectors():
    rng = make_rng(4)
    g = rng.uniform(-1, 1, (2, 15, 3))
    inst = ProblemInstance(15, 3, 2, np.zeros((15, 3)), g)
    corr = compute_corruption(inst)
    for _ in range(100):
        h = rng.uniform(-1, 1, 3)
        assert np.all(np.abs(g - h).sum(axis=(1, 2)) >= corr.per_constraint - 1e-12)


@pytest.mark.parametrize("preset", ["burst", "spread", "front-loaded"])
def test_presets_spend_the_target(preset):
    sched = CorruptionSchedule.from_preset(np.zeros((1, 3)), 100, preset, target=7.3, delta=[0.6, -0.4, 0.0])
    inst = ProblemInstance(100, 3, 1, np.zeros((100, 3)), sched.materialize(100))
    assert compute_corruption(inst).C == pytest.approx(7.3)


def test_clipped_schedule_reports_realized_budget():
    sched = CorruptionSchedule.from_preset(np.full((1, 2), 0.8), 50, "spread", target=10.0, delta=[1.0, 0.0])
    cm = sched.materialize(50)
    assert cm.max() <= 1.0
    inst = ProblemInstance(50, 2, 1, np.zeros((50, 2)), cm)
    assert compute_corruption(inst).C == pytest.approx(2.0)  # 10 rounds, each clipped to 0.2


def test_anchor_vs_average_bound():
    rng = make_rng(9)
    for _ in range(50):
        T = int(rng.integers(1, 30))
        inst = ProblemInstance(T, 2, 2, np.zeros((T, 2)), rng.uniform(-1, 1, (2, T, 2)))
        corr = compute_corruption(inst)
        gap = np.abs(corr.anchors - inst.constraint_means.mean(axis=1)).sum(axis=1).max()
        assert gap <= corr.C / T + 1e-12


def test_boundary_means_sample_deterministically():
    inst = ProblemInstance(1, 2, 1, np.array([[0.0, 1.0]]), np.array([[[1.0, -1.0]]]))
    for seed in range(10):
        loss, viol = sample_round(inst, 1, make_rng(seed))
        assert list(loss) == [0.0, 1.0]
        assert list(viol[0]) == [1.0, -1.0]


def test_sampled_violation_mean():
    T = 100_000
    inst = ProblemInstance(T, 1, 1, np.full((T, 1), 0.5), np.full((1, T, 1), 0.2))
    _, G = sample_all(inst, make_rng(1))
    assert set(np.unique(G)) <= {-1.0, 1.0}
    assert 0.18 <= G.mean() <= 0.22


def test_same_seed_same_instance():
    cfg = EnvConfig(T=40, K=3, m=1, loss_base=[0.2, 0.5, 0.4], constraint_base=[[0.1, -0.3, 0.0]],
                    loss_pattern="sinusoidal-drift", loss_jitter=0.05)
    a = build_instance(cfg, make_rng(2))
    b = build_instance(cfg, make_rng(2))
    assert np.array_equal(a.loss_means, b.loss_means)


def test_switching_pattern_rotates_best_arm():
    cfg = EnvConfig(T=8, K=3, m=1, loss_base=[0.5, 0.5, 0.9], constraint_base=[[-0.5] * 3],
                    loss_pattern="switching-best-arm", switch_arms=[0, 1], loss_period=2, switch_loss=0.1)
    L = build_instance(cfg, make_rng(0)).loss_means
    assert list(L.argmin(axis=1)) == [0, 0, 1, 1, 0, 0, 1, 1]


def test_bandit_feedback_hides_other_arms():
    L = np.array([0.0, 1.0, 1.0])
    G = np.array([[1.0, -1.0, 1.0], [-1.0, -1.0, 1.0]])
    fb = RoundFeedback.observe(L, G, 1, False, False)
    assert fb.loss == 1.0 and list(fb.violations) == [-1.0, -1.0]
    full = RoundFeedback.observe(L, G, 1, True, True)
    assert full.violations.shape == (2, 3)


@given(st.integers(1, 6), st.integers(1, 3), st.integers(1, 3), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_json_round_trip_is_bit_exact(T, K, m, seed):
    rng = make_rng(seed)
    inst = ProblemInstance(T, K, m, rng.uniform(0, 1, (T, K)), rng.uniform(-1, 1, (m, T, K)))
    back = ProblemInstance.from_json(inst.to_json())
    assert np.array_equal(back.loss_means, inst.loss_means)
    assert np.array_equal(back.constraint_means, inst.constraint_means)


@pytest.mark.parametrize("T,target", [(16384, 1448.0), (256, 16.0), (1000, 499.0), (7, 3.0)])
def test_spread_never_runs_out_of_rounds(T, target):
    sched = CorruptionSchedule.from_preset(np.zeros((1, 2)), T, "spread", target=target, delta=[-1.0, 0.0])
    rounds = [r for r, _, _ in sched.perturbations]
    assert len(set(rounds)) == len(rounds) and max(rounds) <= T
    inst = ProblemInstance(T, 2, 1, np.zeros((T, 2)), sched.materialize(T))
    assert compute_corruption(inst).C == pytest.approx(target)
