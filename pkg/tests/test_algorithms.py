import math

import numpy as np
import pytest

from conbandit.algorithms import (
    ALGORITHMS,
    STATUS_CODES,
    AlgoParams,
    default_eta,
    exploration_length,
    run_conomd_fs,
    run_conomd_fs_ix,
    run_expopt,
    run_known_c_baseline,
)
from conbandit.core import make_rng
from conbandit.diagnostics import alpha_membership, doubling_benchmark
from conbandit.env import InvalidConfig, build_instance, compute_corruption
from conbandit.metrics import positive_violation, switching_regret
from conbandit.offline import solve_offline
from conbandit.scenarios import cheap_unsafe, switching_stochastic

from helpers import constant_instance


@pytest.fixture(scope="module")
def small():
    return constant_instance(300, [0.2, 0.6, 0.4], [[0.3, -0.5, 0.1], [-0.2, -0.2, 0.4]])


def test_default_step_sizes():
    assert default_eta(5, 100, False) == pytest.approx(math.sqrt(math.log(500) / 100))
    assert default_eta(5, 100, True) == pytest.approx(math.sqrt(math.log(500) / 500))
    rec = run_conomd_fs_ix(constant_instance(100, [0.5] * 5, [[-0.5] * 5]), AlgoParams(), 0)
    assert rec.gamma == pytest.approx(rec.eta / 2)


@pytest.mark.parametrize("name", sorted(ALGORITHMS))
def test_single_round(name):
    # exploring learners need K <= T, so they get a single arm here
    inst = constant_instance(1, [0.3], [[-0.5]]) if name in ("expopt", "known_c") else constant_instance(1, [0.3, 0.8], [[0.5, -0.5]])
    rec = ALGORITHMS[name](inst, AlgoParams(beta=0.0, known_c=0.0), 1)
    assert rec.regret <= 1 and rec.violation <= 1


@pytest.mark.parametrize("name", sorted(ALGORITHMS))
def test_record_is_a_fold_over_rounds(name, small):
    rec = ALGORITHMS[name](small, AlgoParams(known_c=0.0), 4)
    T = small.T
    assert rec.strategies.shape == (T, 3) and rec.arms.shape == (T,) and rec.status.shape == (T,)
    assert np.allclose(rec.strategies.sum(axis=1), 1, atol=1e-9)
    assert rec.cumulative_loss == pytest.approx(rec.losses.sum())
    assert rec.violation == pytest.approx(positive_violation(small, rec.strategies))
    assert rec.fallbacks == int((rec.status == STATUS_CODES["fallback"]).sum())
    assert np.array_equal(rec.losses, rec.loss_vectors[np.arange(T), rec.arms])


@pytest.mark.parametrize("name", sorted(ALGORITHMS))
def test_bit_identical_reruns(name, small):
    a = ALGORITHMS[name](small, AlgoParams(known_c=1.0), 9)
    b = ALGORITHMS[name](small, AlgoParams(known_c=1.0), 9)
    for f in ("strategies", "arms", "losses", "expected_violation", "multipliers", "status"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert (a.regret, a.violation) == (b.regret, b.violation)


def test_common_random_numbers_across_algorithms(small):
    a = run_conomd_fs(small, AlgoParams(), 5)
    b = run_conomd_fs_ix(small, AlgoParams(), 5)
    assert np.array_equal(a.loss_vectors, b.loss_vectors)


def test_first_strategy_uniform_and_first_set_after_observation(small):
    rec = run_conomd_fs(small, AlgoParams(record_rows=True, record_estimates=True), 0)
    assert np.allclose(rec.strategies[0], 1 / 3)
    assert rec.est_counts[0].tolist() == [1, 1, 1]
    assert not np.isnan(rec.rows[0]).any()


def test_frozen_step_keeps_uniform_play():
    T = 4000
    inst = constant_instance(T, [0.2, 0.5, 0.9], [[-0.5, -0.5, -0.5]])
    rec = run_conomd_fs(inst, AlgoParams(eta_override=0.0), 2)
    assert np.allclose(rec.strategies, 1 / 3)
    expected = float((inst.loss_means * rec.strategies).sum())
    assert abs(rec.cumulative_loss - expected) <= math.sqrt(2 * T * math.log(2 / 0.01))


def test_huge_gamma_matches_zero_loss_trajectory(small):
    a = run_conomd_fs_ix(small, AlgoParams(gamma_override=1e300), 3)
    b = run_conomd_fs_ix(small, AlgoParams(eta_override=0.0), 3)
    assert np.array_equal(a.strategies, b.strategies)


def test_both_feedback_variants_find_dominant_arm():
    T = 4000
    inst = constant_instance(T, [0.1, 0.9], [[-0.5, -0.5]])
    for fn in (run_conomd_fs, run_conomd_fs_ix):
        rec = fn(inst, AlgoParams(), 1)
        assert rec.strategies[T // 2 - 1, 0] >= 0.8


def test_exploration_arithmetic():
    assert exploration_length(10, 0.5) == 4
    assert exploration_length(2**14, 0.5) == 128
    assert exploration_length(100, 0.0) == 1
    inst = constant_instance(10, [0.3, 0.6], [[-0.5, -0.5]])
    rec = run_expopt(inst, AlgoParams(beta=0.5, record_estimates=True), 0)
    assert rec.T0 == 8
    assert rec.arms[:8].tolist() == [0, 0, 0, 0, 1, 1, 1, 1]
    assert rec.est_counts[7].tolist() == [4, 4]
    rec0 = run_expopt(inst, AlgoParams(beta=0.0), 0)
    assert rec0.T0 == 2 and rec0.arms[:2].tolist() == [0, 1]


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.7])
def test_exploration_counts_exact(beta):
    T = 3000
    inst = constant_instance(T, [0.3, 0.6, 0.5], [[-0.5, 0.2, -0.1]])
    rec = run_expopt(inst, AlgoParams(beta=beta, record_estimates=True), 0)
    n0 = math.ceil(T**beta)
    assert rec.est_counts[rec.T0 - 1].tolist() == [n0] * 3
    assert np.isnan(rec.rows[: rec.T0]).all() if rec.rows is not None else True


def test_exploration_too_long():
    inst = constant_instance(10, [0.3, 0.6, 0.2], [[-0.5, -0.5, -0.5]])
    with pytest.raises(InvalidConfig):
        run_expopt(inst, AlgoParams(beta=1.0), 0)


def test_known_c_zero_equals_minimal_exploration(small):
    a = run_known_c_baseline(small, AlgoParams(known_c=0.0, record_rows=True), 6)
    b = run_expopt(small, AlgoParams(beta=0.0, record_rows=True), 6)
    assert np.array_equal(a.rows, b.rows, equal_nan=True)
    assert np.array_equal(a.strategies, b.strategies)


def test_vacuous_known_c_gives_whole_simplex(small):
    rec = run_known_c_baseline(small, AlgoParams(known_c=2.0 * small.T, record_rows=True), 6)
    played = rec.rows[small.K :]
    assert np.all(played <= -1.0 + 1e-12)
    assert np.all(rec.status[small.K :] == STATUS_CODES["interior"])


def test_known_c_requires_value(small):
    with pytest.raises(InvalidConfig):
        run_known_c_baseline(small, AlgoParams(), 0)


def test_param_validation():
    with pytest.raises(InvalidConfig):
        AlgoParams(delta=1.0)
    with pytest.raises(InvalidConfig):
        AlgoParams(beta=1.5)


@pytest.mark.parametrize("name,fn", [("full", run_conomd_fs), ("bandit", run_expopt)])
def test_rare_fallbacks_and_membership(name, fn):
    T, delta = 1024, 0.1
    inst = build_instance(cheap_unsafe(T, math.isqrt(T)), make_rng(0))
    off = solve_offline(inst)
    C = compute_corruption(inst).C
    with_fallback = members = 0
    seeds = 100
    for s in range(seeds):
        rec = fn(inst, AlgoParams(delta=delta, record_rows=True), s, opt=off.opt_value)
        with_fallback += rec.fallbacks > 0
        members += alpha_membership(rec.rows, off, C, name, 0.5).all_member
    assert with_fallback <= 2 * delta * seeds
    assert members >= (1 - 2 * delta) * seeds


def test_doubling_benchmark_regret_is_sublinear():
    per_round = []
    for T in (2**10, 2**12):
        inst = build_instance(switching_stochastic(T), make_rng(0))
        off = solve_offline(inst)
        vals = []
        for s in range(3):
            rec = run_conomd_fs(inst, AlgoParams(record_rows=True), s, opt=off.opt_value)
            bench = doubling_benchmark(off, 0.0, T)
            vals.append(switching_regret(rec.strategies, bench, rec.loss_vectors, rows=rec.rows))
        per_round.append(np.mean(vals) / T)
    assert per_round[1] < per_round[0]
