import math

import numpy as np
import pytest

from conbandit.core import make_rng, spawn
from conbandit.diagnostics import (
    MissingGroundTruth,
    alpha_membership,
    alpha_schedule,
    build_alpha_benchmark,
    coverage_count,
    doubling_benchmark,
    doubling_partition,
    estimator_trajectory,
    write_diagnostics_csv,
)
from conbandit.env import ProblemInstance
from conbandit.offline import OfflineSolution

from helpers import constant_instance


def offline(rho=0.2):
    return OfflineSolution(10.0, np.array([1.0, 0.0, 0.0]), rho, np.array([0.0, 0.5, 0.5]), rho, 2)


def test_no_corruption_means_pure_optimum():
    U = build_alpha_benchmark(offline(), 0.0, "full", 50)
    assert np.all(U == [1.0, 0.0, 0.0])


def test_full_mode_midpoint():
    a = alpha_schedule(0.2, 10.0, "full", 100)
    assert a[99] == pytest.approx(0.5)
    U = build_alpha_benchmark(offline(), 10.0, "full", 100)
    assert np.allclose(U[99], [0.5, 0.25, 0.25])


def test_bandit_mode_constant():
    a = alpha_schedule(0.2, 10.0, "bandit", 10_000, beta=0.5)
    assert np.allclose(a, 0.5)
    U = build_alpha_benchmark(offline(), 10.0, "bandit", 10_000, beta=0.5)
    assert np.allclose(U[-1], [0.5, 0.0, 0.5])  # safe arm 2


def test_alpha_monotone_and_strategies_valid():
    a = alpha_schedule(0.3, 40.0, "full", 500)
    assert np.all(np.diff(a) >= 0) and np.all((0 <= a) & (a <= 1))
    U = build_alpha_benchmark(offline(0.3), 40.0, "full", 500)
    assert np.allclose(U.sum(axis=1), 1) and U.min() >= 0


def test_alpha_needs_positive_margin():
    with pytest.raises(ValueError):
        alpha_schedule(0.0, 1.0, "full", 10)
    with pytest.raises(ValueError):
        alpha_schedule(0.2, 1.0, "bandit", 10)


def test_membership_skips_unrecorded_rounds(tmp_path):
    rows = np.full((5, 1, 3), np.nan)
    rows[2:] = [[-1.0, 0.5, 0.5]]
    diag = alpha_membership(rows, offline(), 0.0, "full")
    assert list(diag.rounds) == [3, 4, 5] and diag.all_member
    rows[4, 0, 0] = 0.5
    diag = alpha_membership(rows, offline(), 0.0, "full")
    assert not diag.all_member and list(diag.member) == [True, True, False]
    p = tmp_path / "d.csv"
    write_diagnostics_csv(p, {3: diag})
    lines = p.read_bytes().split(b"\n")
    assert lines[0] == b"seed,t,alpha,member,worst_row_slack"
    assert b"\r" not in p.read_bytes() and len(lines) == 5
    with pytest.raises(MissingGroundTruth):
        alpha_membership(None, offline(), 0.0, "full")


def test_doubling_examples():
    assert [s for s, _ in doubling_partition(8)] == [1, 2, 4, 8]
    assert doubling_partition(1) == [(1, 1)]
    with pytest.raises(ValueError):
        doubling_partition(0)


@pytest.mark.parametrize("T", [1, 2, 3, 7, 8, 100, 1023, 1024, 5000])
def test_doubling_is_partition(T):
    ph = doubling_partition(T)
    assert len(ph) == math.floor(math.log2(T)) + 1
    covered = [r for s, e in ph for r in range(s, e + 1)]
    assert covered == list(range(1, T + 1))


def test_doubling_benchmark_freezes_phase_start():
    bench = doubling_benchmark(offline(), 10.0, 16)
    U = build_alpha_benchmark(offline(), 10.0, "full", 16)
    assert np.allclose(bench.comparators, U[[0, 1, 3, 7, 15]])


def test_zero_noise_coverage_is_one():
    T = 200
    inst = constant_instance(T, [0.5, 0.5], [[1.0, -1.0]])
    trajs = [estimator_trajectory(inst, mode, r) for mode in ("full", "bandit") for r in spawn(make_rng(0), 3)]
    assert coverage_count(trajs, inst) == 1.0


def test_bound_without_factor_four_collapses():
    T = 2000
    rng = make_rng(1)
    inst = ProblemInstance(T, 10, 10, np.full((T, 10), 0.5), np.broadcast_to(rng.uniform(-0.1, 0.1, (10, 1, 10)), (10, T, 10)).copy())
    trajs = [estimator_trajectory(inst, "full", r) for r in spawn(make_rng(2), 40)]
    assert coverage_count(trajs, inst) >= 0.9
    assert coverage_count(trajs, inst, radius_scale=1.0) < 0.9
    # halving the capped bound breaks it on the first +-1 samples
    assert coverage_count(trajs, inst, bound_scale=0.5) < 0.9


def test_bandit_trajectory_counts():
    inst = constant_instance(6, [0.5, 0.5], [[0.0, 0.0]])
    tr = estimator_trajectory(inst, "bandit", make_rng(0), arms=[0, 0, 1, 0, 1, 1])
    assert tr.counts[-1].tolist() == [3, 3]
    assert tr.counts[1].tolist() == [2, 0] and tr.means[1, 0, 1] == 0.0


def test_coverage_requires_ground_truth():
    with pytest.raises(MissingGroundTruth):
        coverage_count([], None)
