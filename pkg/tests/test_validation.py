import json

from conbandit.cli import main
from conbandit.validation import coverage_instance, rho_oracle
from conbandit.env import compute_corruption
from conbandit.offline import rho_lp
from conbandit.core import make_rng


def test_projection_mutation_is_caught(capsys):
    assert main(["validate", "--suite", "projection", "--proj-tol", "0.1"]) == 1
    report = json.loads(capsys.readouterr().out)
    assert not report["passed"] and report["failures"]


def test_radius_mutation_is_caught(capsys):
    assert main(["validate", "--suite", "coverage", "--radius-scale", "1"]) == 1
    report = json.loads(capsys.readouterr().out)
    assert not report["passed"]


def test_coverage_instances_are_corrupted():
    assert compute_corruption(coverage_instance("heavy")).C > 100
    assert 0 < compute_corruption(coverage_instance("light")).C <= 1.0 + 1e-9


def test_rho_oracle_agrees_with_lp():
    rng = make_rng(0)
    for _ in range(10):
        rows = rng.uniform(-1, 1, (4, 3))
        assert abs(rho_oracle(rows) - rho_lp(rows).rho) <= 1e-3
