"""Experiment configs, seeded run dispatch and CSV output."""

from __future__ import annotations

import csv
import json
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algorithms import ALGORITHMS, STATUS_CODES, AlgoParams, exploration_length
from .core import make_rng
from .diagnostics import alpha_membership, write_diagnostics_csv
from .env import EnvConfig, InfeasibleInstance, InvalidConfig, build_instance, compute_corruption
from .metrics import InvalidFit, fit_scaling_exponent
from .offline import solve_offline

SCHEMA = "conbandit.experiment/1"
SUMMARY_HEADER = ["algorithm", "T", "seed", "C_realized", "rho", "opt", "regret", "violation", "fallbacks", "wall_ms"]
FITS_HEADER = ["algorithm", "C_target", "metric", "slope", "intercept", "r2", "n_points"]
SEED_ENV = "CONBANDIT_SEED_OFFSET"

RUN_KEYS = {"schema", "env", "algorithm", "params", "horizons", "seeds", "output_dir", "instance_seed", "C_target", "diagnostics"}
SWEEP_KEYS = {"schema", "env", "params", "seeds", "output_dir", "grid", "instance_seed", "diagnostics"}
GRID_KEYS = {"T", "C_target", "beta", "algorithm"}
ENV_KEYS = {
    "K", "m", "loss_base", "constraint_base", "loss_pattern", "loss_amplitude", "loss_period",
    "switch_arms", "switch_loss", "loss_jitter", "corruption", "rho_min",
}
PARAM_KEYS = {"delta", "beta", "eta_override", "gamma_override", "known_c"}
BANDIT_CONSTRAINTS = {"expopt", "known_c"}


class ConfigError(InvalidConfig):
    """Invalid config, carrying the 1-based source line when known."""

    def __init__(self, msg: str, line: int | None = None, path: str | None = None):
        self.line, self.path = line, path
        where = f"{path or '<config>'}:{line}: " if line else f"{path or '<config>'}: "
        super().__init__(where + msg)


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def resolve_target(expr, T: int) -> float:
    """Corruption budget: a number, or "T^p" meaning floor(T**p)."""
    if isinstance(expr, (int, float)) and not isinstance(expr, bool):
        if expr < 0:
            raise InvalidConfig("C_target must be non-negative")
        return float(expr)
    m = re.fullmatch(r"\s*T\s*\^\s*([0-9]*\.?[0-9]+)\s*", str(expr))
    if not m:
        raise InvalidConfig(f"C_target must be a number or 'T^p', got {expr!r}")
    return float(math.floor(T ** float(m.group(1)) + 1e-9))


def target_label(expr) -> str:
    return str(expr).replace(" ", "") if not isinstance(expr, (int, float)) else repr(expr) if isinstance(expr, float) else str(expr)


@dataclass
class Cell:
    algorithm: str
    C_target: object  # raw expression, None keeps the env's own corruption
    beta: float | None


@dataclass
class ExperimentConfig:
    kind: str  # run | sweep
    env: dict
    params: dict
    horizons: list
    seeds: list
    cells: list
    output_dir: str
    instance_seed: int = 0
    diagnostics: bool = False
    source: str = ""
    path: str | None = None
    extra: dict = field(default_factory=dict)


def _seeds(value, text, path):
    if isinstance(value, bool):
        raise ConfigError("seeds must be a count or a list of integers", _line_of(text, "seeds"), path)
    if isinstance(value, int):
        if value < 1:
            raise ConfigError("seed count must be >= 1", _line_of(text, "seeds"), path)
        return list(range(1, value + 1))
    if isinstance(value, list) and value and all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in value):
        return list(value)
    raise ConfigError("seeds must be a positive count or a non-empty list of non-negative integers", _line_of(text, "seeds"), path)


def _check_keys(d, allowed, what, text, path):
    if not isinstance(d, dict):
        raise ConfigError(f"{what} must be an object", _line_of(text, what), path)
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in {what}", _line_of(text, unknown[0]), path)


def parse_config(text: str, kind: str, path: str | None = None) -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", exc.lineno, path) from None
    _check_keys(doc, RUN_KEYS if kind == "run" else SWEEP_KEYS, "config", text, path)
    if doc.get("schema") != SCHEMA:
        raise ConfigError(f"schema must be {SCHEMA!r}", _line_of(text, "schema"), path)
    for req in ("env", "seeds") + (("algorithm", "horizons") if kind == "run" else ("grid",)):
        if req not in doc:
            raise ConfigError(f"missing required key {req!r}", None, path)
    env = doc["env"]
    _check_keys(env, ENV_KEYS, "env", text, path)
    for req in ("K", "m", "loss_base", "constraint_base"):
        if req not in env:
            raise ConfigError(f"env is missing {req!r}", _line_of(text, "env"), path)
    params = doc.get("params", {})
    _check_keys(params, PARAM_KEYS, "params", text, path)
    seeds = _seeds(doc["seeds"], text, path)

    if kind == "run":
        algs = [doc["algorithm"]]
        horizons = doc["horizons"]
        Cs = [doc.get("C_target")]
        betas = [params.get("beta")]
    else:
        grid = doc["grid"]
        _check_keys(grid, GRID_KEYS, "grid", text, path)
        for k in ("T", "algorithm"):
            if k not in grid:
                raise ConfigError(f"grid is missing {k!r}", _line_of(text, "grid"), path)
        for k, v in grid.items():
            if not isinstance(v, list) or not v:
                raise ConfigError(f"grid axis {k!r} must be a non-empty list", _line_of(text, k), path)
        algs, horizons = grid["algorithm"], grid["T"]
        Cs = grid.get("C_target", [None])
        betas = grid.get("beta", [params.get("beta")])
    for a in algs:
        if a not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {a!r}; expected one of {sorted(ALGORITHMS)}", _line_of(text, "algorithm"), path)
    if not isinstance(horizons, list) or not horizons or not all(isinstance(T, int) and not isinstance(T, bool) and T >= 1 for T in horizons):
        raise ConfigError("horizons must be a non-empty list of positive integers", _line_of(text, "horizons" if kind == "run" else "T"), path)
    for C in Cs:
        if C is not None:
            try:
                resolve_target(C, 1)
            except InvalidConfig as exc:
                raise ConfigError(str(exc), _line_of(text, "C_target"), path) from None
            zero = isinstance(C, (int, float)) and C == 0
            if not zero and not (env.get("corruption") or {}).get("preset"):
                raise ConfigError("C_target needs env.corruption.preset", _line_of(text, "C_target"), path)
    for b in betas:
        if b is not None and not (isinstance(b, (int, float)) and 0 <= b <= 1):
            raise ConfigError("beta must lie in [0, 1]", _line_of(text, "beta"), path)
    cells = []
    for a in algs:
        for C in Cs:
            for b in betas if a == "expopt" else [None]:
                cells.append(Cell(a, C, b))
    # dedupe while keeping order
    seen, uniq = set(), []
    for c in cells:
        key = (c.algorithm, repr(c.C_target), c.beta)
        if key not in seen:
            seen.add(key)
            uniq.append(c)
    cfg = ExperimentConfig(kind, env, params, list(horizons), seeds, uniq, doc.get("output_dir", "out"),
                           int(doc.get("instance_seed", 0)), bool(doc.get("diagnostics", False)), text, path)
    _precheck(cfg)
    return cfg


def _precheck(cfg: ExperimentConfig) -> None:
    """Fail fast on parameter combinations that cannot run."""
    text, path = cfg.source, cfg.path
    K = cfg.env["K"]
    for c in cfg.cells:
        if c.algorithm == "expopt":
            beta = c.beta if c.beta is not None else AlgoParams().beta
            for T in cfg.horizons:
                if K * exploration_length(T, beta) > T:
                    raise ConfigError(
                        f"expopt needs K*ceil(T^beta) = {K * exploration_length(T, beta)} <= T = {T}",
                        _line_of(text, "beta") or _line_of(text, "horizons") or _line_of(text, "T"), path)
        if c.algorithm == "known_c" and "known_c" not in cfg.params:
            raise ConfigError("known_c algorithm needs params.known_c (a number or \"realized\")", _line_of(text, "params"), path)
    try:
        AlgoParams(**{k: v for k, v in cfg.params.items() if k != "known_c"})
    except (InvalidConfig, TypeError) as exc:
        raise ConfigError(str(exc), _line_of(text, "params"), path) from None


def load_config(path, kind: str) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    return parse_config(text, kind, str(path))


def seed_offset() -> int:
    raw = os.environ.get(SEED_ENV, "0").strip() or "0"
    if not raw.isdigit():
        raise InvalidConfig(f"{SEED_ENV} must be an unsigned integer, got {raw!r}")
    return int(raw)


def env_for(cfg: ExperimentConfig, T: int, C_target) -> EnvConfig:
    env = {k: v for k, v in cfg.env.items()}
    if C_target is not None and env.get("corruption"):
        corr = dict(env["corruption"])
        corr["target"] = resolve_target(C_target, T)
        env["corruption"] = corr
    elif env.get("corruption") and "target" in env["corruption"]:
        corr = dict(env["corruption"])
        corr["target"] = resolve_target(corr["target"], T)
        env["corruption"] = corr
    return EnvConfig(T=T, **env)


@dataclass
class Task:
    algorithm: str
    T: int
    seed: int
    beta: float | None
    params: dict
    inst: object
    offline: object
    C: float
    traces: bool
    diagnostics: bool
    timing: bool


def execute(task: Task) -> dict:
    """One seeded run; returns the summary row and optional extras."""
    params = dict(task.params)
    if task.beta is not None:
        params["beta"] = task.beta
    if params.get("known_c") == "realized":
        params["known_c"] = task.C
    params["record_rows"] = task.diagnostics
    ap = AlgoParams(**params)
    start = time.perf_counter()
    rec = ALGORITHMS[task.algorithm](task.inst, ap, make_rng(task.seed), opt=task.offline.opt_value)
    wall = (time.perf_counter() - start) * 1000.0
    off = task.offline
    rho = off.rho_arm_value if task.algorithm in BANDIT_CONSTRAINTS else off.rho
    out = {
        "row": {
            "algorithm": task.algorithm,
            "T": task.T,
            "seed": task.seed,
            "C_realized": task.C,
            "rho": rho,
            "opt": off.opt_value,
            "regret": rec.regret,
            "violation": rec.violation,
            "fallbacks": rec.fallbacks,
            "wall_ms": round(wall, 3) if task.timing else 0,
        }
    }
    if task.traces:
        out["trace"] = rec
    if task.diagnostics:
        mode = "bandit" if task.algorithm in BANDIT_CONSTRAINTS else "full"
        try:
            out["alpha"] = alpha_membership(rec.rows, off, task.C, mode, ap.beta)
        except ValueError:
            out["alpha"] = None  # no positive Slater margin, no comparator
    return out


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: list, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r[h]) for h in header])


def merge_summary(path: Path, rows: list[dict]) -> None:
    """Replace rows with the same (algorithm, T, seed), keep the rest, sort."""
    existing = {}
    if path.exists():
        with open(path, newline="", encoding="utf-8") as fh:
            for r in csv.DictReader(fh):
                existing[(r["algorithm"], int(r["T"]), int(r["seed"]))] = r
    for r in rows:
        existing[(r["algorithm"], int(r["T"]), int(r["seed"]))] = {h: _fmt(r[h]) for h in SUMMARY_HEADER}
    ordered = [existing[k] for k in sorted(existing)]
    write_csv(path, SUMMARY_HEADER, ordered)


def write_trace(path: Path, rec) -> None:
    K = rec.strategies.shape[1]
    m = rec.expected_violation.shape[1]
    names = {v: k for k, v in STATUS_CODES.items()}
    header = ["t", "arm", "loss"] + [f"x{a}" for a in range(K)] + [f"viol{i}" for i in range(m)] + ["status"] + [f"lambda{i}" for i in range(m)]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in range(rec.T):
            w.writerow(
                [t + 1, int(rec.arms[t]), _fmt(rec.losses[t])]
                + [_fmt(v) for v in rec.strategies[t]]
                + [_fmt(v) for v in rec.expected_violation[t]]
                + [names[int(rec.status[t])]]
                + [_fmt(v) for v in rec.multipliers[t]]
            )


def cell_dir(root: Path, cell: Cell) -> Path:
    c = "env" if cell.C_target is None else target_label(cell.C_target)
    b = "na" if cell.beta is None else repr(float(cell.beta))
    return root / "cells" / f"C={c}__beta={b}"


def cell_label(cell: Cell) -> str:
    return cell.algorithm if cell.beta is None else f"{cell.algorithm}@beta={cell.beta:g}"


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def run_experiment(cfg: ExperimentConfig, traces: bool = False, jobs: int | None = None, timing: bool = False, out_dir=None) -> dict:
    """Runs every (cell, T, seed); returns {cell index: [result dicts]} in a fixed order."""
    jobs = jobs or os.cpu_count() or 1
    offset = seed_offset()
    root = Path(out_dir or cfg.output_dir)
    results = {}
    instances = {}
    for ci, cell in enumerate(cfg.cells):
        tasks = []
        for T in cfg.horizons:
            key = (T, repr(cell.C_target))
            if key not in instances:
                inst = build_instance(env_for(cfg, T, cell.C_target), make_rng(cfg.instance_seed))
                instances[key] = (inst, solve_offline(inst), compute_corruption(inst).C)
            inst, off, C = instances[key]
            for s in cfg.seeds:
                tasks.append(Task(cell.algorithm, T, s + offset, cell.beta, cfg.params, inst, off, C, traces, cfg.diagnostics, timing))
        results[ci] = _map(execute, tasks, jobs)
    _emit(cfg, root, results)
    return results


def _emit(cfg: ExperimentConfig, root: Path, results: dict) -> None:
    for ci, cell in enumerate(cfg.cells):
        res = results[ci]
        where = root if cfg.kind == "run" else cell_dir(root, cell)
        merge_summary(where / "summary.csv", [r["row"] for r in res])
        for r in res:
            row = r["row"]
            if "trace" in r:
                write_trace(where / "traces" / f"{row['algorithm']}_T{row['T']}_seed{row['seed']}.csv", r["trace"])
        if cfg.diagnostics:
            by_T = {}
            for r in res:
                if r.get("alpha") is not None:
                    by_T.setdefault(r["row"]["T"], {})[r["row"]["seed"]] = r["alpha"]
            for T, diag in by_T.items():
                p = where / "diagnostics" / f"{cell.algorithm}_T{T}.csv"
                p.parent.mkdir(parents=True, exist_ok=True)
                write_diagnostics_csv(p, diag)
    if cfg.kind == "sweep":
        write_fits(root / "fits.csv", cfg, results)


def fit_rows(cfg: ExperimentConfig, results: dict) -> list[dict]:
    out = []
    for ci, cell in enumerate(cfg.cells):
        for metric in ("regret", "violation"):
            pts = {}
            for r in results[ci]:
                pts.setdefault(r["row"]["T"], []).append(float(r["row"][metric]))
            means = [(T, float(np.mean(v))) for T, v in sorted(pts.items())]
            try:
                fit = fit_scaling_exponent(means)
                vals = (fit.slope, fit.intercept, fit.r2, fit.n_points)
            except InvalidFit:
                vals = (math.nan, math.nan, math.nan, len(means))
            out.append({
                "algorithm": cell_label(cell),
                "C_target": "env" if cell.C_target is None else target_label(cell.C_target),
                "metric": metric,
                "slope": vals[0],
                "intercept": vals[1],
                "r2": vals[2],
                "n_points": vals[3],
            })
    return out


def write_fits(path: Path, cfg: ExperimentConfig, results: dict) -> None:
    write_csv(path, FITS_HEADER, fit_rows(cfg, results))


__all__ = [
    "SCHEMA", "SUMMARY_HEADER", "FITS_HEADER", "ConfigError", "ExperimentConfig", "InfeasibleInstance",
    "load_config", "parse_config", "run_experiment", "resolve_target", "seed_offset",
]
