"""Offline ground truth: OPT, the Slater margin rho, and a brute-force oracle.

All LPs here are tiny (K + 1 columns, a few dozen rows), so a dense
two-phase tableau simplex with Bland's rule is enough and never cycles.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .env import InfeasibleInstance, ProblemInstance, arm_slack

PIVOT_TOL = 1e-12
COST_TOL = 1e-11
FEAS_TOL = 1e-7
GAP_TOL = 1e-8


class InfeasibleLP(ValueError):
    pass


class LPCertificateError(RuntimeError):
    pass


class OracleScopeError(ValueError):
    pass


@dataclass
class LinearProgram:
    """min c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0."""

    objective: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.size
        for A, b in (("A_ub", "b_ub"), ("A_eq", "b_eq")):
            mat = getattr(self, A)
            if mat is None:
                setattr(self, A, np.zeros((0, n)))
                setattr(self, b, np.zeros(0))
            else:
                mat = np.atleast_2d(np.asarray(mat, dtype=float))
                if mat.shape[1] != n:
                    raise ValueError(f"{A} has {mat.shape[1]} columns, objective has {n}")
                setattr(self, A, mat)
                setattr(self, b, np.asarray(getattr(self, b), dtype=float).reshape(mat.shape[0]))


def simplex_lp(objective, rows=None, rhs=None) -> LinearProgram:
    """LP over the probability simplex with optional halfspace rows."""
    c = np.asarray(objective, dtype=float)
    K = c.size
    if rows is not None:
        rows = np.asarray(rows, dtype=float).reshape(-1, K)
        rhs = np.zeros(rows.shape[0]) if rhs is None else np.asarray(rhs, dtype=float)
    return LinearProgram(c, rows, rhs, np.ones((1, K)), np.ones(1))


@dataclass
class LPSolution:
    value: float
    x: np.ndarray
    y_ub: np.ndarray  # duals of the <= rows (non-positive)
    y_eq: np.ndarray
    basis: tuple[int, ...]
    gap: float


def _pivot(tab: np.ndarray, r: int, j: int) -> None:
    tab[r] /= tab[r, j]
    col = tab[:, j].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])


def _run_simplex(tab: np.ndarray, basis: list[int], cost: np.ndarray, allowed: np.ndarray) -> None:
    """Minimize cost over the tableau rows in place; Bland's rule."""
    nrows = tab.shape[0]
    max_iter = 50 * (tab.shape[1] + nrows) + 1000
    for _ in range(max_iter):
        cb = cost[basis]
        reduced = cost - cb @ tab[:, :-1]
        candidates = np.flatnonzero((reduced < -COST_TOL) & allowed)
        if candidates.size == 0:
            return
        j = int(candidates[0])
        col = tab[:, j]
        ok = col > PIVOT_TOL
        if not ok.any():
            raise InfeasibleLP("LP is unbounded")
        ratios = np.full(nrows, np.inf)
        ratios[ok] = tab[ok, -1] / col[ok]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        r = int(min(ties, key=lambda k: basis[k]))
        _pivot(tab, r, j)
        basis[r] = j
    raise RuntimeError("simplex iteration limit reached")


def solve_lp(lp: LinearProgram) -> LPSolution:
    """Two-phase dense simplex; the answer carries a verified dual certificate."""
    c = lp.objective
    n = c.size
    p, q = lp.A_ub.shape[0], lp.A_eq.shape[0]
    # standard form: [A_ub I; A_eq 0] [x; s] = b
    A = np.zeros((p + q, n + p))
    A[:p, :n] = lp.A_ub
    A[:p, n:] = np.eye(p)
    A[p:, :n] = lp.A_eq
    b = np.concatenate([lp.b_ub, lp.b_eq])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign
    nv = n + p
    rows = p + q
    # slack can start basic where its row was not flipped; others get artificials
    art_rows = [r for r in range(rows) if not (r < p and sign[r] > 0)]
    na = len(art_rows)
    tab = np.zeros((rows, nv + na + 1))
    tab[:, :nv] = A
    tab[:, -1] = b
    basis = []
    k = 0
    for r in range(rows):
        if r < p and sign[r] > 0:
            basis.append(n + r)
        else:
            tab[r, nv + k] = 1.0
            basis.append(nv + k)
            k += 1
    if na:
        cost1 = np.zeros(nv + na)
        cost1[nv:] = 1.0
        _run_simplex(tab, basis, cost1, np.ones(nv + na, dtype=bool))
        infeas = float(tab[:, -1] @ cost1[basis])
        if infeas > FEAS_TOL:
            raise InfeasibleLP(f"LP infeasible (phase-one residual {infeas:.3g})")
        # drive zero-level artificials out; drop rows that turn out redundant
        keep = []
        for r in range(rows):
            if basis[r] >= nv:
                nz = np.flatnonzero(np.abs(tab[r, :nv]) > 1e-9)
                if nz.size:
                    j = int(nz[0])
                    _pivot(tab, r, j)
                    basis[r] = j
                    keep.append(r)
            else:
                keep.append(r)
        tab = tab[keep]
        basis = [basis[r] for r in keep]
        kept_rows = np.asarray(keep, dtype=int)
    else:
        kept_rows = np.arange(rows)
    tab = np.hstack([tab[:, :nv], tab[:, -1:]])
    cost2 = np.concatenate([c, np.zeros(p)])
    _run_simplex(tab, basis, cost2, np.ones(nv, dtype=bool))

    z = np.zeros(nv)
    z[basis] = tab[:, -1]
    z = np.maximum(z, 0.0)
    x = z[:n]
    # duals: B^T y = c_B on the kept standardized rows
    B = A[kept_rows][:, basis]
    y_std = np.zeros(rows)
    y_std[kept_rows] = np.linalg.solve(B.T, cost2[basis])
    y = y_std * sign
    y_ub, y_eq = y[:p], y[p:]
    value = float(c @ x)
    reduced = cost2 - (A.T @ y_std)
    scale = max(1.0, abs(value), float(np.abs(c).max(initial=0.0)))
    if reduced.min(initial=0.0) < -1e-9 * scale or (y_ub > 1e-9 * scale).any():
        raise LPCertificateError("returned basis is not dual feasible")
    if np.abs(reduced * z).max(initial=0.0) > 1e-8 * scale:
        raise LPCertificateError("complementary slackness violated")
    gap = abs(value - float(lp.b_ub @ y_ub + lp.b_eq @ y_eq))
    if gap > GAP_TOL * scale:
        raise LPCertificateError(f"duality gap {gap:.3g} exceeds tolerance")
    return LPSolution(value, x, y_ub, y_eq, tuple(int(v) for v in basis), gap)


@dataclass
class OfflineSolution:
    opt_value: float
    opt_strategy: np.ndarray
    rho: float  # mixed-strategy margin
    rho_strategy: np.ndarray
    rho_arm_value: float  # pure-arm margin
    rho_arm: int


def solve_opt(inst: ProblemInstance) -> tuple[float, np.ndarray]:
    """OPT and x* of the in-hindsight program over averaged means."""
    lbar = inst.loss_means.mean(axis=0)
    gbar = inst.constraint_means.mean(axis=1)
    try:
        sol = solve_lp(simplex_lp(lbar, gbar))
    except InfeasibleLP as exc:
        raise InfeasibleInstance("aggregated constraints admit no feasible strategy") from exc
    x = sol.x / sol.x.sum()
    opt = float(inst.loss_means.sum(axis=0) @ x)
    slack = inst.constraint_means.sum(axis=1) @ x
    if slack.max() > FEAS_TOL * max(1.0, inst.T):
        raise LPCertificateError(f"x* violates the aggregated constraints by {slack.max():.3g}")
    return opt, x


class RhoResult(NamedTuple):
    rho: float
    witness: np.ndarray | int


def unique_rows(inst: ProblemInstance) -> np.ndarray:
    return np.unique(inst.constraint_means.reshape(-1, inst.K), axis=0)


def rho_lp(rows: np.ndarray) -> RhoResult:
    """max r s.t. rows x <= -r on the simplex, with r shifted to r' = r + 1 >= 0."""
    rows = np.atleast_2d(rows)
    R, K = rows.shape
    c = np.zeros(K + 1)
    c[-1] = -1.0
    A_ub = np.hstack([rows, np.ones((R, 1))])
    A_eq = np.zeros((1, K + 1))
    A_eq[0, :K] = 1.0
    sol = solve_lp(LinearProgram(c, A_ub, np.ones(R), A_eq, np.ones(1)))
    x = sol.x[:K] / sol.x[:K].sum()
    return RhoResult(float(sol.x[K] - 1.0), x)


def compute_rho(inst: ProblemInstance, mode: str = "mixed") -> RhoResult:
    if mode == "arm":
        return RhoResult(*arm_slack(inst.constraint_means))
    if mode != "mixed":
        raise ValueError(f"mode must be 'mixed' or 'arm', got {mode!r}")
    return rho_lp(unique_rows(inst))


def solve_offline(inst: ProblemInstance) -> OfflineSolution:
    opt, x = solve_opt(inst)
    rho, xd = compute_rho(inst, "mixed")
    rho_a, a = compute_rho(inst, "arm")
    return OfflineSolution(opt, x, rho, xd, rho_a, a)


# ---------------------------------------------------------------------------
# brute-force oracle


class GridResult(NamedTuple):
    value: float
    point: np.ndarray | None

    @property
    def feasible(self) -> bool:
        return self.point is not None


@functools.lru_cache(maxsize=16)
def _compositions(N: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to N."""
    if parts == 1:
        return np.array([[N]], dtype=np.int64)
    # stars and bars: choose the parts - 1 bar positions among N + parts - 1 slots
    bars = np.array(list(itertools.combinations(range(N + parts - 1), parts - 1)), dtype=np.int64)
    edges = np.hstack([np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), N + parts - 1)])
    out = np.diff(edges, axis=1) - 1
    out.setflags(write=False)
    return out


def _box_offsets(dims: int, half: int) -> np.ndarray:
    axes = [np.arange(-half, half + 1)] * dims
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dims)


def _face_points(H: np.ndarray, c: np.ndarray, K: int, fixed_fn) -> np.ndarray:
    """Points of the simplex satisfying H x = c exactly.

    The s + 1 coordinates with the best-conditioned system are solved for;
    the remaining ones range over the values produced by ``fixed_fn``.
    """
    s = H.shape[0]
    best = None
    for free in itertools.combinations(range(K), s + 1):
        M = np.vstack([np.ones(s + 1), H[:, list(free)]])
        d = abs(np.linalg.det(M))
        if best is None or d > best[0]:
            best = (d, free, M)
    if best is None or best[0] < 1e-12:
        return np.zeros((0, K))
    _, free, M = best
    fixed = [k for k in range(K) if k not in free]
    zvals = fixed_fn(fixed)  # (N, len(fixed))
    if zvals.shape[0] == 0:
        return np.zeros((0, K))
    rhs = np.vstack([1.0 - zvals.sum(axis=1), c[:, None] - H[:, fixed] @ zvals.T])
    y = np.linalg.solve(M, rhs).T
    pts = np.zeros((zvals.shape[0], K))
    pts[:, list(free)] = y
    pts[:, fixed] = zvals
    return pts[(pts >= -1e-12).all(axis=1)]


def grid_oracle(
    objective,
    rows=None,
    step: float = 1e-2,
    K: int | None = None,
    rhs=None,
    faces=None,
    refine: int = 0,
    feas_tol: float = 1e-9,
) -> GridResult:
    """Exhaustive minimization over a simplex lattice.

    ``objective`` is either a K-vector (linear) or a vectorized callable on
    (N, K) arrays. Besides the lattice, candidates are enumerated on every
    intersection of up to K - 1 hyperplanes from ``faces`` (default: the
    constraint rows) and the simplex facets, with the remaining coordinates on
    the lattice; this is where constrained minimizers live. ``refine`` repeats the search on a
    10x finer grid in a window around the incumbent.
    """
    if callable(objective):
        f: Callable[[np.ndarray], np.ndarray] = objective
        if K is None:
            K = np.asarray(rows).shape[1]
    else:
        cvec = np.asarray(objective, dtype=float)
        K = cvec.size
        f = lambda P: P @ cvec  # noqa: E731
    if K > 4:
        raise OracleScopeError(f"grid oracle supports K <= 4, got {K}")
    rows = np.zeros((0, K)) if rows is None else np.asarray(rows, dtype=float).reshape(-1, K)
    rhs = np.zeros(rows.shape[0]) if rhs is None else np.asarray(rhs, dtype=float)
    if faces is None:
        FH, Fc = rows, rhs
    else:
        FH = np.asarray(faces[0], dtype=float).reshape(-1, K)
        Fc = np.asarray(faces[1], dtype=float).reshape(-1)
    # simplex facets x_k = 0 complete the vertex set
    FH = np.vstack([FH, np.eye(K)])
    Fc = np.concatenate([Fc, np.zeros(K)])
    N = int(round(1.0 / step))
    if math.comb(N + K - 1, K - 1) > 30_000_000:
        raise OracleScopeError("lattice too large for this K and step")
    h = 1.0 / N

    def evaluate(P, best):
        if P.shape[0] == 0:
            return best
        P = np.clip(P, 0.0, None)
        P = P / P.sum(axis=1, keepdims=True)
        if rows.shape[0]:
            P = P[(P @ rows.T <= rhs + feas_tol).all(axis=1)]
        if P.shape[0] == 0:
            return best
        vals = f(P)
        k = int(np.argmin(vals))
        if best is None or vals[k] < best[0]:
            return (float(vals[k]), P[k].copy())
        return best

    def global_fixed(fixed):
        return _compositions(N, len(fixed) + 1)[:, :-1] * h

    def face_candidates(fixed_fn, best):
        nf = FH.shape[0]
        for s in range(1, min(K - 1, nf) + 1):
            for S in itertools.combinations(range(nf), s):
                best = evaluate(_face_points(FH[list(S)], Fc[list(S)], K, fixed_fn), best)
        return best

    best = evaluate(_compositions(N, K) * h, None)
    best = face_candidates(global_fixed, best)
    if best is None:
        return GridResult(math.inf, None)

    # window of +-20 (K<=3) or +-4 (K=4) incumbent-grid steps at 10x resolution
    half = {2: 200, 3: 200, 4: 40}.get(K, 40)
    width = h
    for _ in range(refine):
        center = best[1]
        fine = width / 10
        off = _box_offsets(K - 1, half) * fine
        P = np.empty((off.shape[0], K))
        P[:, :-1] = center[:-1] + off
        P[:, -1] = 1.0 - P[:, :-1].sum(axis=1)
        best = evaluate(P[(P >= -1e-15).all(axis=1)], best)

        def local_fixed(fixed, center=center, fine=fine):
            if not fixed:
                return np.zeros((1, 0))
            z = center[fixed] + _box_offsets(len(fixed), half) * fine
            return z[(z >= 0).all(axis=1) & (z.sum(axis=1) <= 1.0)]

        best = face_candidates(local_fixed, best)
        width = fine
    return GridResult(best[0], best[1])
