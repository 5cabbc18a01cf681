"""Entropic mirror descent on the simplex cut by optimistic constraint rows.

The KL projection onto {x in simplex : rows x <= 0} is solved in the dual.
For multipliers lam >= 0 the primal point is the Gibbs vector
x(lam) ~ raw * exp(-rows^T lam), and the dual objective

    phi(lam) = -log sum_a raw(a) exp(-(rows^T lam)(a))

is concave with gradient rows @ x(lam) and Hessian -Cov_{x(lam)}(rows).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimators import ConstraintEstimator
from .offline import LinearProgram, solve_lp

PROJ_TOL = 1e-7
MAX_ITER = 10_000
NONEMPTY_TOL = 1e-7
LAMBDA_BLOWUP = 1e9


class InvalidRaw(ValueError):
    pass


@dataclass(frozen=True)
class DecisionSet:
    rows: np.ndarray  # (m, K): estimated mean minus radius

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    def slack(self, x) -> np.ndarray:
        return self.rows @ x

    def contains(self, x, tol: float = 1e-6) -> bool:
        return bool(np.all(self.rows @ x <= tol))


@dataclass
class ProjectionResult:
    point: np.ndarray
    multipliers: np.ndarray
    status: str  # interior | boundary | fallback
    iterations: int
    dual_history: list = field(default_factory=list)


def build_decision_set(est: ConstraintEstimator, radii: np.ndarray | None = None) -> DecisionSet:
    """rows[i, a] = ghat_i(a) - radius(a); pass ``radii`` to override the default radius."""
    r = est.radii() if radii is None else np.asarray(radii, dtype=float)
    return DecisionSet(est.means - r[None, :])


def unconstrained_md_point(x, loss_vec, eta: float) -> np.ndarray:
    return np.asarray(x) * np.exp(-eta * np.asarray(loss_vec))


def fixed_share_mix(x_tilde, T: int, K: int) -> np.ndarray:
    """(1 - 1/T) x_tilde + 1/(TK) per entry, written so the floor is exact."""
    return 1.0 / (T * K) + (1.0 - 1.0 / T) * np.asarray(x_tilde)


@dataclass(frozen=True)
class Feasibility:
    nonempty: bool
    witness: np.ndarray
    value: float  # min over the simplex of the worst row value


def feasibility_check(ds: DecisionSet) -> Feasibility:
    """Phase-one LP: min s subject to rows x <= s on the simplex.

    Row entries are at least -3, so s = s' - 3 with s' >= 0 keeps every
    variable non-negative.
    """
    R = np.atleast_2d(ds.rows)
    m, K = R.shape
    c = np.zeros(K + 1)
    c[-1] = 1.0
    A_ub = np.hstack([R, -np.ones((m, 1))])
    b_ub = np.full(m, -3.0)
    A_eq = np.zeros((1, K + 1))
    A_eq[0, :K] = 1.0
    sol = solve_lp(LinearProgram(c, A_ub, b_ub, A_eq, np.ones(1)))
    x = np.maximum(sol.x[:K], 0.0)
    x /= x.sum()
    s = float(np.max(R @ x))
    return Feasibility(s <= NONEMPTY_TOL, x, s)


def _gibbs(logits: np.ndarray) -> tuple[np.ndarray, float]:
    """Normalized exp(logits) and -logsumexp(logits)."""
    top = logits.max()
    w = np.exp(logits - top)
    z = w.sum()
    return w / z, -(top + np.log(z))


def kl_project(
    raw,
    ds: DecisionSet,
    tol: float = PROJ_TOL,
    max_iter: int = MAX_ITER,
    warm=None,
    record: bool = False,
) -> ProjectionResult:
    """argmin over the decision set of D(x || raw), via projected Newton ascent on the dual.

    Steps are backtracked (halving from a unit step) until phi rises by an
    Armijo margin, so phi is monotone along accepted steps. ``warm`` seeds
    the multipliers. If the multipliers diverge or ``max_iter`` runs out,
    the set is checked with the phase-one LP and its witness is returned
    with status ``fallback``.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1 or np.any(~(raw > 0)) or not np.all(np.isfinite(raw)):
        raise InvalidRaw("raw point must be finite and strictly positive")
    R = np.atleast_2d(ds.rows)
    m = R.shape[0]
    base = np.log(raw) - np.log(raw.sum())
    hist: list = []

    x0 = np.exp(base)
    r0 = R @ x0
    if r0.max() <= tol:
        return ProjectionResult(x0 / x0.sum(), np.zeros(m), "interior", 0, hist)

    lam = np.zeros(m) if warm is None else np.maximum(np.asarray(warm, dtype=float), 0.0)
    x, phi = _gibbs(base - R.T @ lam)
    for it in range(1, max_iter + 1):
        g = R @ x
        if g.max() <= tol and float(lam @ np.abs(g)) <= tol:
            status = "boundary" if lam.any() else "interior"
            return ProjectionResult(x, lam, status, it - 1, hist)
        if record:
            hist.append(phi)
        # coordinates pinned at zero whose gradient pushes outward stay fixed
        free = (lam > 0) | (g > 0)
        d = np.zeros(m)
        Rf = R[free]
        mean = Rf @ x
        H = (Rf * x) @ Rf.T - np.outer(mean, mean)
        H[np.diag_indices_from(H)] += 1e-12 + 1e-10 * np.trace(H)
        try:
            d[free] = np.linalg.solve(H, g[free])
        except np.linalg.LinAlgError:
            d[free] = g[free]
        if g @ d <= 0:
            d = np.where(free, g, 0.0)
        step = 1.0
        while True:
            cand = np.maximum(lam + step * d, 0.0)
            xc, phic = _gibbs(base - R.T @ cand)
            if phic >= phi + 1e-4 * (g @ (cand - lam)) or step < 1e-12:
                break
            step *= 0.5
        if phic < phi:
            # no ascent possible at float resolution
            break
        lam, x, phi = cand, xc, phic
        if lam.max() > LAMBDA_BLOWUP:
            break
    if record:
        hist.append(phi)
    g = R @ x
    if g.max() <= tol and float(lam @ np.abs(g)) <= tol:
        return ProjectionResult(x, lam, "boundary" if lam.any() else "interior", it, hist)
    feas = feasibility_check(ds)
    if feas.nonempty and g.max() <= 10 * tol and float(lam @ np.abs(g)) <= 100 * tol:
        # a stalled but feasible-to-tolerance iterate beats the LP vertex
        return ProjectionResult(x, lam, "boundary", it, hist)
    return ProjectionResult(feas.witness, lam, "fallback", it, hist)
