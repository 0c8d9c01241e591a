"""Sample-relative certification of approximate LU solutions.

A point ``x*`` is refuted for a solution kind when some feasible sample
point ``x`` satisfies the kind's violation inequality, e.g.
``f(x) <_LU f(x*) - E`` for E-LU solutions. Passing is always relative to the
sample set and is reported as such.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import InfeasiblePoint
from .interval import Interval, lt_strict_lu, scale, sub
from .problem import (
    FEAS_TOL,
    ZERO_EPS,
    Epsilon,
    Problem,
    SampleSet,
    feasible,
    feasible_mask,
    interval_value,
    objective_values,
)

TOL_VIOLATE = 1e-10
TOL_EQUALITY = 1e-9


class SolutionKind(enum.Enum):
    LU = "lu"
    WEAK_LU = "wlu"
    ELU = "elu"
    WEAK_ELU = "welu"
    EQUASI_LU = "eq"
    WEAK_EQUASI_LU = "weq"

    @property
    def weak(self) -> bool:
        return self in (SolutionKind.WEAK_LU, SolutionKind.WEAK_ELU, SolutionKind.WEAK_EQUASI_LU)

    @property
    def quasi(self) -> bool:
        return self in (SolutionKind.EQUASI_LU, SolutionKind.WEAK_EQUASI_LU)

    @property
    def uses_eps(self) -> bool:
        return self not in (SolutionKind.LU, SolutionKind.WEAK_LU)

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    SolutionKind.LU: "LU",
    SolutionKind.WEAK_LU: "weakly LU",
    SolutionKind.ELU: "E-LU",
    SolutionKind.WEAK_ELU: "weakly E-LU",
    SolutionKind.EQUASI_LU: "E-quasi-LU",
    SolutionKind.WEAK_EQUASI_LU: "weakly E-quasi-LU",
}


class Verdict(enum.Enum):
    PASS_ON_SAMPLE = "pass-on-sample"
    REFUTED = "refuted"


def distances(X: np.ndarray, x_star: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((X - x_star) ** 2, axis=1))


def _effective_eps(kind: SolutionKind, eps: Epsilon | None) -> Epsilon:
    return eps if (kind.uses_eps and eps is not None) else ZERO_EPS


def violates(kind: SolutionKind, p: Problem, x_star, x, eps: Epsilon | None = None, tol: float = TOL_VIOLATE) -> bool:
    """Whether ``x`` violates the ``kind`` inequality at ``x*``.

    Built from interval operations: the target is ``f(x*) - E`` (scaled by
    ``||x - x*||`` for quasi kinds). Non-strict comparisons are exact and the
    strict ones need a margin larger than ``tol``.
    """
    eps = _effective_eps(kind, eps)
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    fx_star = interval_value(p, x_star)
    fx = interval_value(p, x)
    shift = eps.interval
    if kind.quasi:
        shift = scale(float(distances(x[None, :], x_star)[0]), shift)
    target = sub(fx_star, shift)
    if kind.weak:
        return lt_strict_lu(fx, Interval(target.lo - tol, target.hi - tol))
    if not (fx.lo <= target.lo and fx.hi <= target.hi):
        return False
    return fx.lo < target.lo - tol or fx.hi < target.hi - tol


def violation_mask(
    kind: SolutionKind, p: Problem, x_star, X, eps: Epsilon | None = None, tol: float = TOL_VIOLATE
) -> np.ndarray:
    """Vectorized :func:`violates` over the rows of ``X`` (feasibility not checked)."""
    eps = _effective_eps(kind, eps)
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    X = np.asarray(X, dtype=float).reshape(-1, p.n)
    fs = interval_value(p, x_star)
    FL, FU = objective_values(p, X)
    s = distances(X, x_star) if kind.quasi else 1.0
    TL = fs.lo - s * eps.hi
    TU = fs.hi - s * eps.lo
    strict = (FL < TL - tol) & (FU < TU - tol)
    if kind.weak:
        return strict
    return (FL <= TL) & (FU <= TU) & ((FL < TL - tol) | (FU < TU - tol))


@dataclass(frozen=True)
class Certificate:
    verdict: Verdict
    kind: SolutionKind
    x_star: np.ndarray
    eps: Epsilon
    sample_descriptor: str
    tol: float
    refuter: np.ndarray | None = None
    refuter_index: int | None = None
    checked: int = 0
    route: str = "interval"

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS_ON_SAMPLE

    def report(self) -> str:
        lines = [
            f"kind: {self.kind.label}",
            f"route: {self.route}",
            f"x*: {_fmt_vec(self.x_star)}",
            f"E: {self.eps}",
            f"sampled region: {self.sample_descriptor}",
            f"feasible sample points checked: {self.checked}",
            f"violation margin: {self.tol:.12g}",
        ]
        if self.passed:
            lines.append("verdict: pass on sample (relative to the sampled region only)")
        else:
            lines.append(f"verdict: refuted by sample point #{self.refuter_index}: {_fmt_vec(self.refuter)}")
        return "\n".join(lines)


def _fmt_vec(v) -> str:
    return "(" + ", ".join(f"{float(a):.12g}" for a in np.atleast_1d(v)) + ")"


def _require_feasible(p: Problem, x_star) -> np.ndarray:
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    if not feasible(p, x_star, FEAS_TOL):
        raise InfeasiblePoint(f"x* = {_fmt_vec(x_star)} is infeasible")
    return x_star


def _certificate(kind, x_star, eps, S, tol, hits, feas, route) -> Certificate:
    eps = _effective_eps(kind, eps)
    checked = int(np.count_nonzero(feas))
    if hits.size:
        i = int(hits[0])
        return Certificate(Verdict.REFUTED, kind, x_star, eps, S.descriptor, tol, S.points[i].copy(), i, checked, route)
    return Certificate(Verdict.PASS_ON_SAMPLE, kind, x_star, eps, S.descriptor, tol, None, None, checked, route)


def certify_on_set(
    kind: SolutionKind, p: Problem, x_star, eps: Epsilon | None, S: SampleSet, tol: float = TOL_VIOLATE
) -> Certificate:
    """Scan the feasible part of ``S`` in order; the first violator refutes ``x*``."""
    x_star = _require_feasible(p, x_star)
    feas = feasible_mask(p, S.points)
    hits = np.flatnonzero(feas & violation_mask(kind, p, x_star, S.points, eps, tol))
    return _certificate(kind, x_star, eps, S, tol, hits, feas, "interval")


def certify_via_biobjective(
    kind: SolutionKind, p: Problem, x_star, eps: Epsilon | None, S: SampleSet, tol: float = TOL_VIOLATE
) -> Certificate:
    """Same question through the biobjective map ``F = (fL, fU)``.

    ``x`` refutes when ``F(x*) - eps_vec * s - F(x)`` lies in the nonnegative
    orthant minus the origin (non-weak kinds) or in its interior (weak kinds),
    with ``eps_vec = (eps_hi, eps_lo)`` and ``s`` the distance for quasi kinds.
    """
    x_star = _require_feasible(p, x_star)
    e = _effective_eps(kind, eps)
    X = S.points
    FX = np.column_stack(objective_values(p, X))
    Fs = np.array([v[0] for v in objective_values(p, x_star[None, :])])
    s = distances(X, x_star)[:, None] if kind.quasi else np.ones((X.shape[0], 1))
    D = (Fs[None, :] - s * e.vec[None, :]) - FX
    if kind.weak:
        in_cone = np.all(D > tol, axis=1)
    else:
        in_cone = np.all(D >= 0.0, axis=1) & np.any(D > tol, axis=1)
    feas = feasible_mask(p, X)
    hits = np.flatnonzero(feas & in_cone)
    return _certificate(kind, x_star, eps, S, tol, hits, feas, "biobjective")


class XSetStatus(enum.Enum):
    EMPTY_INTERSECTION = "empty-intersection"
    EQUALITY_HOLDS = "equality-holds"
    EQUALITY_FAILS = "equality-fails"


@dataclass(frozen=True)
class XSetResult:
    status: XSetStatus
    members: int
    witness: np.ndarray | None = None
    target_sum: float = 0.0


def lemma_x_set_check(p: Problem, x_star, eps: Epsilon, S: SampleSet, tol: float = TOL_EQUALITY) -> XSetResult:
    """Inspect ``{x in S feasible : f(x) <=_LU f(x*) - E}``.

    For an E-LU solution every member satisfies
    ``fL(x) + fU(x) = fL(x*) + fU(x*) - eps_hi - eps_lo``; a member violating
    the equality refutes ``x*``.
    """
    x_star = _require_feasible(p, x_star)
    target = sub(interval_value(p, x_star), eps.interval)
    FL, FU = objective_values(p, S.points)
    member = feasible_mask(p, S.points) & (FL <= target.lo) & (FU <= target.hi)
    idx = np.flatnonzero(member)
    rhs = target.lo + target.hi
    if idx.size == 0:
        return XSetResult(XSetStatus.EMPTY_INTERSECTION, 0, None, rhs)
    bad = idx[np.abs(FL[idx] + FU[idx] - rhs) > tol * (1.0 + abs(rhs))]
    if bad.size:
        return XSetResult(XSetStatus.EQUALITY_FAILS, int(idx.size), S.points[bad[0]].copy(), rhs)
    return XSetResult(XSetStatus.EQUALITY_HOLDS, int(idx.size), None, rhs)


def refute_search(
    kind: SolutionKind,
    p: Problem,
    x_star,
    eps: Epsilon | None = None,
    budget: int = 2000,
    seed: int = 0,
    starts: int = 12,
    tol: float = TOL_VIOLATE,
) -> np.ndarray | None:
    """Look for a refuter off the sample grid by local search.

    Minimizes ``max(fL(x) - tL(x), fU(x) - tU(x))`` plus an infeasibility
    penalty with Nelder-Mead from seeded starts around ``x*``. A point is
    returned only if it is feasible and :func:`violates` confirms it; None
    means inconclusive.
    """
    e = _effective_eps(kind, eps)
    x_star = _require_feasible(p, x_star)
    fs = interval_value(p, x_star)
    rng = np.random.default_rng(seed)
    penalty = 1e3

    def margin(x):
        FL, FU = objective_values(p, x[None, :])
        s = float(distances(x[None, :], x_star)[0]) if kind.quasi else 1.0
        m = max(FL[0] - (fs.lo - s * e.hi), FU[0] - (fs.hi - s * e.lo))
        if p.g:
            viol = max(0.0, max(gj(x) for gj in p.g))
            m += penalty * viol
        return m

    scales = np.geomspace(0.1, 10.0, max(starts, 1))
    for k in range(starts):
        x0 = x_star + rng.normal(scale=scales[k] * (1.0 + np.abs(x_star)), size=p.n)
        res = optimize.minimize(
            margin, x0, method="Nelder-Mead", options={"maxfev": budget, "xatol": 1e-10, "fatol": 1e-12}
        )
        x = res.x
        if feasible(p, x, FEAS_TOL) and violates(kind, p, x_star, x, e, tol):
            return x
    return None


def membership_table(p: Problem, points, eps: Epsilon, S: SampleSet, tol: float = TOL_VIOLATE):
    """Verdicts of every kind at every point: list of (point, {kind: Certificate})."""
    rows = []
    for x in np.asarray(points, dtype=float).reshape(-1, p.n):
        rows.append((x, {k: certify_on_set(k, p, x, eps, S, tol) for k in SolutionKind}))
    return rows
