"""Constructive existence procedures on finite sample sets.

``descend_to_elu`` walks to an E-LU solution by repeatedly moving to the first
sample point that improves on the current one by more than E in the LU order.
Every move lowers ``fL`` by at least ``eps_hi``, which bounds the number of
moves when ``fL`` is bounded below. ``ekeland_quasi`` does the same with a
distance-scaled tolerance and stops at an E-quasi-LU solution.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .certify import Certificate, SolutionKind, certify_on_set, distances
from .errors import EpsilonError, InfeasiblePoint
from .interval import Interval
from .problem import Epsilon, Problem, SampleSet, feasible, feasible_mask, interval_value, objective_values


@dataclass(frozen=True)
class BoundReport:
    bound: Interval
    feasible_points: int
    note: str


def lu_bounded_below(p: Problem, S: SampleSet) -> BoundReport:
    """Empirical lower bound ``[min fL, min fU]`` over the feasible samples.

    ``f`` is LU-bounded from below exactly when ``fL`` is, since ``fL <= fU``.
    """
    if len(S) == 0:
        raise ValueError("empty sample set")
    feas = feasible_mask(p, S.points)
    if not feas.any():
        raise ValueError("no feasible sample point")
    FL, FU = objective_values(p, S.points[feas])
    note = "f is LU-bounded below iff fL is bounded below; this bound is empirical over the sampled region"
    return BoundReport(Interval(float(FL.min()), float(FU.min())), int(feas.sum()), note)


@dataclass
class DescentTrace:
    points: list[np.ndarray] = field(default_factory=list)
    values: list[Interval] = field(default_factory=list)
    reason: str = ""
    iteration_bound: int | None = None
    sublevel_certificate: Certificate | None = None
    full_certificate: Certificate | None = None

    @property
    def steps(self) -> int:
        """Number of moves (the start point is not a move)."""
        return max(len(self.points) - 1, 0)

    def to_csv(self) -> str:
        n = self.points[0].size if self.points else 0
        buf = io.StringIO()
        buf.write(",".join(["step"] + [f"x{i + 1}" for i in range(n)] + ["fL", "fU"]) + "\n")
        for k, (x, v) in enumerate(zip(self.points, self.values)):
            cells = [str(k)] + [f"{a:.12g}" for a in x] + [f"{v.lo:.12g}", f"{v.hi:.12g}"]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


def _start(p: Problem, S: SampleSet, x0) -> np.ndarray:
    if x0 is None:
        feas = np.flatnonzero(feasible_mask(p, S.points))
        if feas.size == 0:
            raise InfeasiblePoint("sample set has no feasible point")
        return S.points[feas[0]].copy()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not feasible(p, x0):
        raise InfeasiblePoint(f"start point {x0.tolist()} is infeasible")
    return x0


def _walk(kind: SolutionKind, p: Problem, S: SampleSet, x0: np.ndarray, eps: Epsilon, trace: DescentTrace) -> np.ndarray:
    """Move to the first violator of ``kind`` until there is none."""
    from .certify import violation_mask

    feas = feasible_mask(p, S.points)
    cur = x0
    trace.points.append(cur.copy())
    trace.values.append(interval_value(p, cur))
    # each move strictly lowers fL, so no point is visited twice
    for _ in range(len(S) + 1):
        hits = np.flatnonzero(feas & violation_mask(kind, p, cur, S.points, eps))
        if hits.size == 0:
            trace.reason = "no improving sample point"
            return cur
        cur = S.points[hits[0]].copy()
        trace.points.append(cur.copy())
        trace.values.append(interval_value(p, cur))
    raise RuntimeError("descent did not terminate; objective values are inconsistent")


def descend_to_elu(
    p: Problem, S: SampleSet, x0, eps: Epsilon, lower_bound: float | None = None
) -> tuple[np.ndarray, DescentTrace]:
    """Greedy descent to an E-LU solution on ``S``.

    Parameters
    ----------
    x0 : point or None
        Feasible start; None takes the first feasible sample point.
    lower_bound : float, optional
        A known lower bound on ``fL`` over the feasible set. The number of moves
        is then at most ``ceil((fL(x0) - lower_bound) / eps.hi)``.

    Returns
    -------
    x_star, trace
        The trace carries the certificate on the sublevel set
        ``{x : f(x) <=_LU f(x0)}`` and on all of ``S``.
    """
    if not eps.positive:
        raise EpsilonError("descent needs a tolerance with a positive upper endpoint")
    x0 = _start(p, S, x0)
    trace = DescentTrace()
    if lower_bound is not None:
        trace.iteration_bound = max(0, math.ceil((interval_value(p, x0).lo - lower_bound) / eps.hi))
    x_star = _walk(SolutionKind.ELU, p, S, x0, eps, trace)

    f0 = trace.values[0]
    FL, FU = objective_values(p, S.points)
    level = (FL <= f0.lo) & (FU <= f0.hi)
    sub_S = SampleSet(S.points[level].reshape(-1, p.n), f"sublevel set of f(x0) = {f0} within {S.descriptor}")
    trace.sublevel_certificate = certify_on_set(SolutionKind.ELU, p, x_star, eps, sub_S)
    trace.full_certificate = certify_on_set(SolutionKind.ELU, p, x_star, eps, S)
    return x_star, trace


def ekeland_quasi(
    p: Problem,
    S: SampleSet,
    eps: Epsilon,
    x0=None,
    warm_start: bool = False,
    return_trace: bool = False,
):
    """Finite-set Ekeland selection of an E-quasi-LU solution.

    Starting from ``x0``, moves to the first feasible ``x != current`` with
    ``F(x) <= F(current) - eps_vec * ||x - current||`` componentwise and at
    least one strict inequality, where ``F = (fL, fU)`` and
    ``eps_vec = (eps.hi, eps.lo)``. Both components drop on every move.

    With ``warm_start`` the walk starts from the output of :func:`descend_to_elu`.
    """
    if not eps.strictly_positive:
        raise EpsilonError("Ekeland selection needs both tolerance endpoints positive")
    x0 = _start(p, S, x0)
    if warm_start:
        x0, _ = descend_to_elu(p, S, x0, eps)
    trace = DescentTrace()
    x_star = _walk(SolutionKind.EQUASI_LU, p, S, x0, eps, trace)
    trace.full_certificate = certify_on_set(SolutionKind.EQUASI_LU, p, x_star, eps, S)
    if return_trace:
        return x_star, trace
    return x_star


def ekeland_conclusion_holds(p: Problem, S: SampleSet, eps: Epsilon, x_star, tol: float = 1e-10) -> bool:
    """No feasible sample ``x`` has ``F(x)`` in ``F(x*) - eps_vec ||x - x*|| - (R^2_+ minus 0)``."""
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    FX = np.column_stack(objective_values(p, S.points))
    Fs = np.array([v[0] for v in objective_values(p, x_star[None, :])])
    D = (Fs - distances(S.points, x_star)[:, None] * eps.vec) - FX
    bad = np.all(D >= 0, axis=1) & np.any(D > tol, axis=1) & feasible_mask(p, S.points)
    return not bad.any()
