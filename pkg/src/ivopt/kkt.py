"""Approximate KKT conditions for convex interval-valued programs.

Three optimality systems are handled:

* weakly E-LU: ``0 in d_{e0}(muL fL + muU fU)(x*) + sum_j d_{ej}(lam_j g_j)(x*)``
  with ``sum_{j>=0} e_j - muL eps_hi - muU eps_lo <= sum_j lam_j g_j(x*)``;
* E-LU (conditional on a closedness condition the caller asserts):
  ``0 in d_{e0}(fL + fU)(x*) + mu1 d_{c1} fL(x*) + mu2 d_{c2} fU(x*) + sum_j d_{ej}(lam_j g_j)(x*)``
  with ``e0 + mu1 c1 + mu2 c2 - (1 + mu1) eps_hi - (1 + mu2) eps_lo + sum_j lam_j e_j <= sum_j lam_j g_j(x*)``;
* E-quasi-LU: ``0 in muL grad fL + muU grad fU + sum_{j active} lam_j grad g_j + (muL eps_hi + muU eps_lo) B``.

Membership in a sum of epsilon-subdifferentials is decided as a least-distance
problem over closed-form sets (ellipsoids for quadratics, points for affine
functions), solved by alternating projections. A failure is only reported
when a separating direction proves it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import expr as E
from .certify import SolutionKind, XSetStatus, certify_on_set, lemma_x_set_check
from .errors import (
    CCNotAsserted,
    InfeasiblePoint,
    NonConvexError,
    NonSmoothAtPoint,
    StrictConvexityNotCertified,
)
from .problem import (
    ACTIVE_TOL,
    FEAS_TOL,
    Epsilon,
    Problem,
    SampleSet,
    active_set,
    check_mfcq,
    check_slater,
    feasible,
)

TOL_KKT = 1e-7
TOL_SCALAR = 1e-9
MAX_ITER = 10_000


class Status(enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class KktWitness:
    """Multipliers and slack parameters of one of the optimality systems.

    ``vectors`` optionally holds one subgradient per set summand; it is only a
    starting point for verification and never trusted on its own.
    """

    muL: float
    muU: float
    lam: np.ndarray
    eps0: float = 0.0
    eps_j: np.ndarray | None = None
    gamma1: float = 0.0
    gamma2: float = 0.0
    mu1: float = 0.0
    mu2: float = 0.0
    residual: float = 0.0
    vectors: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        eps_j = np.zeros(lam.size) if self.eps_j is None else np.atleast_1d(np.asarray(self.eps_j, dtype=float))
        if eps_j.size != lam.size:
            raise ValueError("eps_j and lam must have the same length")
        scalars = [self.muL, self.muU, self.eps0, self.gamma1, self.gamma2, self.mu1, self.mu2]
        if min(scalars) < 0 or np.any(lam < 0) or np.any(eps_j < 0):
            raise ValueError("witness multipliers and slacks must be nonnegative")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "eps_j", eps_j)

    def describe(self) -> str:
        vec = lambda a: "(" + ", ".join(f"{v:.12g}" for v in a) + ")"
        parts = [
            f"muL = {self.muL:.12g}, muU = {self.muU:.12g}",
            f"lambda = {vec(self.lam)}",
            f"eps0 = {self.eps0:.12g}, eps_j = {vec(self.eps_j)}",
        ]
        if self.mu1 or self.mu2 or self.gamma1 or self.gamma2:
            parts.append(
                f"mu1 = {self.mu1:.12g}, gamma1 = {self.gamma1:.12g}, mu2 = {self.mu2:.12g}, gamma2 = {self.gamma2:.12g}"
            )
        return "\n".join(parts)


@dataclass
class KktReport:
    theorem: str
    status: Status
    residual: float
    lower_bound: float = 0.0
    scalar_lhs: float = 0.0
    scalar_rhs: float = 0.0
    witness: KktWitness | None = None
    flags: dict[str, str] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status is Status.HOLDS

    def __bool__(self) -> bool:
        return self.ok

    def text(self) -> str:
        lines = [
            f"theorem: {self.theorem}",
            f"status: {self.status.value}",
            f"residual: {self.residual:.12g}",
        ]
        if "scalar check" in self.flags:
            lines.append(f"separation lower bound: {self.lower_bound:.12g}")
            lines.append(f"scalar inequality: {self.scalar_lhs:.12g} <= {self.scalar_rhs:.12g}")
        for k in sorted(self.flags):
            lines.append(f"{k}: {self.flags[k]}")
        if self.witness is not None:
            lines.append(self.witness.describe())
        lines.extend(self.notes)
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Least distance over a Minkowski sum of closed-form sets


@dataclass(frozen=True)
class MemberSet:
    family: E.QuadraticSubdifferential
    eps: float
    label: str

    def project(self, y):
        return self.family.project(y, self.eps)

    def support(self, u) -> float:
        return self.family.support(u, self.eps)


@dataclass(frozen=True)
class LeastDistance:
    residual: float
    lower_bound: float
    vectors: tuple[np.ndarray, ...]
    iterations: int
    status: Status


def least_distance(sets, hints=None, tol: float = TOL_KKT, max_iter: int = MAX_ITER) -> LeastDistance:
    """Look for ``v_i in C_i`` with ``sum v_i = 0``.

    Alternates between the product of the sets and the subspace
    ``{sum v_i = 0}``. For ``s = sum v_i`` and ``u = s / ||s||`` the value
    ``-sum_i support_i(-u)`` lower-bounds the distance from 0 to the sum set,
    which certifies failure when it exceeds ``tol``.
    """
    k = len(sets)
    if hints is not None and len(hints) == k:
        v = [s.project(h) for s, h in zip(sets, hints)]
    else:
        v = [s.family.center.copy() for s in sets]
    lower = 0.0
    it = 0
    for it in range(max_iter + 1):
        total = np.sum(v, axis=0)
        norm = float(np.linalg.norm(total))
        if norm <= 0.01 * tol:
            break
        if it % 10 == 0 or it == max_iter:
            u = total / norm
            lower = max(lower, -sum(s.support(-u) for s in sets))
            if lower > tol:
                return LeastDistance(norm, lower, tuple(v), it, Status.FAILS)
        if it == max_iter:
            break
        shift = total / k
        v = [s.project(vi - shift) for s, vi in zip(sets, v)]
    norm = float(np.linalg.norm(np.sum(v, axis=0)))
    status = Status.HOLDS if norm <= tol else Status.INCONCLUSIVE
    return LeastDistance(norm, lower, tuple(v), it, status)


def _family(f: E.Expr, x_star) -> E.QuadraticSubdifferential:
    return E.subdifferential_family(f, x_star)


def _require_convex(p: Problem) -> None:
    bad = [k for k, c in p.convexity().items() if not c.convex]
    if bad:
        raise NonConvexError(f"not certified convex: {', '.join(bad)}")


def _require_feasible(p: Problem, x_star) -> np.ndarray:
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    if not feasible(p, x_star, FEAS_TOL):
        raise InfeasiblePoint(f"x* = {x_star.tolist()} is infeasible")
    return x_star


def _slater_flag(p: Problem, assume_slater: bool, seed: int) -> str:
    if assume_slater:
        return "asserted by caller"
    w = check_slater(p, seed=seed)
    if w is None:
        return "inconclusive (no strictly feasible point found)"
    return "witness " + "(" + ", ".join(f"{a:.12g}" for a in w) + ")"


def _lam_gvals(p: Problem, x_star, lam) -> float:
    return float(sum(l * E.evaluate(gj, x_star) for l, gj in zip(lam, p.g)))


def _constraint_sets(p: Problem, x_star, w: KktWitness) -> list[MemberSet]:
    return [
        MemberSet(_family(gj, x_star).scaled(l), float(e), f"d_eps{j + 1}(lam{j + 1} g{j + 1})")
        for j, (gj, l, e) in enumerate(zip(p.g, w.lam, w.eps_j))
    ]


def _check_lengths(p: Problem, w: KktWitness) -> None:
    if w.lam.size != p.m:
        raise ValueError(f"witness has {w.lam.size} constraint multipliers, problem has {p.m} constraints")


def _finish(theorem, ld: LeastDistance, lhs, rhs, w, flags, notes=()) -> KktReport:
    scalar_ok = lhs <= rhs + TOL_SCALAR
    if ld.status is Status.HOLDS and scalar_ok:
        status = Status.HOLDS
    elif ld.status is Status.FAILS or not scalar_ok:
        status = Status.FAILS
    else:
        status = Status.INCONCLUSIVE
    flags = dict(flags)
    flags["scalar check"] = "satisfied" if scalar_ok else "violated"
    return KktReport(theorem, status, ld.residual, ld.lower_bound, lhs, rhs, w, flags, list(notes))


# ---------------------------------------------------------------------------
# Weakly E-LU


def verify_weak_elu_kkt(
    p: Problem, x_star, eps: Epsilon, w: KktWitness, assume_slater: bool = False, seed: int = 0
) -> KktReport:
    """Check a witness of the weakly E-LU optimality system.

    Sufficiency of the system holds for convex data; necessity needs a
    Slater point, whose search result is recorded in the report flags.
    """
    _require_convex(p)
    x_star = _require_feasible(p, x_star)
    _check_lengths(p, w)
    if abs(w.muL + w.muU - 1.0) > 1e-12:
        raise ValueError("weakly E-LU witness needs muL + muU = 1")
    phi = E.linear_combination([w.muL, w.muU], [p.fL, p.fU])
    sets = [MemberSet(_family(phi, x_star), w.eps0, "d_eps0(muL fL + muU fU)")] + _constraint_sets(p, x_star, w)
    ld = least_distance(sets, w.vectors)
    lhs = w.eps0 + float(np.sum(w.eps_j)) - w.muL * eps.hi - w.muU * eps.lo
    rhs = _lam_gvals(p, x_star, w.lam)
    flags = {"slater": _slater_flag(p, assume_slater, seed)}
    w = KktWitness(w.muL, w.muU, w.lam, w.eps0, w.eps_j, residual=ld.residual, vectors=ld.vectors)
    return _finish("weakly E-LU KKT", ld, lhs, rhs, w, flags)


def _quadratic_data(f: E.Expr, x_star):
    fam = _family(f, x_star)
    return fam.Q, fam.center


def _split_value(Qphi, gphi, Qg, Gg, gvals, lam):
    """Least total slack for the scalar system at fixed multipliers.

    Returns ``(value, z)`` where ``value = 0.5 r'H^+ r - lam . g(x*)`` and
    ``z = H^+ r`` with ``H = Qphi + sum lam_j Q_j`` and
    ``r = grad phi + sum lam_j grad g_j``; ``value`` is inf when ``r`` is
    outside the range of ``H``.
    """
    H = Qphi + np.tensordot(lam, Qg, axes=1) if lam.size else Qphi
    r = gphi + (Gg @ lam if lam.size else 0.0)
    z = np.linalg.pinv(H, rcond=1e-12, hermitian=True) @ r
    if np.linalg.norm(H @ z - r) > 1e-9 * (1.0 + np.linalg.norm(r)):
        return math.inf, z
    return 0.5 * float(r @ z) - float(lam @ gvals), z


def _lambda_candidates(Qphi, gphi, Qg, Gg, gvals, active):
    m = gvals.size
    cands = [np.zeros(m)]
    if m:
        lam, _ = optimize.nnls(Gg, -gphi)
        cands.append(lam)
        if active:
            la, _ = optimize.nnls(Gg[:, list(active)], -gphi)
            full = np.zeros(m)
            full[list(active)] = la
            cands.append(full)

        delta = 1e-9 * max(1.0, np.abs(Qphi).max(), np.abs(Qg).max())

        def smooth(lam):
            H = Qphi + np.tensordot(lam, Qg, axes=1) + delta * np.eye(Qphi.shape[0])
            r = gphi + Gg @ lam
            z = np.linalg.solve(H, r)
            val = 0.5 * r @ z - lam @ gvals
            grad = Gg.T @ z - 0.5 * np.einsum("i,jik,k->j", z, Qg, z) - gvals
            return val, grad

        for start in list(cands):
            res = optimize.minimize(smooth, start, jac=True, method="L-BFGS-B", bounds=[(0, None)] * m)
            cands.append(np.maximum(res.x, 0.0))
    return cands


def _scalar_witness(phi: E.Expr, p: Problem, x_star, eps: float, muL: float = 1.0, muU: float = 0.0):
    """Best witness of the scalar eps-solution system for ``phi``; (value, witness)."""
    Qphi, gphi = _quadratic_data(phi, x_star)
    n = x_star.size
    if p.m:
        fams = [_family(gj, x_star) for gj in p.g]
        Qg = np.array([f.Q for f in fams])
        Gg = np.column_stack([f.center for f in fams])
    else:
        Qg = np.zeros((0, n, n))
        Gg = np.zeros((n, 0))
    gvals = np.array([E.evaluate(gj, x_star) for gj in p.g])
    active = active_set(p, x_star)
    best_val, best_lam, best_z = math.inf, None, None
    for lam in _lambda_candidates(Qphi, gphi, Qg, Gg, gvals, active):
        val, z = _split_value(Qphi, gphi, Qg, Gg, gvals, lam)
        if val < best_val:
            best_val, best_lam, best_z = val, lam, z
    if best_lam is None:
        return math.inf, None
    z = best_z
    eps0 = 0.5 * float(z @ Qphi @ z)
    eps_j = np.array([0.5 * l * float(z @ Qj @ z) for l, Qj in zip(best_lam, Qg)])
    vectors = [gphi - Qphi @ z] + [l * (Gg[:, j] - Qg[j] @ z) for j, l in enumerate(best_lam)]
    w = KktWitness(muL, muU, best_lam, max(eps0, 0.0), np.maximum(eps_j, 0.0), vectors=tuple(vectors))
    return best_val - eps, w


def search_weak_elu_witness(
    p: Problem, x_star, eps: Epsilon, resolution: float = 0.05, assume_slater: bool = False, seed: int = 0
) -> KktWitness | None:
    """Search for a witness of the weakly E-LU system.

    ``muL`` runs over a grid of step ``resolution`` ordered outward from 1/2;
    for each weight the constraint multipliers and slacks come from the
    least-slack split of the scalarized system. The excess over the allowed
    slack is convex in ``muL``, so a bounded scalar minimization follows the
    grid. None means the search failed at this resolution (inconclusive).
    """
    _require_convex(p)
    x_star = _require_feasible(p, x_star)

    def excess(mu):
        phi = E.linear_combination([mu, 1.0 - mu], [p.fL, p.fU])
        return _scalar_witness(phi, p, x_star, mu * eps.hi + (1.0 - mu) * eps.lo, mu, 1.0 - mu)

    steps = max(1, int(round(1.0 / resolution)))
    grid = sorted({min(1.0, k / steps) for k in range(steps + 1)}, key=lambda m: (abs(m - 0.5), m))
    tried = {}
    for mu in grid:
        val, w = excess(mu)
        tried[mu] = val
        if w is not None and val <= TOL_SCALAR:
            if verify_weak_elu_kkt(p, x_star, eps, w, assume_slater=True).ok:
                return w
    res = optimize.minimize_scalar(
        lambda m: min(excess(m)[0], 1e300), bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12}
    )
    val, w = excess(float(res.x))
    if w is not None and val <= TOL_SCALAR and verify_weak_elu_kkt(p, x_star, eps, w, assume_slater=True).ok:
        return w
    return None


def scalar_eps_solution_check(
    phi: E.Expr, p: Problem, x_star, eps: float, assume_slater: bool = False, seed: int = 0
) -> KktReport:
    """Decide whether ``x*`` is an ``eps``-minimizer of convex ``phi`` over the feasible set.

    Uses the equivalent system ``0 in d_{e0} phi(x*) + sum_j d_{ej}(lam_j g_j)(x*)``
    with ``sum_{j>=0} e_j - eps <= sum_j lam_j g_j(x*)``.
    """
    if not E.certify_convexity(phi).convex:
        raise NonConvexError("phi is not certified convex")
    _require_convex(Problem(p.n, phi, phi, p.g, p.name))
    x_star = _require_feasible(p, x_star)
    val, w = _scalar_witness(phi, p, x_star, eps)
    flags = {"slater": _slater_flag(p, assume_slater, seed)}
    if w is None:
        return KktReport("scalar eps-solution", Status.FAILS, math.inf, flags=flags, notes=["no finite split"])
    sets = [MemberSet(_family(phi, x_star), w.eps0, "d_eps0 phi")] + _constraint_sets(p, x_star, w)
    ld = least_distance(sets, w.vectors)
    lhs = w.eps0 + float(np.sum(w.eps_j)) - eps
    rhs = _lam_gvals(p, x_star, w.lam)
    w = KktWitness(w.muL, w.muU, w.lam, w.eps0, w.eps_j, residual=ld.residual, vectors=ld.vectors)
    notes = []
    if ld.status is Status.HOLDS and lhs > rhs + TOL_SCALAR:
        # the split minimizes the slack, so no other multiplier choice found does better
        notes.append(f"least slack excess over eps: {val:.12g}")
    return _finish("scalar eps-solution", ld, lhs, rhs, w, flags, notes)


# ---------------------------------------------------------------------------
# E-LU (conditional)


def verify_elu_kkt(
    p: Problem,
    x_star,
    eps: Epsilon,
    w: KktWitness,
    assume_cc: bool = False,
    samples: SampleSet | None = None,
) -> KktReport:
    """Check a witness of the E-LU optimality system.

    The conclusion depends on a closedness condition that is not verified
    here; the caller must assert it with ``assume_cc``. The scalar inequality
    is checked exactly as stated, including the ``sum lam_j e_j`` term.
    """
    if not assume_cc:
        raise CCNotAsserted("the E-LU system is only meaningful under the closedness condition; pass assume_cc")
    _require_convex(p)
    x_star = _require_feasible(p, x_star)
    _check_lengths(p, w)
    total = E.add(p.fL, p.fU)
    sets = [
        MemberSet(_family(total, x_star), w.eps0, "d_eps0(fL + fU)"),
        MemberSet(_family(p.fL, x_star).scaled(w.mu1), w.mu1 * w.gamma1, "mu1 d_gamma1 fL"),
        MemberSet(_family(p.fU, x_star).scaled(w.mu2), w.mu2 * w.gamma2, "mu2 d_gamma2 fU"),
    ] + _constraint_sets(p, x_star, w)
    ld = least_distance(sets, w.vectors)
    lhs = (
        w.eps0
        + w.mu1 * w.gamma1
        + w.mu2 * w.gamma2
        - (1.0 + w.mu1) * eps.hi
        - (1.0 + w.mu2) * eps.lo
        + float(w.lam @ w.eps_j)
    )
    rhs = _lam_gvals(p, x_star, w.lam)
    flags = {"closedness condition": "asserted by caller; conclusion is conditional on it"}
    if samples is not None:
        xs = lemma_x_set_check(p, x_star, eps, samples)
        flags["X(x*, E) on sample"] = f"{xs.status.value} ({xs.members} members)"
        if xs.status is XSetStatus.EMPTY_INTERSECTION:
            flags["X(x*, E) on sample"] += "; precondition not met on the sample"
    w = KktWitness(
        w.muL, w.muU, w.lam, w.eps0, w.eps_j, w.gamma1, w.gamma2, w.mu1, w.mu2, ld.residual, ld.vectors
    )
    return _finish("E-LU KKT (conditional)", ld, lhs, rhs, w, flags)


def candidate_elu_witness(p: Problem, x_star, eps: Epsilon) -> KktWitness | None:
    """A witness candidate with ``mu1 = mu2 = 0`` from the scalar system of ``fL + fU``."""
    _require_convex(p)
    x_star = _require_feasible(p, x_star)
    val, w = _scalar_witness(E.add(p.fL, p.fU), p, x_star, eps.hi + eps.lo)
    if w is None or not math.isfinite(val):
        return None
    vectors = (w.vectors[0], np.zeros(p.n), np.zeros(p.n)) + tuple(w.vectors[1:])
    return KktWitness(1.0, 1.0, w.lam, w.eps0, w.eps_j, vectors=vectors)


# ---------------------------------------------------------------------------
# E-quasi-LU


def _smooth_gradients(p: Problem, x_star, J):
    for label, f in [("fL", p.fL), ("fU", p.fU)] + [(f"g{j + 1}", p.g[j]) for j in J]:
        if not E.is_smooth_at(f, x_star):
            raise NonSmoothAtPoint(f"{label} is not differentiable at x*; verify an explicit witness instead")
    a = E.subgradient(p.fL, x_star)
    b = E.subgradient(p.fU, x_star)
    G = np.column_stack([E.subgradient(p.g[j], x_star) for j in J]) if J else np.zeros((x_star.size, 0))
    return a, b, G


def _cone_distance(c, G):
    """``min_{lam >= 0} ||c + G lam||`` and the minimizer."""
    if G.shape[1] == 0:
        return float(np.linalg.norm(c)), np.zeros(0)
    lam, dist = optimize.nnls(G, -c)
    return float(dist), lam


def quasi_kkt_residual(
    p: Problem, x_star, eps: Epsilon, active_tol: float = ACTIVE_TOL, tol: float = TOL_KKT
) -> tuple[KktWitness, float, KktReport]:
    """Minimize ``||muL a + muU b + G lam|| - (muL eps_hi + muU eps_lo)``.

    ``a``, ``b`` are the objective gradients at ``x*``, ``G`` holds the
    gradients of the active constraints, ``(muL, muU)`` runs over the unit
    simplex and ``lam >= 0`` is supported on the active set. For fixed ``muL``
    the inner problem is a nonnegative least-squares problem; the outer
    function is convex in ``muL`` and is minimized by bounded scalar search.

    Returns
    -------
    witness, residual, report
        ``residual`` is the signed minimum; the system holds iff it is at
        most ``tol``. ``witness.residual`` is the norm before subtracting the
        ball radius.
    """
    _require_convex(p)
    x_star = _require_feasible(p, x_star)
    J = active_set(p, x_star, active_tol)
    a, b, G = _smooth_gradients(p, x_star, J)

    def value(mu):
        dist, lam = _cone_distance(mu * a + (1.0 - mu) * b, G)
        return dist - (mu * eps.hi + (1.0 - mu) * eps.lo), dist, lam

    candidates = [0.0, 0.5, 1.0]
    res = optimize.minimize_scalar(lambda m: value(m)[0], bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    candidates.append(float(res.x))
    mu = min(candidates, key=lambda m: (value(m)[0], abs(m - 0.5)))
    r, dist, lam_J = value(mu)
    lam = np.zeros(p.m)
    lam[list(J)] = lam_J
    w = KktWitness(mu, 1.0 - mu, lam, residual=dist)
    flags = {"active set": "{" + ", ".join(f"g{j + 1}" for j in J) + "}"}
    if J:
        mf = check_mfcq(p, x_star, active_tol=active_tol)
        flags["MFCQ"] = f"{'holds' if mf.holds else 'fails'} (r = {mf.r:.12g})"
    else:
        flags["MFCQ"] = "holds (no active constraints)"
    status = Status.HOLDS if r <= tol else Status.FAILS
    report = KktReport("E-quasi-LU KKT", status, r, witness=w, flags=flags)
    return w, r, report


def quasi_witness_residual(p: Problem, x_star, eps: Epsilon, w: KktWitness, active_tol: float = ACTIVE_TOL) -> float:
    """Signed residual of a given quasi witness (multipliers normalized to the simplex)."""
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    s = w.muL + w.muU
    if s <= 0:
        raise ValueError("quasi witness needs muL + muU > 0")
    J = set(active_set(p, x_star, active_tol))
    if any(l > 0 and j not in J for j, l in enumerate(w.lam)):
        return math.inf
    a, b, G = _smooth_gradients(p, x_star, sorted(J))
    lam = w.lam[sorted(J)] / s
    vec = (w.muL / s) * a + (w.muU / s) * b + (G @ lam if lam.size else 0.0)
    return float(np.linalg.norm(vec)) - (w.muL * eps.hi + w.muU * eps.lo) / s


def quasi_sufficiency_check(
    p: Problem,
    x_star,
    eps: Epsilon,
    w: KktWitness | None = None,
    samples: SampleSet | None = None,
    tol: float = TOL_KKT,
) -> KktReport:
    """Sufficiency of the E-quasi-LU system under strict convexity of fL and fU.

    When the system holds, ``x*`` is E-quasi-LU over the whole feasible set;
    with ``samples`` the conclusion is cross-checked by the grid certifier.
    """
    for label, f in (("fL", p.fL), ("fU", p.fU)):
        if not E.certify_convexity(f).strictly_convex:
            raise StrictConvexityNotCertified(f"{label} is not certified strictly convex")
    best, r, report = quasi_kkt_residual(p, x_star, eps, tol=tol)
    if w is not None:
        rw = quasi_witness_residual(p, x_star, eps, w)
        report.flags["supplied witness residual"] = f"{rw:.12g}"
        if rw <= tol:
            r, best = rw, w
    status = Status.HOLDS if r <= tol else Status.FAILS
    report = KktReport("E-quasi-LU sufficiency", status, r, witness=best, flags=dict(report.flags))
    if status is Status.HOLDS:
        report.notes.append("E-quasi-LU by sufficiency")
    if samples is not None:
        cert = certify_on_set(SolutionKind.EQUASI_LU, p, x_star, eps, samples)
        agree = cert.passed or status is not Status.HOLDS
        report.flags["grid cross-check"] = f"{cert.verdict.value} ({'agrees' if agree else 'DISAGREES'})"
    return report
