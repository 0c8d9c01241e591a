"""Weighted-sum scalarization and the bridge to weakly E-LU solutions.

If ``x`` is an ``s``-minimizer of ``muL fL + (1 - muL) fU`` over the feasible
set, then ``x`` is weakly E-LU for every ``E = [lo, hi]`` with
``muL hi + (1 - muL) lo >= s``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import expr as E
from .errors import NoFeasiblePointFound, PreconditionError, UnsupportedAtomForMembership
from .problem import FEAS_TOL, Epsilon, Problem, SampleSet, active_set, check_slater, feasible


@dataclass(frozen=True)
class ScalarizeResult:
    x: np.ndarray
    value: float
    gap: float
    lower_bound: float
    rho: float
    history: tuple[float, ...] = ()
    gap_note: str = ""


def weighted_objective(p: Problem, muL: float) -> E.Expr:
    if not 0.0 <= muL <= 1.0:
        raise ValueError(f"weight must lie in [0, 1], got {muL}")
    return E.linear_combination([muL, 1.0 - muL], [p.fL, p.fU])


def _subgradient_phase(phi, p, x0, rho, budget, alpha0, tol):
    x = x0.copy()
    best_x, best_val = None, math.inf
    history = []
    for k in range(1, budget + 1):
        gv = np.array([E.evaluate(gj, x) for gj in p.g])
        val = E.evaluate(phi, x)
        if np.all(gv <= tol) and val < best_val:
            best_x, best_val = x.copy(), val
        history.append(best_val)
        s = E.subgradient(phi, x)
        for j in np.flatnonzero(gv > 0):
            s = s + rho * E.subgradient(p.g[j], x)
        ns = np.linalg.norm(s)
        if ns == 0.0:
            if np.all(gv <= tol):
                break
            continue
        x = x - (alpha0 / math.sqrt(k)) * s / ns
    return best_x, best_val, history


def _polish(phi, p, x, tol):
    """Local refinement of the best iterate when every function is smooth there."""
    if not all(E.is_smooth_at(f, x) for f in (phi, *p.g)):
        return None
    cons = [
        {"type": "ineq", "fun": (lambda z, g=g: -E.evaluate(g, z)), "jac": (lambda z, g=g: -E.subgradient(g, z))}
        for g in p.g
    ]
    res = optimize.minimize(
        lambda z: E.evaluate(phi, z),
        x,
        jac=lambda z: E.subgradient(phi, z),
        method="SLSQP",
        constraints=cons,
        options={"ftol": 1e-15, "maxiter": 500},
    )
    if np.all(np.isfinite(res.x)) and feasible(p, res.x, tol):
        return res.x
    return None


def _pull_inside(p, x):
    """Move a tolerance-feasible ``x`` onto the feasible set along a segment to a Slater point."""
    if feasible(p, x, 0.0):
        return x
    anchor = check_slater(p)
    if anchor is None:
        return x
    lo, hi = 0.0, 1.0
    for _ in range(60):
        t = 0.5 * (lo + hi)
        if feasible(p, x + t * (anchor - x), 0.0):
            hi = t
        else:
            lo = t
    return x + hi * (anchor - x)


def _dual_bound(phi, p, x, samples):
    """Lower bound on ``min phi`` over the feasible set, with a note on its validity."""
    J = active_set(p, x, 1e-6) if p.g else ()
    s = E.subgradient(phi, x)
    G = np.column_stack([E.subgradient(p.g[j], x) for j in J]) if J else np.zeros((p.n, 0))
    lam_J = optimize.nnls(G, -s)[0] if J else np.zeros(0)
    lam = np.zeros(p.m)
    lam[list(J)] = lam_J
    parts = [phi.as_quadratic()] + [g.as_quadratic() for g in p.g]
    if all(q is not None for q in parts):
        # exact Lagrangian dual value: min_x phi(x) + sum lam_j g_j(x)
        Q = parts[0][0] + sum(l * q[0] for l, q in zip(lam, parts[1:]))
        b = parts[0][1] + sum(l * q[1] for l, q in zip(lam, parts[1:]))
        c = parts[0][2] + sum(l * q[2] for l, q in zip(lam, parts[1:]))
        d = np.linalg.eigvalsh(Q) if Q.size else np.zeros(0)
        if d.size == 0 or d.min() >= -1e-12 * max(1.0, abs(d).max()):
            z = np.linalg.lstsq(Q, -b, rcond=None)[0]
            if np.linalg.norm(Q @ z + b) <= 1e-9 * (1.0 + np.linalg.norm(b)):
                return 0.5 * z @ Q @ z + b @ z + c, "Lagrangian dual bound (global)"
    # linearized dual: phi(y) >= phi(x) + sum lam_j g_j(x) + <s + G lam, y - x> on the feasible set
    res = s + (G @ lam_J if J else 0.0)
    base = E.evaluate(phi, x) + sum(l * E.evaluate(g, x) for l, g in zip(lam, p.g))
    rn = float(np.linalg.norm(res))
    if rn <= 1e-12:
        return base, "linearized dual bound (global)"
    if samples is None:
        return -math.inf, "no finite bound (nonzero stationarity residual, no sampled region)"
    lo, hi = samples.bounds()
    radius = float(np.linalg.norm(np.maximum(np.abs(lo - x), np.abs(hi - x))))
    return base - radius * rn, "linearized dual bound (relative to the sampled box)"


def weighted_sum_solve(
    p: Problem,
    muL: float,
    budget: int = 10_000,
    alpha0: float = 1.0,
    x0=None,
    samples: SampleSet | None = None,
    tol: float = FEAS_TOL,
    polish: bool = True,
    max_doublings: int = 20,
) -> ScalarizeResult:
    """Minimize ``muL fL + (1 - muL) fU`` over the feasible set.

    Normalized subgradient steps ``alpha0 / sqrt(k)`` on the exact penalty
    ``phi + rho sum_j max(g_j, 0)``; ``rho`` starts at 1 and doubles while no
    iterate is feasible. The best feasible iterate is refined locally when
    all functions are smooth there.

    Returns
    -------
    ScalarizeResult
        ``gap = value - lower_bound`` bounds the suboptimality; see
        ``gap_note`` for the region where the bound is valid.
    """
    phi = weighted_objective(p, muL)
    x0 = np.zeros(p.n) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    rho = 1.0
    best_x = None
    history: list[float] = []
    for _ in range(max_doublings + 1):
        best_x, best_val, hist = _subgradient_phase(phi, p, x0, rho, budget, alpha0, tol)
        history.extend(hist)
        if best_x is not None:
            break
        rho *= 2.0
    if best_x is None:
        raise NoFeasiblePointFound(f"no feasible iterate after penalty weight {rho:g}")
    if polish:
        z = _polish(phi, p, best_x, tol)
        if z is not None and E.evaluate(phi, z) <= E.evaluate(phi, best_x):
            best_x = z
    # constraints hold exactly at the returned point, not just within tolerance
    best_x = _pull_inside(p, best_x)
    value = E.evaluate(phi, best_x)
    lower, note = _dual_bound(phi, p, best_x, samples)
    gap = max(0.0, value - lower)
    return ScalarizeResult(best_x, value, gap, lower, rho, tuple(history), note)


def bridge_to_weak_elu(
    p: Problem, x_hat, muL: float, scalar_eps: float, gap: float | None = None
) -> list[Epsilon]:
    """Tolerance intervals for which ``x_hat`` is weakly E-LU.

    The precondition (``x_hat`` is a ``scalar_eps``-minimizer of the weighted
    sum) is accepted from a gap estimate ``gap <= scalar_eps`` or else
    verified with the scalar KKT system.

    Returns the symmetric choice ``[s, s]`` and, when ``muL > 0``, the extreme
    choice ``[0, s / muL]``.
    """
    if scalar_eps < 0:
        raise ValueError("scalar_eps must be nonnegative")
    if gap is None or gap > scalar_eps:
        from .kkt import scalar_eps_solution_check

        try:
            ok = scalar_eps_solution_check(weighted_objective(p, muL), p, x_hat, scalar_eps, assume_slater=True).ok
        except UnsupportedAtomForMembership:
            ok = False
        if not ok:
            raise PreconditionError(f"x_hat is not verified as a {scalar_eps:g}-minimizer of the weighted sum")
    options = [Epsilon(scalar_eps, scalar_eps)]
    if muL > 0:
        extreme = Epsilon(0.0, scalar_eps / muL)
        if extreme != options[0]:
            options.append(extreme)
    return options


@dataclass(frozen=True)
class FrontierPoint:
    muL: float
    x: np.ndarray | None
    fL: float = math.nan
    fU: float = math.nan
    gap: float = math.nan
    eps: Epsilon | None = None
    error: str = ""


def frontier_sweep(
    p: Problem, weights, budget: int = 10_000, samples: SampleSet | None = None, **kwargs
) -> list[FrontierPoint]:
    """Weighted-sum solutions for each weight, sorted by weight.

    Each point carries the symmetric bridged tolerance ``[gap, gap]``.
    Failures are recorded per weight and the sweep continues.
    """
    out = []
    for mu in sorted(float(w) for w in weights):
        try:
            res = weighted_sum_solve(p, mu, budget=budget, samples=samples, **kwargs)
        except NoFeasiblePointFound as exc:
            out.append(FrontierPoint(mu, None, error=str(exc)))
            continue
        out.append(
            FrontierPoint(
                mu, res.x, E.evaluate(p.fL, res.x), E.evaluate(p.fU, res.x), res.gap, Epsilon(res.gap, res.gap)
            )
        )
    return out


def frontier_csv(points: list[FrontierPoint], n: int) -> str:
    buf = io.StringIO()
    buf.write(",".join(["muL"] + [f"x{i + 1}" for i in range(n)] + ["fL", "fU", "gap", "epsL", "epsU"]) + "\n")
    for fp in points:
        if fp.x is None:
            continue
        cells = [fp.muL, *fp.x, fp.fL, fp.fU, fp.gap, fp.eps.lo, fp.eps.hi]
        buf.write(",".join(f"{float(c):.12g}" for c in cells) + "\n")
    return buf.getvalue()
