import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import problem_path, random_instance
from ivopt.certify import (
    SolutionKind,
    Verdict,
    XSetStatus,
    certify_on_set,
    certify_via_biobjective,
    lemma_x_set_check,
    membership_table,
    refute_search,
    violates,
)
from ivopt.errors import InfeasiblePoint
from ivopt.parser import parse_expr
from ivopt.problem import Epsilon, Problem, SampleSet, load_problem

K = SolutionKind
EPS_KINDS = (K.ELU, K.WEAK_ELU, K.EQUASI_LU, K.WEAK_EQUASI_LU)
HYP = load_problem(problem_path("hyperbola.prob"))


def oracle_violates(kind, p, xs, x, eps, tol=1e-10):
    """Scalar restatement of the violation inequalities, one point at a time."""
    fls, fus = float(p.fL(xs)), float(p.fU(xs))
    fl, fu = float(p.fL(x)), float(p.fU(x))
    lo, hi = (eps.lo, eps.hi) if kind.uses_eps else (0.0, 0.0)
    s = math.dist(x, xs) if kind.quasi else 1.0
    tl, tu = fls - s * hi, fus - s * lo
    if kind.weak:
        return fl < tl - tol and fu < tu - tol
    return fl <= tl and fu <= tu and (fl < tl - tol or fu < tu - tol)


def oracle_first_refuter(kind, p, xs, eps, S):
    for i, x in enumerate(S.points):
        if all(float(g(x)) <= 1e-8 for g in p.g) and oracle_violates(kind, p, xs, x, eps):
            return i
    return None


def test_example_violation():
    p = HYP.problem
    assert violates(K.WEAK_ELU, p, [1, 1], [0.1, 10], Epsilon(0.1, 0.5))
    assert not violates(K.EQUASI_LU, p, [1, 1], [1, 1], Epsilon(0.1, 0.5))
    assert not violates(K.LU, p, [1, 1], [1, 1])


def test_empty_feasible_sample_passes():
    p = Problem(1, parse_expr("x1", 1), parse_expr("x1 + 1", 1), (parse_expr("1 - x1", 1),))
    cert = certify_on_set(K.LU, p, [1.0], None, SampleSet.from_points([[0.0], [0.5]]))
    assert cert.passed and cert.checked == 0


def test_family_refutes_weak_lu():
    family = SampleSet.from_points([[1 / k, k] for k in range(1, 101)])
    for xs in ([1.0, 1.0], [0.5, 3.0], [-1.0, 0.0]):
        cert = certify_on_set(K.WEAK_LU, HYP.problem, xs, None, family)
        assert cert.verdict is Verdict.REFUTED
        assert oracle_violates(K.WEAK_LU, HYP.problem, xs, cert.refuter, Epsilon(0, 0))
        assert cert.report().count("refuted") == 1


def test_biobjective_route_gives_same_refuter():
    S = HYP.samples
    a = certify_on_set(K.WEAK_ELU, HYP.problem, [1, 1], Epsilon(0.1, 0.5), S)
    b = certify_via_biobjective(K.WEAK_ELU, HYP.problem, [1, 1], Epsilon(0.1, 0.5), S)
    assert a.refuter_index == b.refuter_index is not None


def test_infeasible_candidate_is_rejected():
    p = Problem(1, parse_expr("x1", 1), parse_expr("x1 + 1", 1), (parse_expr("1 - x1", 1),))
    with pytest.raises(InfeasiblePoint):
        certify_on_set(K.LU, p, [0.0], None, SampleSet.grid(0, 2, 5))


def test_report_states_sample_relativity():
    cert = certify_on_set(K.ELU, HYP.problem, [0.0, 0.0], Epsilon(10, 10), HYP.samples)
    assert cert.passed
    text = cert.report()
    assert "sampled region" in text and "relative to the sampled region" in text


# the set of points dominating f(x*) - E


def test_x_set_equality_holds():
    p = Problem(1, parse_expr("x1", 1), parse_expr("x1 + 1", 1), (parse_expr("-x1", 1), parse_expr("x1 - 1", 1)))
    S = SampleSet.grid(0, 1, 101)
    res = lemma_x_set_check(p, [1.0], Epsilon(1, 1), S)
    assert res.status is XSetStatus.EQUALITY_HOLDS and res.members == 1
    assert lemma_x_set_check(p, [0.5], Epsilon(1, 1), S).status is XSetStatus.EMPTY_INTERSECTION


def test_x_set_large_eps_constant_objective():
    p = Problem(1, parse_expr("3", 1), parse_expr("4", 1))
    res = lemma_x_set_check(p, [0.0], Epsilon(5, 5), SampleSet.grid(-1, 1, 11))
    assert res.status is XSetStatus.EMPTY_INTERSECTION


def test_x_set_equality_fails_implies_refuted():
    p = Problem(1, parse_expr("x1^2", 1), parse_expr("2*x1^2", 1))
    S = SampleSet.grid(-2, 2, 81)
    res = lemma_x_set_check(p, [2.0], Epsilon(0.1, 0.1), S)
    assert res.status is XSetStatus.EQUALITY_FAILS
    assert certify_on_set(K.ELU, p, [2.0], Epsilon(0.1, 0.1), S).verdict is Verdict.REFUTED


# local search beyond the grid


def test_refute_search_finds_family_type_point():
    x = refute_search(K.WEAK_LU, HYP.problem, [1.0, 1.0], seed=3)
    assert x is not None
    assert oracle_violates(K.WEAK_LU, HYP.problem, [1.0, 1.0], x, Epsilon(0, 0))


def test_refute_search_inconclusive_at_minimizer():
    p = Problem(1, parse_expr("x1^2", 1), parse_expr("2*x1^2", 1))
    assert refute_search(K.LU, p, [0.0], seed=0, starts=4) is None


def test_membership_table_shape():
    rows = membership_table(HYP.problem, [[1, 1], [0, 0]], Epsilon(0.1, 0.1), HYP.samples)
    assert len(rows) == 2 and set(rows[0][1]) == set(SolutionKind)


# invariants over random instances


def _instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 3))
    p = random_instance(rng, n, int(rng.integers(0, 3)))
    S = SampleSet.random(-2, 2, 150, n, seed)
    xs = np.zeros(n)
    return rng, p, S, xs


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 1), st.floats(0, 1))
def test_matches_scalar_oracle_and_routes_agree(seed, a, b):
    rng, p, S, xs = _instance(seed)
    eps = Epsilon(min(a, b), max(a, b))
    for kind in SolutionKind:
        c1 = certify_on_set(kind, p, xs, eps, S)
        c2 = certify_via_biobjective(kind, p, xs, eps, S)
        assert c1.refuter_index == c2.refuter_index == oracle_first_refuter(kind, p, xs, eps, S)
        if not c1.passed:
            assert violates(kind, p, xs, c1.refuter, eps)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 0.5), st.floats(0, 0.5))
def test_nesting_and_eps_monotonicity(seed, a, b):
    _, p, S, xs = _instance(seed)
    e1 = Epsilon(min(a, b), max(a, b))
    e2 = Epsilon(e1.lo + 0.1, e1.hi + 0.3)
    for strong, weak in ((K.ELU, K.WEAK_ELU), (K.EQUASI_LU, K.WEAK_EQUASI_LU), (K.LU, K.WEAK_LU)):
        if certify_on_set(strong, p, xs, e1, S).passed:
            assert certify_on_set(weak, p, xs, e1, S).passed
    for kind in EPS_KINDS:
        if certify_on_set(kind, p, xs, e1, S).passed:
            assert certify_on_set(kind, p, xs, e2, S).passed


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_zero_eps_matches_exact_kinds(seed):
    _, p, S, xs = _instance(seed)
    z = Epsilon(0, 0)
    for a, b in ((K.ELU, K.LU), (K.WEAK_ELU, K.WEAK_LU)):
        assert certify_on_set(a, p, xs, z, S).refuter_index == certify_on_set(b, p, xs, None, S).refuter_index


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 1))
def test_equality_fails_implies_refuted(seed, e):
    _, p, S, xs = _instance(seed)
    eps = Epsilon(e / 2, e)
    if lemma_x_set_check(p, xs, eps, S).status is XSetStatus.EQUALITY_FAILS:
        assert certify_on_set(K.ELU, p, xs, eps, S).verdict is Verdict.REFUTED


def test_constrained_minimizer_passes_exact_kind():
    p = Problem(1, parse_expr("x1^2", 1), parse_expr("2*x1^2", 1), (parse_expr("1 - x1", 1),))
    assert certify_on_set(K.LU, p, [1.0], None, SampleSet.grid(1, 3, 201)).passed
