import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import problem_path, random_instance
from ivopt import expr as E
from ivopt.certify import SolutionKind, certify_on_set
from ivopt.errors import (
    CCNotAsserted,
    NonConvexError,
    StrictConvexityNotCertified,
    UnsupportedAtomForMembership,
)
from ivopt.kkt import (
    KktWitness,
    MemberSet,
    Status,
    candidate_elu_witness,
    least_distance,
    quasi_kkt_residual,
    quasi_sufficiency_check,
    scalar_eps_solution_check,
    search_weak_elu_witness,
    verify_elu_kkt,
    verify_weak_elu_kkt,
)
from ivopt.parser import parse_expr
from ivopt.problem import Epsilon, Problem, SampleSet, load_problem

ZERO = Epsilon(0, 0)


def line(lower="x1^2", upper="2*x1^2", cons=("1 - x1",)):
    return Problem(1, parse_expr(lower, 1), parse_expr(upper, 1), tuple(parse_expr(c, 1) for c in cons))


P = line()
GRID = SampleSet.grid(-3, 3, 6001)


# witnesses and the test oracle


def test_witness_validation():
    with pytest.raises(ValueError):
        KktWitness(0.5, 0.5, [-1.0])
    with pytest.raises(ValueError):
        KktWitness(0.5, 0.5, [1.0], eps_j=[0.0, 0.0])
    assert "lambda = (2)" in KktWitness(0.5, 0.5, [2.0]).describe()


def point_set(c):
    return E.QuadraticSubdifferential(np.array([c]), np.zeros((1, 1)))


def test_least_distance_certifies_failure():
    # d_1(x^2)(1) = [0, 4]
    fam = E.subdifferential_family(parse_expr("x1^2", 1), [1.0])
    ok = least_distance([MemberSet(fam, 1.0, "a"), MemberSet(point_set(-3.0), 0.0, "b")])
    assert ok.status is Status.HOLDS
    bad = least_distance([MemberSet(fam, 0.25, "a"), MemberSet(point_set(-5.0), 0.0, "b")])
    assert bad.status is Status.FAILS and bad.lower_bound > 0


# weakly E-LU


@pytest.mark.parametrize("lam, status", [(3.0, Status.HOLDS), (1.5, Status.FAILS), (0.0, Status.FAILS)])
def test_weak_elu_examples(lam, status):
    rep = verify_weak_elu_kkt(P, [1.0], ZERO, KktWitness(0.5, 0.5, [lam]), assume_slater=True)
    assert rep.status is status
    if lam == 0.0:
        assert rep.residual == pytest.approx(3.0, abs=1e-6)


def test_weak_elu_unconstrained_stationary():
    p = line(cons=())
    assert verify_weak_elu_kkt(p, [0.0], ZERO, KktWitness(0.5, 0.5, [])).ok


def test_weak_elu_records_slater():
    rep = verify_weak_elu_kkt(P, [1.0], ZERO, KktWitness(0.5, 0.5, [3.0]), seed=1)
    assert rep.flags["slater"].startswith("witness")
    assert "scalar inequality" in rep.text()


def test_weak_elu_search_and_oracle():
    eps = Epsilon(0.05, 0.1)
    w = search_weak_elu_witness(P, [1.0], eps)
    assert w is not None and abs(w.muL + w.muU - 1) < 1e-12
    assert certify_on_set(SolutionKind.WEAK_ELU, P, [1.0], eps, GRID).passed
    assert search_weak_elu_witness(P, [2.0], eps) is None
    assert not certify_on_set(SolutionKind.WEAK_ELU, P, [2.0], eps, GRID).passed


def test_weak_elu_search_with_slack():
    # x* = 1.02 is within a tolerance of the constrained minimizer 1
    eps = Epsilon(0.2, 0.2)
    w = search_weak_elu_witness(P, [1.02], eps)
    assert w is not None
    assert verify_weak_elu_kkt(P, [1.02], eps, w, assume_slater=True).ok


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.5))
def test_weak_elu_search_never_contradicts_grid(seed, e):
    rng = np.random.default_rng(seed)
    p = random_instance(rng, 1, int(rng.integers(0, 3)))
    S = SampleSet.grid(-4, 4, 2001)
    feas = [x for x in np.linspace(-1, 1, 9) if all(float(g([x])) <= 0 for g in p.g)]
    eps = Epsilon(e / 2, e)
    for x in feas[:3]:
        if search_weak_elu_witness(p, [x], eps, resolution=0.1) is not None:
            assert certify_on_set(SolutionKind.WEAK_ELU, p, [x], eps, S).passed


def test_nonconvex_rejected():
    pf = load_problem(problem_path("hyperbola.prob"))
    with pytest.raises(NonConvexError):
        verify_weak_elu_kkt(pf.problem, [1.0, 1.0], ZERO, KktWitness(0.5, 0.5, []))


def test_nonquadratic_atom_rejected():
    p = line("abs(x1)", "abs(x1) + 1", ())
    with pytest.raises(UnsupportedAtomForMembership):
        verify_weak_elu_kkt(p, [0.0], ZERO, KktWitness(0.5, 0.5, []))


# E-LU (conditional)


def test_elu_examples():
    w = KktWitness(1.0, 1.0, [6.0])
    assert verify_elu_kkt(P, [1.0], ZERO, w, assume_cc=True).ok
    rep = verify_elu_kkt(P, [1.0], ZERO, KktWitness(1.0, 1.0, [0.0]), assume_cc=True)
    assert rep.status is Status.FAILS and rep.residual == pytest.approx(6.0, abs=1e-6)
    assert "asserted by caller" in rep.flags["closedness condition"]


def test_elu_needs_assumption():
    with pytest.raises(CCNotAsserted):
        verify_elu_kkt(P, [1.0], ZERO, KktWitness(1.0, 1.0, [6.0]))


def test_elu_candidate_and_sample_flag():
    w = candidate_elu_witness(P, [1.0], ZERO)
    assert w is not None and w.lam[0] == pytest.approx(6.0)
    rep = verify_elu_kkt(P, [1.0], ZERO, w, assume_cc=True, samples=GRID)
    assert rep.ok and "X(x*, E) on sample" in rep.flags


# E-quasi-LU


def test_quasi_examples():
    eps = Epsilon(0.1, 0.1)
    w, r, rep = quasi_kkt_residual(P, [1.0], eps)
    assert r == pytest.approx(-0.1, abs=1e-9) and rep.ok
    assert certify_on_set(SolutionKind.EQUASI_LU, P, [1.0], eps, GRID).passed
    w, r, rep = quasi_kkt_residual(P, [2.0], eps)
    assert r == pytest.approx(3.9, abs=1e-9) and not rep.ok
    assert w.muL == pytest.approx(1.0)
    _, r, _ = quasi_kkt_residual(P, [2.0], Epsilon(10, 10))
    assert r <= 0


def test_quasi_invariant_under_constraint_rescaling():
    eps = Epsilon(0.05, 0.1)
    for x in (1.0, 1.5):
        w1, r1, _ = quasi_kkt_residual(P, [x], eps)
        w3, r3, _ = quasi_kkt_residual(line(cons=("3 - 3*x1",)), [x], eps)
        assert r1 == pytest.approx(r3, abs=1e-9)
        assert w1.lam[0] == pytest.approx(3 * w3.lam[0], abs=1e-6)


def test_quasi_sufficiency():
    p = line("x1^2 + 0.001*x1^2", "2*x1^2", ("1 - x1",))
    rep = quasi_sufficiency_check(p, [1.0], Epsilon(0.1, 0.1), samples=GRID)
    assert rep.ok and "E-quasi-LU by sufficiency" in rep.notes
    assert "agrees" in rep.flags["grid cross-check"]


def test_quasi_sufficiency_refuses_affine():
    p = line("x1", "x1^2 + 5", ("1 - x1",))
    with pytest.raises(StrictConvexityNotCertified):
        quasi_sufficiency_check(p, [1.0], Epsilon(0.1, 0.1))


def test_quasi_supplied_witness():
    w = KktWitness(0.5, 0.5, [3.0])
    rep = quasi_sufficiency_check(line("1.001*x1^2", "2*x1^2"), [1.0], Epsilon(0.1, 0.1), w=w)
    assert rep.ok and "supplied witness residual" in rep.flags


# scalar eps-solutions


def test_scalar_examples():
    phi = parse_expr("x1^2", 1)
    free = line(cons=())
    rep = scalar_eps_solution_check(phi, free, [0.1], 0.01, assume_slater=True)
    assert rep.ok and rep.witness.eps0 == pytest.approx(0.01)
    assert scalar_eps_solution_check(phi, free, [0.0], 0.0, assume_slater=True).ok
    assert not scalar_eps_solution_check(phi, free, [1.0], 0.01, assume_slater=True).ok


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 2.0), st.floats(0.0, 2.0))
def test_scalar_matches_grid_minimum(x, eps):
    phi = parse_expr("x1^2", 1)
    oracle = x * x <= 1.0 + eps + 1e-7
    if abs(x * x - 1.0 - eps) < 1e-6:
        return
    assert scalar_eps_solution_check(phi, P, [x], eps, assume_slater=True).ok == oracle
