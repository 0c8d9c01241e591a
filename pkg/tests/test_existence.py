import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import problem_path, random_instance
from ivopt.certify import SolutionKind, certify_on_set
from ivopt.errors import EpsilonError, InfeasiblePoint
from ivopt.existence import descend_to_elu, ekeland_conclusion_holds, ekeland_quasi, lu_bounded_below
from ivopt.parser import parse_expr
from ivopt.problem import Epsilon, Problem, SampleSet, load_problem

HYP = load_problem(problem_path("hyperbola.prob"))
SQ = Problem(1, parse_expr("x1^2", 1), parse_expr("2*x1^2", 1))


def test_bound_on_example():
    rep = lu_bounded_below(HYP.problem, HYP.samples)
    assert rep.bound.lo > 0 and rep.bound.lo <= rep.bound.hi
    assert "empirical" in rep.note


def test_descent_on_family_with_start_point():
    S = SampleSet.from_points([[1 / k, k] for k in range(1, 101)] + [[1.0, 1.0]])
    x, trace = descend_to_elu(HYP.problem, S, [1.0, 1.0], Epsilon(0.1, 0.1))
    assert trace.steps >= 1
    assert trace.sublevel_certificate.passed and trace.full_certificate.passed


def test_descent_already_solution():
    S = SampleSet.grid(-2, 2, 41)
    x, trace = descend_to_elu(SQ, S, [0.0], Epsilon(0.1, 0.1))
    assert trace.steps == 0 and x[0] == 0.0


def test_descent_bound_and_decrease():
    S = SampleSet.grid(-2, 2, 41)
    eps = Epsilon(0.5, 1.0)
    x, trace = descend_to_elu(SQ, S, [2.0], eps, lower_bound=0.0)
    assert trace.iteration_bound == 4
    assert trace.steps <= 4
    for a, b in zip(trace.values, trace.values[1:]):
        assert a.lo - b.lo >= eps.hi and a.hi - b.hi >= eps.lo


def test_descent_rejects_zero_upper_tolerance():
    with pytest.raises(EpsilonError):
        descend_to_elu(SQ, SampleSet.grid(-1, 1, 3), [1.0], Epsilon(0, 0))


def test_descent_rejects_infeasible_start():
    p = Problem(1, SQ.fL, SQ.fU, (parse_expr("1 - x1", 1),))
    with pytest.raises(InfeasiblePoint):
        descend_to_elu(p, SampleSet.grid(-2, 2, 5), [0.0], Epsilon(0.1, 0.1))


def test_trace_csv():
    x, trace = descend_to_elu(SQ, SampleSet.grid(-2, 2, 41), [2.0], Epsilon(0.5, 1.0))
    lines = trace.to_csv().splitlines()
    assert lines[0] == "step,x1,fL,fU"
    assert len(lines) == trace.steps + 2


def test_ekeland_singleton_and_example():
    S1 = SampleSet.from_points([[0.3, 0.7]])
    assert np.array_equal(ekeland_quasi(HYP.problem, S1, Epsilon(0.1, 0.1)), [0.3, 0.7])
    eps = Epsilon(0.1, 0.1)
    x, trace = ekeland_quasi(HYP.problem, HYP.samples, eps, return_trace=True)
    assert trace.full_certificate.passed
    assert certify_on_set(SolutionKind.EQUASI_LU, HYP.problem, x, eps, HYP.samples).passed
    assert ekeland_conclusion_holds(HYP.problem, HYP.samples, eps, x)


def test_ekeland_needs_positive_lower_endpoint():
    with pytest.raises(EpsilonError):
        ekeland_quasi(SQ, SampleSet.grid(-1, 1, 3), Epsilon(0, 0.1))


def test_ekeland_warm_start():
    eps = Epsilon(0.1, 0.2)
    x = ekeland_quasi(HYP.problem, HYP.samples, eps, x0=[1.0, 1.0], warm_start=True)
    assert certify_on_set(SolutionKind.EQUASI_LU, HYP.problem, x, eps, HYP.samples).passed


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 1), st.floats(0, 1))
def test_outputs_certified_on_random_instances(seed, hi, frac):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 3))
    p = random_instance(rng, n, int(rng.integers(0, 3)))
    S = SampleSet.random(-2, 2, 200, n, seed)
    eps = Epsilon(max(frac * hi, 1e-3), hi)
    x, trace = descend_to_elu(p, S, None, eps)
    assert trace.full_certificate.passed
    xq = ekeland_quasi(p, S, eps)
    assert certify_on_set(SolutionKind.EQUASI_LU, p, xq, eps, S).passed
