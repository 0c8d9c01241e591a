import csv
import io

import numpy as np
import pytest

from helpers import problem_path, random_pd
from ivopt import expr as E
from ivopt.certify import SolutionKind, certify_on_set
from ivopt.errors import NoFeasiblePointFound, PreconditionError
from ivopt.parser import parse_expr
from ivopt.problem import Epsilon, Problem, load_problem
from ivopt.scalarize import (
    bridge_to_weak_elu,
    frontier_csv,
    frontier_sweep,
    weighted_objective,
    weighted_sum_solve,
)

QUAD = load_problem(problem_path("quad1d.prob"))
FRONT = load_problem(problem_path("frontier1d.prob"))


def test_weighted_objective_bounds():
    assert E.evaluate(weighted_objective(QUAD.problem, 0.25), [2.0]) == pytest.approx(0.25 * 4 + 0.75 * 8)
    with pytest.raises(ValueError):
        weighted_objective(QUAD.problem, 1.5)


@pytest.mark.parametrize("mu", [0.0, 0.5, 1.0])
def test_constrained_quadratic(mu):
    res = weighted_sum_solve(QUAD.problem, mu, budget=2000, samples=QUAD.samples)
    assert res.x[0] == pytest.approx(1.0, abs=1e-6)
    assert res.gap <= 1e-6


def test_unconstrained_pd_minimizer():
    rng = np.random.default_rng(0)
    Q, b = random_pd(rng, 3), rng.normal(size=3)
    f = E.Quadratic(Q, b, 0.0)
    p = Problem(3, f, E.add(f, E.constant(1.0, 3)))
    res = weighted_sum_solve(p, 0.3, budget=2000)
    assert np.allclose(res.x, -np.linalg.solve(Q, b), atol=1e-5)


def test_frontier_endpoints():
    a = weighted_sum_solve(FRONT.problem, 0.0, budget=2000, samples=FRONT.samples)
    b = weighted_sum_solve(FRONT.problem, 1.0, budget=2000, samples=FRONT.samples)
    assert a.x[0] == pytest.approx(1.0, abs=1e-6) and b.x[0] == pytest.approx(0.0, abs=1e-6)


def test_no_feasible_point():
    p = Problem(1, parse_expr("x1^2", 1), parse_expr("2*x1^2", 1), (parse_expr("x1^2 + 1", 1),))
    with pytest.raises(NoFeasiblePointFound):
        weighted_sum_solve(p, 0.5, budget=50, max_doublings=2, polish=False)


def test_bridge_options():
    p = QUAD.problem
    assert bridge_to_weak_elu(p, [1.0], 0.5, 0.0, gap=0.0) == [Epsilon(0, 0)]
    assert bridge_to_weak_elu(p, [1.0], 0.5, 0.1, gap=0.0) == [Epsilon(0.1, 0.1), Epsilon(0.0, 0.2)]
    opts = bridge_to_weak_elu(p, [1.0], 1.0, 0.1, gap=0.0)
    assert Epsilon(0.0, 0.1) in opts


def test_bridge_verifies_precondition_without_gap():
    assert bridge_to_weak_elu(QUAD.problem, [1.0], 0.5, 0.1)
    with pytest.raises(PreconditionError):
        bridge_to_weak_elu(QUAD.problem, [2.0], 0.5, 0.1)


def test_bridged_tolerance_passes_weak_certification():
    for mu in (0.0, 0.3, 1.0):
        x = [1.05]
        s = float(weighted_objective(QUAD.problem, mu)(x)) - float(weighted_objective(QUAD.problem, mu)([1.0]))
        for eps in bridge_to_weak_elu(QUAD.problem, x, mu, s, gap=s):
            assert certify_on_set(SolutionKind.WEAK_ELU, QUAD.problem, x, eps, QUAD.samples).passed


def test_sweep_sorted_and_csv():
    pts = frontier_sweep(FRONT.problem, [1.0, 0.0, 0.5], budget=1000, samples=FRONT.samples)
    assert [fp.muL for fp in pts] == [0.0, 0.5, 1.0]
    rows = list(csv.DictReader(io.StringIO(frontier_csv(pts, 1))))
    assert list(rows[0]) == ["muL", "x1", "fL", "fU", "gap", "epsL", "epsU"]
    assert len(rows) == 3
    for fp in pts:
        assert certify_on_set(SolutionKind.WEAK_ELU, FRONT.problem, fp.x, fp.eps, FRONT.samples).passed
