"""Random instance generators and brute-force oracles shared by the tests."""

import os

import numpy as np

from ivopt import expr as E
from ivopt.problem import Problem

PROBLEMS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "problems")


def problem_path(name):
    return os.path.join(PROBLEMS, name)


def random_pd(rng, n, shift=0.5):
    M = rng.normal(size=(n, n))
    return M.T @ M + shift * np.eye(n)


def random_instance(rng, n, m, strict=True):
    """Convex instance with fU - fL >= 0.1 everywhere and 0 strictly feasible."""
    Q1 = random_pd(rng, n) if strict else np.zeros((n, n))
    b1 = rng.normal(size=n)
    c1 = rng.normal()
    Q2 = random_pd(rng, n, 0.2)
    b2 = rng.normal(size=n)
    c2 = 0.5 * b2 @ np.linalg.solve(Q2, b2) + 0.1 + abs(rng.normal())
    fL = E.Quadratic(Q1, b1, c1) if strict else E.Affine(b1, c1)
    fU = E.Quadratic(Q1 + Q2, b1 + b2, c1 + c2)
    g = []
    for _ in range(m):
        if rng.random() < 0.5:
            g.append(E.Affine(rng.normal(size=n), -abs(rng.normal()) - 0.2))
        else:
            g.append(E.Quadratic(random_pd(rng, n, 0.1) * 0.3, rng.normal(size=n), -abs(rng.normal()) - 0.5))
    return Problem(n, fL, fU, tuple(g), "random")


def conjugate_on_grid(f, v, lo=-20.0, hi=20.0, steps=400_001):
    """sup_x v x - f(x) over a 1-D grid."""
    xs = np.linspace(lo, hi, steps)
    return float(np.max(v * xs - E.evaluate_many(f, xs[:, None])))


def hausdorff_bruteforce(a, b, h=1e-4):
    A = np.arange(a.lo, a.hi + h / 2, h)
    B = np.arange(b.lo, b.hi + h / 2, h)
    dA = np.max(np.min(np.abs(A[:, None] - B[None, :]), axis=1))
    dB = np.max(np.min(np.abs(B[:, None] - A[None, :]), axis=1))
    return max(dA, dB)


def endpoint_oracle(a, b, op, k=None):
    """Interval result by enumerating endpoint combinations."""
    if op == "add":
        vals = [x + y for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
    elif op == "sub":
        vals = [x - y for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
    else:
        vals = [k * a.lo, k * a.hi]
    return min(vals), max(vals)
