"""Approximate solutions of interval-valued optimization problems.

Interval arithmetic and LU orders, sample-relative certification of the six
solution kinds, constructive existence procedures, epsilon-subdifferential
KKT systems and weighted-sum scalarization.
"""

from .certify import Certificate, SolutionKind, certify_on_set, certify_via_biobjective, violates
from .expr import certify_convexity, conjugate, eps_subdiff_contains, evaluate, subgradient
from .interval import Interval, add, hausdorff, le_lu, lt_lu, lt_strict_lu, scale, sub
from .parser import parse_expr
from .problem import Epsilon, Problem, SampleSet, load_problem

__version__ = "0.1.0"

__all__ = [
    "Certificate",
    "Epsilon",
    "Interval",
    "Problem",
    "SampleSet",
    "SolutionKind",
    "add",
    "certify_convexity",
    "certify_on_set",
    "certify_via_biobjective",
    "conjugate",
    "eps_subdiff_contains",
    "evaluate",
    "hausdorff",
    "le_lu",
    "load_problem",
    "lt_lu",
    "lt_strict_lu",
    "parse_expr",
    "scale",
    "sub",
    "subgradient",
    "violates",
]
