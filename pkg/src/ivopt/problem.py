"""Interval-valued programs, tolerance intervals and sample sets.

A :class:`Problem` is ``min [fL(x), fU(x)]`` subject to ``g_j(x) <= 0``. A
:class:`SampleSet` is the finite stand-in for the feasible region used by
every brute-force check; every certificate records the descriptor of the
set it was checked against.
"""

from __future__ import annotations

import csv
import itertools
import math
import os
import re
import warnings
from dataclasses import dataclass

import numpy as np

from . import expr as E
from .errors import (
    DimensionMismatch,
    EpsilonError,
    InfeasiblePoint,
    LowerExceedsUpper,
    NonSmoothAtPoint,
    ParseError,
)
from .interval import Interval
from .parser import parse_expr

FEAS_TOL = 1e-8
ACTIVE_TOL = 1e-6
MFCQ_TOL = 1e-6


@dataclass(frozen=True)
class Epsilon:
    """Tolerance interval ``[lo, hi]`` with ``0 <= lo <= hi``.

    ``vec`` is the tolerance of the biobjective reduction and lists the
    upper endpoint first: ``vec == (hi, lo)``.
    """

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise EpsilonError(f"tolerance endpoints must be finite, got [{lo}, {hi}]")
        if lo < 0 or lo > hi:
            raise EpsilonError(f"tolerance must satisfy 0 <= lo <= hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def parse(cls, text: str) -> Epsilon:
        parts = [s.strip() for s in text.split(",")]
        if len(parts) != 2:
            raise EpsilonError(f"expected LO,HI, got {text!r}")
        try:
            return cls(float(parts[0]), float(parts[1]))
        except ValueError:
            raise EpsilonError(f"expected LO,HI, got {text!r}") from None

    @property
    def interval(self) -> Interval:
        return Interval(self.lo, self.hi)

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.hi, self.lo])

    @property
    def is_zero(self) -> bool:
        return self.hi == 0.0

    @property
    def positive(self) -> bool:
        """``0`` strictly precedes the interval in the LU order."""
        return self.hi > 0.0

    @property
    def strictly_positive(self) -> bool:
        """Both endpoints are positive."""
        return self.lo > 0.0

    def __str__(self):
        return f"[{self.lo:.12g}, {self.hi:.12g}]"


ZERO_EPS = Epsilon(0.0, 0.0)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """A finite, ordered set of points; order is the scan order of every check."""

    points: np.ndarray
    descriptor: str

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2:
            raise DimensionMismatch(f"sample points must form a 2-D array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("sample points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self):
        return iter(self.points)

    @classmethod
    def grid(cls, lo, hi, steps: int, n: int | None = None) -> SampleSet:
        """Tensor grid with ``steps`` points per axis, in ``itertools.product`` order."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        n = n or max(lo.size, hi.size)
        lo = np.broadcast_to(lo, (n,))
        hi = np.broadcast_to(hi, (n,))
        steps = int(steps)
        if steps < 1:
            raise ValueError("steps must be at least 1")
        if np.any(lo > hi):
            raise ValueError("grid lower bound exceeds upper bound")
        axes = [np.linspace(a, b, steps) if steps > 1 else np.array([a]) for a, b in zip(lo, hi)]
        pts = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, n)
        bounds = " x ".join(f"[{a:.12g}, {b:.12g}]" for a, b in zip(lo, hi))
        return cls(pts, f"grid {bounds}, {steps} per axis, {len(pts)} points")

    @classmethod
    def from_points(cls, points, descriptor: str | None = None) -> SampleSet:
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        return cls(pts, descriptor or f"explicit list of {len(pts)} points")

    @classmethod
    def random(cls, lo, hi, count: int, n: int, seed: int) -> SampleSet:
        rng = np.random.default_rng(seed)
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,))
        pts = lo + (hi - lo) * rng.random((int(count), n))
        return cls(pts, f"uniform random in {lo.tolist()}..{hi.tolist()}, {count} points, seed {seed}")

    @classmethod
    def from_file(cls, path: str, n: int | None = None) -> SampleSet:
        """Read a CSV of points, one per row; a non-numeric first row is a header."""
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    if i == 0:
                        continue
                    raise ValueError(f"{path}:{i + 1}: non-numeric sample row {row!r}") from None
        pts = np.array(rows, dtype=float)
        if n is not None:
            pts = pts.reshape(-1, n) if pts.size else np.zeros((0, n))
        return cls(pts, f"file {os.path.basename(path)}, {len(pts)} points")

    def union(self, other: SampleSet) -> SampleSet:
        if other.n != self.n:
            raise DimensionMismatch("sample sets of different dimension")
        return SampleSet(np.vstack([self.points, other.points]), f"{self.descriptor} + {other.descriptor}")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)


@dataclass(frozen=True, eq=False)
class Problem:
    n: int
    fL: E.Expr
    fU: E.Expr
    g: tuple[E.Expr, ...] = ()
    name: str = "problem"

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(self.g))
        for label, f in [("lower objective", self.fL), ("upper objective", self.fU)] + [
            (f"constraint {j + 1}", gj) for j, gj in enumerate(self.g)
        ]:
            if f.n != self.n:
                raise DimensionMismatch(f"{label} has dimension {f.n}, problem has {self.n}")

    @property
    def m(self) -> int:
        return len(self.g)

    def convexity(self) -> dict[str, E.ConvexCert]:
        out = {"fL": E.certify_convexity(self.fL), "fU": E.certify_convexity(self.fU)}
        for j, gj in enumerate(self.g):
            out[f"g{j + 1}"] = E.certify_convexity(gj)
        return out

    @property
    def convex(self) -> bool:
        return all(c.convex for c in self.convexity().values())

    def validate_order(self, samples: SampleSet | None) -> None:
        """Check ``fL <= fU`` on ``samples``; warn when there is nothing to check."""
        if samples is None or len(samples) == 0:
            warnings.warn(
                f"{self.name}: fL <= fU is assumed, not checked (no sample set)", stacklevel=2
            )
            return
        FL, FU = objective_values(self, samples.points)
        bad = np.flatnonzero(FL > FU)
        if bad.size:
            i = bad[0]
            raise LowerExceedsUpper(samples.points[i], float(FL[i]), float(FU[i]))


def objective_values(p: Problem, X) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float).reshape(-1, p.n)
    return E.evaluate_many(p.fL, X), E.evaluate_many(p.fU, X)


def constraint_values(p: Problem, X) -> np.ndarray:
    """``(N, m)`` array of constraint values."""
    X = np.asarray(X, dtype=float).reshape(-1, p.n)
    if not p.g:
        return np.zeros((X.shape[0], 0))
    return np.stack([E.evaluate_many(gj, X) for gj in p.g], axis=1)


def feasible_mask(p: Problem, X, tol: float = FEAS_TOL) -> np.ndarray:
    G = constraint_values(p, X)
    return np.all(G <= tol, axis=1)


def feasible(p: Problem, x, tol: float = FEAS_TOL) -> bool:
    return all(E.evaluate(gj, x) <= tol for gj in p.g)


def interval_value(p: Problem, x) -> Interval:
    lo, hi = E.evaluate(p.fL, x), E.evaluate(p.fU, x)
    if lo > hi:
        raise LowerExceedsUpper(np.atleast_1d(x), lo, hi)
    return Interval(lo, hi)


def biobjective(p: Problem):
    """The map ``x -> (fL(x), fU(x))``."""

    def F(x) -> np.ndarray:
        return np.array([E.evaluate(p.fL, x), E.evaluate(p.fU, x)])

    return F


def active_set(p: Problem, x_star, tol: float = ACTIVE_TOL) -> tuple[int, ...]:
    """0-based indices of constraints with ``|g_j(x*)| <= tol``."""
    vals = [E.evaluate(gj, x_star) for gj in p.g]
    if any(v > tol for v in vals):
        raise InfeasiblePoint(f"point {np.atleast_1d(x_star).tolist()} is infeasible")
    return tuple(j for j, v in enumerate(vals) if abs(v) <= tol)


def _max_constraint(p: Problem, x) -> tuple[float, int]:
    vals = [E.evaluate(gj, x) for gj in p.g]
    j = int(np.argmax(vals))
    return vals[j], j


def check_slater(p: Problem, seed: int = 0, starts: int = 8, budget: int = 2000) -> np.ndarray | None:
    """Search for a strictly feasible point by minimizing ``max_j g_j``.

    Normalized subgradient steps from several seeded starts. Returns None when
    no strictly feasible point was found; that answer is inconclusive.
    """
    if not p.g:
        return np.zeros(p.n)
    rng = np.random.default_rng(seed)
    inits = [np.zeros(p.n)] + [rng.normal(scale=s, size=p.n) for s in np.geomspace(0.5, 20, starts - 1)]
    for x in inits:
        x = x.copy()
        for k in range(1, budget + 1):
            h, j = _max_constraint(p, x)
            if h < 0:
                return x
            s = E.subgradient(p.g[j], x)
            ns = np.linalg.norm(s)
            if ns == 0:
                break
            x = x - (1.0 / math.sqrt(k)) * s / ns
    return None


@dataclass(frozen=True)
class MfcqResult:
    holds: bool
    r: float
    lam: np.ndarray
    active: tuple[int, ...]


def _project_simplex(y: np.ndarray) -> np.ndarray:
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, y.size + 1)
    rho = np.flatnonzero(u - css / idx > 0)[-1]
    return np.maximum(y - css[rho] / (rho + 1.0), 0.0)


def min_norm_in_hull(G: np.ndarray, iters: int = 5000) -> np.ndarray:
    """Simplex weights ``lam`` minimizing ``||G lam||`` (columns of ``G`` are points).

    Accelerated projected gradient, then an exact solve on the detected support.
    """
    k = G.shape[1]
    H = G.T @ G
    L = max(np.linalg.eigvalsh(H).max(), 1e-12)
    lam = np.full(k, 1.0 / k)
    y, t = lam.copy(), 1.0
    for _ in range(iters):
        nxt = _project_simplex(y - (H @ y) / L)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = nxt + ((t - 1.0) / t_next) * (nxt - lam)
        lam, t = nxt, t_next
    support = np.flatnonzero(lam > 1e-8)
    if support.size:
        K = np.zeros((support.size + 1, support.size + 1))
        K[:-1, :-1] = H[np.ix_(support, support)]
        K[:-1, -1] = 1.0
        K[-1, :-1] = 1.0
        rhs = np.zeros(support.size + 1)
        rhs[-1] = 1.0
        sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        cand = np.zeros(k)
        cand[support] = sol[:-1]
        if np.all(cand >= 0) and np.linalg.norm(G @ cand) <= np.linalg.norm(G @ lam):
            lam = cand
    return lam


def check_mfcq(p: Problem, x_star, tol_mfcq: float = MFCQ_TOL, active_tol: float = ACTIVE_TOL) -> MfcqResult:
    """MFCQ at ``x*``: no simplex combination of active gradients vanishes."""
    J = active_set(p, x_star, active_tol)
    if not J:
        return MfcqResult(True, math.inf, np.zeros(0), J)
    for j in J:
        if not E.is_smooth_at(p.g[j], x_star):
            raise NonSmoothAtPoint(f"constraint g{j + 1} is not differentiable at x*")
    G = np.column_stack([E.subgradient(p.g[j], x_star) for j in J])
    lam = min_norm_in_hull(G)
    r = float(np.linalg.norm(G @ lam))
    return MfcqResult(r > tol_mfcq, r, lam, J)


# ---------------------------------------------------------------------------
# Problem files


@dataclass(frozen=True)
class ProblemFile:
    problem: Problem
    epsilon: Epsilon | None = None
    samples: SampleSet | None = None
    path: str | None = None


_SECTIONS = ("problem", "objective", "constraints", "epsilon", "samples")
_RANGE = re.compile(r"^\s*([^.…\s][^…]*?)\s*(?:\.\.|…)\s*(\S+)\s*$")


def _split_items(text: str, line: int, source: str | None):
    """Split on commas outside quotes and parentheses; yields (item, col)."""
    depth, quote, start = 0, False, 0
    for i, ch in enumerate(text + ","):
        if ch == '"':
            quote = not quote
        elif quote:
            continue
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ParseError("unbalanced ')'", line, i + 1, source)
        elif ch == "," and depth == 0:
            item = text[start:i]
            if item.strip():
                yield item.strip(), start + (len(item) - len(item.lstrip())) + 1
            start = i + 1
    if quote:
        raise ParseError("unterminated string", line, len(text) + 1, source)
    if depth:
        raise ParseError("unbalanced '('", line, len(text) + 1, source)


def _strip_comment(text: str) -> str:
    quote = False
    for i, ch in enumerate(text):
        if ch == '"':
            quote = not quote
        elif ch == "#" and not quote:
            return text[:i]
    return text


def _number(text: str, line: int, col: int, source: str | None) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"expected a number, found {text!r}", line, col, source) from None


def _sample_call(item: str, n: int, line: int, col: int, source: str | None, base_dir: str) -> SampleSet:
    m = re.fullmatch(r"(\w+)\s*\((.*)\)", item, re.S)
    if not m:
        raise ParseError(f"expected grid(...), random(...) or file(...), found {item!r}", line, col, source)
    kind, body = m.group(1), m.group(2)
    args = [a.strip() for a in body.split(",")]
    arg_col = col + item.index("(") + 1
    if kind == "file":
        path = body.strip().strip('"')
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        try:
            return SampleSet.from_file(path, n)
        except (OSError, ValueError) as exc:
            raise ParseError(f"cannot read samples: {exc}", line, arg_col, source) from None
    if kind not in ("grid", "random"):
        raise ParseError(f"unknown sample generator {kind!r}", line, col, source)
    ranges = []
    rest = []
    for a in args:
        r = _RANGE.match(a)
        if r:
            ranges.append((_number(r.group(1), line, arg_col, source), _number(r.group(2), line, arg_col, source)))
        else:
            rest.append(a)
    if len(ranges) not in (1, n):
        raise ParseError(f"expected 1 or {n} ranges lo..hi, found {len(ranges)}", line, arg_col, source)
    if len(ranges) == 1:
        ranges = ranges * n
    lo = np.array([r[0] for r in ranges])
    hi = np.array([r[1] for r in ranges])
    try:
        if kind == "grid":
            if len(rest) != 1:
                raise ParseError("grid needs exactly one step count", line, arg_col, source)
            return SampleSet.grid(lo, hi, int(_number(rest[0], line, arg_col, source)), n)
        if len(rest) != 2:
            raise ParseError("random needs a count and a seed", line, arg_col, source)
        count, seed = (int(_number(r, line, arg_col, source)) for r in rest)
        return SampleSet.random(lo, hi, count, n, seed)
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc), line, arg_col, source) from None


def parse_problem_text(text: str, source: str | None = None, base_dir: str = ".") -> ProblemFile:
    section = None
    raw: dict[str, list] = {s: [] for s in _SECTIONS}
    seen = set()
    for lineno, full in enumerate(text.splitlines(), start=1):
        body = _strip_comment(full)
        if not body.strip():
            continue
        head = re.fullmatch(r"\s*\[\s*(\w+)\s*\]\s*", body)
        if head:
            section = head.group(1)
            if section not in _SECTIONS:
                raise ParseError(f"unknown section [{section}]", lineno, body.index("[") + 1, source)
            if section in seen:
                raise ParseError(f"duplicate section [{section}]", lineno, body.index("[") + 1, source)
            seen.add(section)
            continue
        if section is None:
            raise ParseError("content before the first section header", lineno, 1, source)
        for item, col in _split_items(body, lineno, source):
            raw[section].append((item, lineno, col))

    def keyvals(sec: str) -> dict[str, tuple[str, int, int, bool]]:
        out = {}
        for item, line, col in raw[sec]:
            m = re.fullmatch(r"(\w+)\s*=\s*(.*)", item, re.S)
            if not m:
                raise ParseError(f"expected key = value, found {item!r}", line, col, source)
            key, val = m.group(1), m.group(2).strip()
            vcol = col + item.index(m.group(2))
            quoted = len(val) >= 2 and val[0] == val[-1] == '"'
            if quoted:
                val, vcol = val[1:-1], vcol + 1
            if key in out:
                raise ParseError(f"duplicate key {key!r}", line, col, source)
            out[key] = (val, line, vcol, quoted)
        return out

    if "problem" not in seen:
        raise ParseError("missing [problem] section", 1, 1, source)
    head = keyvals("problem")
    for key, (_, line, vcol, _) in head.items():
        if key not in ("n", "name"):
            raise ParseError(f"unknown key {key!r} in [problem]", line, vcol, source)
    if "n" not in head:
        raise ParseError("[problem] needs n", 1, 1, source)
    n_text, nline, ncol, _ = head["n"]
    if not n_text.isdigit() or int(n_text) < 1:
        raise ParseError(f"n must be a positive integer, found {n_text!r}", nline, ncol, source)
    n = int(n_text)
    name = head.get("name", ("problem",))[0]

    def expression(val, line, col, quoted):
        if not quoted:
            raise ParseError("expressions must be quoted", line, col, source)
        return parse_expr(val, n, line, col, source)

    obj = keyvals("objective")
    for key in obj:
        if key not in ("lower", "upper"):
            raise ParseError(f"unknown key {key!r} in [objective]", obj[key][1], obj[key][2], source)
    for key in ("lower", "upper"):
        if key not in obj:
            raise ParseError(f"[objective] needs {key}", 1, 1, source)
    fL = expression(*obj["lower"])
    fU = expression(*obj["upper"])
    g = [expression(*v) for v in keyvals("constraints").values()]
    problem = Problem(n, fL, fU, tuple(g), name)

    epsilon = None
    if "epsilon" in seen:
        ev = keyvals("epsilon")
        for key in ev:
            if key not in ("lo", "hi"):
                raise ParseError(f"unknown key {key!r} in [epsilon]", ev[key][1], ev[key][2], source)
        if set(ev) != {"lo", "hi"}:
            raise ParseError("[epsilon] needs lo and hi", 1, 1, source)
        lo = _number(ev["lo"][0], ev["lo"][1], ev["lo"][2], source)
        hi = _number(ev["hi"][0], ev["hi"][1], ev["hi"][2], source)
        try:
            epsilon = Epsilon(lo, hi)
        except EpsilonError as exc:
            raise ParseError(str(exc), ev["lo"][1], ev["lo"][2], source) from None

    samples = None
    for item, line, col in raw["samples"]:
        s = _sample_call(item, n, line, col, source, base_dir)
        samples = s if samples is None else samples.union(s)

    problem.validate_order(samples)
    return ProblemFile(problem, epsilon, samples, source)


def load_problem(path: str) -> ProblemFile:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_problem_text(text, source=path, base_dir=os.path.dirname(os.path.abspath(path)))
