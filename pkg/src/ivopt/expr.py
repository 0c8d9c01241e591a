"""Scalar expression trees for objectives and constraints.

Every function of the problem (lower and upper objective, constraints) is an
:class:`Expr`. The node set is split in two fragments:

* a convex-certifiable fragment: :class:`Constant`, :class:`Affine`,
  :class:`Quadratic` (``0.5 x'Qx + b'x + c``), :class:`SquareOfAffine`,
  :class:`Norm2OfAffineMap`, :class:`MaxOf`, :class:`NonnegCombination`;
* a general arithmetic fragment: :class:`Negate`, :class:`Product`,
  :class:`Power`.

The builder functions (:func:`add`, :func:`mul`, :func:`power`, ...) fold
every polynomial part of degree at most two into a single quadratic atom, so
``x1^2 + 2*x1*x2 - 3`` becomes one :class:`Quadratic` and can be certified by
an eigenvalue test.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import (
    ConjugateUnavailable,
    DimensionMismatch,
    NonConvexError,
    PreconditionError,
    UnsupportedAtomForMembership,
)

TOL_MEMBERSHIP = 1e-9
# relative eigenvalue threshold for PSD / PD classification
EIG_TOL = 1e-10
# relative tolerance for "v - b lies in range(Q)" and similar domain tests
DOMAIN_TOL = 1e-9
MAX_AFFINE_PIECES = 8


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _as_point(x, n: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (n,):
        raise DimensionMismatch(f"expected a point of dimension {n}, got shape {arr.shape}")
    return arr


def _as_batch(X, n: int) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1 and n == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise DimensionMismatch(f"expected points of dimension {n}, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# Certificates and conjugates


class CertStatus(enum.Enum):
    CERTIFIED_CONVEX = "certified-convex"
    CERTIFIED_STRICTLY_CONVEX = "certified-strictly-convex"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ConvexCert:
    status: CertStatus
    trace: tuple[str, ...] = ()

    @property
    def convex(self) -> bool:
        return self.status is not CertStatus.UNKNOWN

    @property
    def strictly_convex(self) -> bool:
        return self.status is CertStatus.CERTIFIED_STRICTLY_CONVEX


@dataclass(frozen=True)
class ConjugateForm:
    """Closed-form conjugate ``v -> sup_x <v, x> - f(x)``.

    ``kind`` names the closed form; ``fn`` returns ``math.inf`` outside the
    effective domain. The unavailable form has ``fn is None``.
    """

    kind: str
    fn: Callable[[np.ndarray], float] | None = None

    @property
    def available(self) -> bool:
        return self.fn is not None

    def __call__(self, v) -> float:
        if self.fn is None:
            raise ConjugateUnavailable("no closed-form conjugate")
        return float(self.fn(np.atleast_1d(np.asarray(v, dtype=float))))


UNAVAILABLE = ConjugateForm("unavailable")


def _psd_eig(Q: np.ndarray):
    """Eigen-decomposition with tiny eigenvalues snapped to zero."""
    d, U = np.linalg.eigh(Q)
    scale = max(1.0, float(np.max(np.abs(d)))) if d.size else 1.0
    d = np.where(np.abs(d) <= EIG_TOL * scale, 0.0, d)
    return d, U


def _quadratic_conjugate(Q: np.ndarray, b: np.ndarray, c: float) -> ConjugateForm:
    d, U = _psd_eig(Q)
    if np.any(d < 0):
        return UNAVAILABLE
    pos = d > 0

    def fn(v: np.ndarray) -> float:
        w = v - b
        z = U.T @ w
        null = z[~pos]
        if null.size and np.linalg.norm(null) > DOMAIN_TOL * (1.0 + np.linalg.norm(w)):
            return math.inf
        return float(0.5 * np.sum(z[pos] ** 2 / d[pos]) - c)

    return ConjugateForm("indicator" if not pos.any() else "quadratic", fn)


def _max_affine_conjugate(A: np.ndarray, b: np.ndarray) -> ConjugateForm:
    """Conjugate of ``max_i a_i'x + b_i``.

    Equals ``min { -sum t_i b_i : t in simplex, sum t_i a_i = v }``. The LP
    optimum sits at a vertex whose support has linearly independent columns
    of ``[a_i; 1]``, so enumerating those supports is exact.
    """
    k, n = A.shape
    M = np.vstack([A.T, np.ones(k)])
    supports = []
    for size in range(1, min(k, n + 1) + 1):
        for S in itertools.combinations(range(k), size):
            cols = M[:, S]
            if np.linalg.matrix_rank(cols) == size:
                supports.append((np.array(S), cols))

    def fn(v: np.ndarray) -> float:
        rhs = np.concatenate([v, [1.0]])
        tol = DOMAIN_TOL * (1.0 + np.linalg.norm(rhs) + np.abs(A).max())
        best = math.inf
        for S, cols in supports:
            theta, *_ = np.linalg.lstsq(cols, rhs, rcond=None)
            if np.linalg.norm(cols @ theta - rhs) > tol or np.any(theta < -tol):
                continue
            best = min(best, float(-theta @ b[S]))
        return best

    return ConjugateForm("max-affine", fn)


# ---------------------------------------------------------------------------
# Nodes


class Expr:
    """Base class of expression nodes. Nodes are immutable once built."""

    n: int

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def children(self) -> tuple[Expr, ...]:
        return ()

    def as_quadratic(self):
        """``(Q, b, c)`` when the node is a polynomial of degree <= 2, else None."""
        return None

    def _eval(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _exact(self, x):
        raise NotImplementedError

    def _grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _smooth(self, x: np.ndarray, tol: float) -> bool:
        return all(ch._smooth(x, tol) for ch in self.children())

    def _cert(self) -> ConvexCert:
        return ConvexCert(CertStatus.UNKNOWN, (f"{type(self).__name__}: no convexity rule",))

    def _conj(self) -> ConjugateForm:
        return UNAVAILABLE


@dataclass(frozen=True, eq=False)
class Quadratic(Expr):
    """``0.5 * x'Qx + b'x + c`` with symmetric ``Q``."""

    Q: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if Q.shape != (b.size, b.size):
            raise DimensionMismatch(f"Q has shape {Q.shape} but b has length {b.size}")
        object.__setattr__(self, "Q", _frozen(0.5 * (Q + Q.T)))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "c", float(self.c))

    @property
    def n(self) -> int:
        return self.b.size

    def as_quadratic(self):
        return self.Q, self.b, self.c

    def _eval(self, X):
        return 0.5 * np.einsum("ij,jk,ik->i", X, self.Q, X) + X @ self.b + self.c

    def _exact(self, x):
        n = self.n
        total = Fraction(self.c)
        for i in range(n):
            total += Fraction(self.b[i]) * x[i]
            for j in range(n):
                if self.Q[i, j] != 0:
                    total += Fraction(1, 2) * Fraction(self.Q[i, j]) * x[i] * x[j]
        return total

    def _grad(self, x):
        return self.Q @ x + self.b

    def _cert(self):
        d = np.linalg.eigvalsh(self.Q)
        scale = max(1.0, float(np.max(np.abs(d))))
        lo = float(d.min())
        if lo > EIG_TOL * scale:
            return ConvexCert(CertStatus.CERTIFIED_STRICTLY_CONVEX, (f"quadratic: positive definite (min eig {lo:.6g})",))
        if lo >= -EIG_TOL * scale:
            return ConvexCert(CertStatus.CERTIFIED_CONVEX, (f"quadratic: positive semidefinite (min eig {lo:.6g})",))
        return ConvexCert(CertStatus.UNKNOWN, (f"quadratic: indefinite (min eig {lo:.6g})",))

    def _conj(self):
        return _quadratic_conjugate(self.Q, self.b, self.c)


class Affine(Quadratic):
    """``a'x + b``; stored as a quadratic with zero curvature."""

    def __init__(self, a, b: float = 0.0):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        super().__init__(np.zeros((a.size, a.size)), a, float(b))

    @property
    def a(self) -> np.ndarray:
        return self.b

    @property
    def offset(self) -> float:
        return self.c

    def _eval(self, X):
        return X @ self.b + self.c

    def _cert(self):
        return ConvexCert(CertStatus.CERTIFIED_CONVEX, ("affine",))

    def __repr__(self):
        return f"Affine(a={self.b.tolist()}, b={self.c!r})"


class Constant(Affine):
    def __init__(self, c: float, n: int):
        super().__init__(np.zeros(n), float(c))

    @property
    def value(self) -> float:
        return self.c

    def _eval(self, X):
        return np.full(X.shape[0], self.c)

    def _exact(self, x):
        return Fraction(self.c)

    def _cert(self):
        return ConvexCert(CertStatus.CERTIFIED_CONVEX, ("constant",))

    def __repr__(self):
        return f"Constant({self.c!r}, n={self.n})"


@dataclass(frozen=True, eq=False)
class SquareOfAffine(Expr):
    """``(a'x + b)^2``."""

    a: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(np.atleast_1d(self.a)))
        object.__setattr__(self, "b", float(self.b))

    @property
    def n(self) -> int:
        return self.a.size

    def as_quadratic(self):
        a = self.a
        return 2.0 * np.outer(a, a), 2.0 * self.b * a, self.b**2

    def _eval(self, X):
        return (X @ self.a + self.b) ** 2

    def _exact(self, x):
        s = Fraction(self.b) + sum(Fraction(ai) * xi for ai, xi in zip(self.a, x))
        return s * s

    def _grad(self, x):
        return 2.0 * (self.a @ x + self.b) * self.a

    def _cert(self):
        strict = self.n == 1 and self.a[0] != 0.0
        status = CertStatus.CERTIFIED_STRICTLY_CONVEX if strict else CertStatus.CERTIFIED_CONVEX
        return ConvexCert(status, ("square of affine",))

    def _conj(self):
        return _quadratic_conjugate(*self.as_quadratic())


@dataclass(frozen=True, eq=False)
class Norm2OfAffineMap(Expr):
    """``||Ax + b||_2``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if b.size != A.shape[0]:
            raise DimensionMismatch(f"A has {A.shape[0]} rows but b has length {b.size}")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "b", _frozen(b))

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def _eval(self, X):
        return np.linalg.norm(X @ self.A.T + self.b, axis=1)

    def _exact(self, x):
        raise TypeError("norm2 has no exact rational evaluation")

    def _grad(self, x):
        y = self.A @ x + self.b
        r = np.linalg.norm(y)
        if r == 0.0:
            # centre of the dual ball
            return np.zeros(self.n)
        return self.A.T @ (y / r)

    def _smooth(self, x, tol):
        return np.linalg.norm(self.A @ x + self.b) > tol

    def _cert(self):
        return ConvexCert(CertStatus.CERTIFIED_CONVEX, ("norm of affine map",))

    def _conj(self):
        A, b = self.A, self.b
        if A.shape[0] != A.shape[1] or np.linalg.cond(A) > 1e12:
            return UNAVAILABLE

        def fn(v):
            w = np.linalg.solve(A.T, v)
            if np.linalg.norm(w) > 1.0 + DOMAIN_TOL:
                return math.inf
            return float(-w @ b)

        return ConjugateForm("norm-ball-indicator", fn)


@dataclass(frozen=True, eq=False)
class MaxOf(Expr):
    terms: tuple[Expr, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("max of an empty list")
        _check_same_dim(terms)
        object.__setattr__(self, "terms", terms)

    @property
    def n(self) -> int:
        return self.terms[0].n

    def children(self):
        return self.terms

    def _eval(self, X):
        return np.max(np.stack([t._eval(X) for t in self.terms]), axis=0)

    def _exact(self, x):
        return max(t._exact(x) for t in self.terms)

    def _grad(self, x):
        vals = [t._eval(x[None, :])[0] for t in self.terms]
        # np.argmax picks the smallest index on ties
        return self.terms[int(np.argmax(vals))]._grad(x)

    def _smooth(self, x, tol):
        vals = np.array([t._eval(x[None, :])[0] for t in self.terms])
        top = int(np.argmax(vals))
        rivals = np.delete(vals, top)
        if rivals.size and vals[top] - rivals.max() <= tol * (1.0 + abs(vals[top])):
            return False
        return self.terms[top]._smooth(x, tol)

    def _cert(self):
        certs = [certify_convexity(t) for t in self.terms]
        trace = tuple(f"max[{i}] {line}" for i, c in enumerate(certs) for line in c.trace)
        if all(c.strictly_convex for c in certs):
            return ConvexCert(CertStatus.CERTIFIED_STRICTLY_CONVEX, trace + ("max of strictly convex",))
        if all(c.convex for c in certs):
            return ConvexCert(CertStatus.CERTIFIED_CONVEX, trace + ("max of convex",))
        return ConvexCert(CertStatus.UNKNOWN, trace + ("max with uncertified piece",))

    def _conj(self):
        pieces = [t.as_quadratic() for t in self.terms]
        if len(pieces) > MAX_AFFINE_PIECES or any(p is None or np.any(p[0]) for p in pieces):
            return UNAVAILABLE
        A = np.array([p[1] for p in pieces])
        b = np.array([p[2] for p in pieces])
        return _max_affine_conjugate(A, b)


@dataclass(frozen=True, eq=False)
class NonnegCombination(Expr):
    weights: tuple[float, ...]
    terms: tuple[Expr, ...]

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        terms = tuple(self.terms)
        if len(weights) != len(terms) or not terms:
            raise ValueError("weights and terms must be non-empty and of equal length")
        if any(w < 0 or not math.isfinite(w) for w in weights):
            raise ValueError(f"combination weights must be finite and nonnegative, got {weights}")
        _check_same_dim(terms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "terms", terms)

    @property
    def n(self) -> int:
        return self.terms[0].n

    def children(self):
        return self.terms

    def as_quadratic(self):
        parts = [t.as_quadratic() for t in self.terms]
        if any(p is None for p in parts):
            return None
        return _combine_quadratics(self.weights, parts, self.n)

    def _eval(self, X):
        out = np.zeros(X.shape[0])
        for w, t in zip(self.weights, self.terms):
            out = out + w * t._eval(X)
        return out

    def _exact(self, x):
        return sum((Fraction(w) * t._exact(x) for w, t in zip(self.weights, self.terms)), Fraction(0))

    def _grad(self, x):
        out = np.zeros(self.n)
        for w, t in zip(self.weights, self.terms):
            out = out + w * t._grad(x)
        return out

    def _cert(self):
        certs = [(w, certify_convexity(t)) for w, t in zip(self.weights, self.terms)]
        trace = tuple(f"sum[{i}] w={w:g} {line}" for i, (w, c) in enumerate(certs) for line in c.trace)
        active = [c for w, c in certs if w > 0]
        if not all(c.convex for c in active):
            return ConvexCert(CertStatus.UNKNOWN, trace + ("nonnegative combination with uncertified term",))
        if any(c.strictly_convex for c in active):
            return ConvexCert(CertStatus.CERTIFIED_STRICTLY_CONVEX, trace + ("nonnegative combination, one strictly convex term",))
        return ConvexCert(CertStatus.CERTIFIED_CONVEX, trace + ("nonnegative combination of convex",))

    def _conj(self):
        quad_w, quad_parts, rest = [], [], []
        for w, t in zip(self.weights, self.terms):
            q = t.as_quadratic()
            if q is None:
                rest.append((w, t))
            else:
                quad_w.append(w)
                quad_parts.append(q)
        Q, b, c = _combine_quadratics(quad_w, quad_parts, self.n)
        if not rest:
            return _quadratic_conjugate(Q, b, c)
        if len(rest) > 1 or np.any(Q):
            return UNAVAILABLE
        w, h = rest[0]
        inner = h._conj()
        if w == 0.0 or not inner.available:
            return UNAVAILABLE

        # (w h + <b, .> + c)^*(v) = w h^*((v - b) / w) - c
        def fn(v):
            return w * inner(((v - b) / w)) - c

        return ConjugateForm(f"scaled-shifted {inner.kind}", fn)


@dataclass(frozen=True, eq=False)
class Negate(Expr):
    term: Expr

    @property
    def n(self) -> int:
        return self.term.n

    def children(self):
        return (self.term,)

    def as_quadratic(self):
        q = self.term.as_quadratic()
        if q is None:
            return None
        return -q[0], -q[1], -q[2]

    def _eval(self, X):
        return -self.term._eval(X)

    def _exact(self, x):
        return -self.term._exact(x)

    def _grad(self, x):
        return -self.term._grad(x)

    def _cert(self):
        q = self.as_quadratic()
        if q is not None:
            return Quadratic(*q)._cert()
        return ConvexCert(CertStatus.UNKNOWN, ("negation of non-affine term",))


@dataclass(frozen=True, eq=False)
class Product(Expr):
    left: Expr
    right: Expr

    def __post_init__(self):
        _check_same_dim((self.left, self.right))

    @property
    def n(self) -> int:
        return self.left.n

    def children(self):
        return (self.left, self.right)

    def _eval(self, X):
        return self.left._eval(X) * self.right._eval(X)

    def _exact(self, x):
        return self.left._exact(x) * self.right._exact(x)

    def _grad(self, x):
        u = self.left._eval(x[None, :])[0]
        v = self.right._eval(x[None, :])[0]
        return u * self.right._grad(x) + v * self.left._grad(x)


@dataclass(frozen=True, eq=False)
class Power(Expr):
    base: Expr
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"exponent must be a nonnegative integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def n(self) -> int:
        return self.base.n

    def children(self):
        return (self.base,)

    def _eval(self, X):
        return self.base._eval(X) ** self.k

    def _exact(self, x):
        return self.base._exact(x) ** self.k

    def _grad(self, x):
        u = self.base._eval(x[None, :])[0]
        return self.k * u ** (self.k - 1) * self.base._grad(x)

    def _cert(self):
        q = self.base.as_quadratic()
        if self.k % 2 == 0 and q is not None and not np.any(q[0]):
            return ConvexCert(CertStatus.CERTIFIED_CONVEX, (f"even power {self.k} of affine",))
        return ConvexCert(CertStatus.UNKNOWN, (f"power {self.k} of non-affine term",))


def _check_same_dim(terms: Sequence[Expr]) -> None:
    dims = {t.n for t in terms}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed dimensions {sorted(dims)}")


def _combine_quadratics(weights, parts, n):
    Q = np.zeros((n, n))
    b = np.zeros(n)
    c = 0.0
    for w, (Qi, bi, ci) in zip(weights, parts):
        Q = Q + w * Qi
        b = b + w * bi
        c = c + w * ci
    return Q, b, c


# ---------------------------------------------------------------------------
# Builders


def quadratic_atom(Q, b, c) -> Quadratic:
    """Smallest atom representing ``0.5 x'Qx + b'x + c``."""
    Q = np.asarray(Q, dtype=float)
    b = np.asarray(b, dtype=float)
    if not np.any(Q):
        if not np.any(b):
            return Constant(c, b.size)
        return Affine(b, c)
    return Quadratic(Q, b, c)


def fold(e: Expr) -> Expr:
    q = e.as_quadratic()
    if q is None or isinstance(e, (Quadratic, SquareOfAffine)):
        return e
    return quadratic_atom(*q)


def constant(c: float, n: int) -> Constant:
    return Constant(c, n)


def variable(i: int, n: int) -> Affine:
    """The coordinate ``x_i`` (0-based) in dimension ``n``."""
    if not 0 <= i < n:
        raise DimensionMismatch(f"variable index {i} out of range for dimension {n}")
    a = np.zeros(n)
    a[i] = 1.0
    return Affine(a, 0.0)


def _flatten(weights, terms):
    for w, t in zip(weights, terms):
        if isinstance(t, Negate):
            yield from _flatten([-w], [t.term])
        elif isinstance(t, NonnegCombination):
            yield from _flatten([w * wi for wi in t.weights], t.terms)
        else:
            yield w, t


def linear_combination(weights: Sequence[float], terms: Sequence[Expr]) -> Expr:
    """``sum_i w_i t_i`` for arbitrary real weights, folded where possible."""
    _check_same_dim(terms)
    n = terms[0].n
    quad_w, quad_parts, rest = [], [], []
    for w, t in _flatten(weights, terms):
        q = t.as_quadratic()
        if q is not None:
            quad_w.append(w)
            quad_parts.append(q)
        elif w != 0.0:
            rest.append((w, t))
    folded = quadratic_atom(*_combine_quadratics(quad_w, quad_parts, n))
    if not rest:
        if len(quad_parts) == 1 and quad_w[0] == 1.0 and isinstance(terms[0], SquareOfAffine):
            return terms[0]
        return folded
    out_w, out_t = [], []
    if not (isinstance(folded, Constant) and folded.c == 0.0):
        out_w.append(1.0)
        out_t.append(folded)
    for w, t in rest:
        out_w.append(abs(w))
        out_t.append(t if w > 0 else Negate(t))
    if len(out_t) == 1 and out_w[0] == 1.0:
        return out_t[0]
    return NonnegCombination(tuple(out_w), tuple(out_t))


def add(*terms: Expr) -> Expr:
    return linear_combination([1.0] * len(terms), terms)


def sub(a: Expr, b: Expr) -> Expr:
    return linear_combination([1.0, -1.0], [a, b])


def neg(a: Expr) -> Expr:
    return linear_combination([-1.0], [a])


def scaled(k: float, a: Expr) -> Expr:
    return linear_combination([float(k)], [a])


def mul(a: Expr, b: Expr) -> Expr:
    _check_same_dim((a, b))
    qa, qb = a.as_quadratic(), b.as_quadratic()
    if qa is not None and not np.any(qa[0]) and not np.any(qa[1]):
        return scaled(qa[2], b)
    if qb is not None and not np.any(qb[0]) and not np.any(qb[1]):
        return scaled(qb[2], a)
    if qa is not None and qb is not None and not np.any(qa[0]) and not np.any(qb[0]):
        a1, c1 = qa[1], qa[2]
        a2, c2 = qb[1], qb[2]
        Q = np.outer(a1, a2) + np.outer(a2, a1)
        return quadratic_atom(Q, c2 * a1 + c1 * a2, c1 * c2)
    return Product(a, b)


def power(e: Expr, k: int) -> Expr:
    if int(k) != k or k < 0:
        raise ValueError(f"exponent must be a nonnegative integer, got {k}")
    k = int(k)
    if k == 0:
        return Constant(1.0, e.n)
    if k == 1:
        return e
    q = e.as_quadratic()
    if q is not None and not np.any(q[0]):
        if not np.any(q[1]):
            return Constant(q[2] ** k, e.n)
        if k == 2:
            return SquareOfAffine(q[1], q[2])
    return Power(e, k)


def square(e: Expr) -> Expr:
    return power(e, 2)


def maximum(terms: Sequence[Expr]) -> Expr:
    flat: list[Expr] = []
    for t in terms:
        flat.extend(t.terms if isinstance(t, MaxOf) else [t])
    if len(flat) == 1:
        return flat[0]
    return MaxOf(tuple(flat))


def norm2(terms: Sequence[Expr]) -> Norm2OfAffineMap:
    """``||(t_1, ..., t_k)||_2`` for affine arguments."""
    rows, offsets = [], []
    for t in terms:
        q = t.as_quadratic()
        if q is None or np.any(q[0]):
            raise ValueError("norm2 arguments must be affine")
        rows.append(q[1])
        offsets.append(q[2])
    return Norm2OfAffineMap(np.array(rows), np.array(offsets))


def absval(e: Expr) -> Expr:
    q = e.as_quadratic()
    if q is not None and not np.any(q[0]):
        return Norm2OfAffineMap(q[1][None, :], np.array([q[2]]))
    return maximum([e, neg(e)])


# ---------------------------------------------------------------------------
# Public operations


def evaluate(f: Expr, x, exact: bool = False):
    """Value of ``f`` at a single point.

    With ``exact=True`` the point and all coefficients are converted to
    :class:`fractions.Fraction` and the result is an exact rational (not
    available for trees containing a norm).
    """
    if exact:
        xs = [Fraction(v) for v in (x if np.ndim(x) else [x])]
        if len(xs) != f.n:
            raise DimensionMismatch(f"expected a point of dimension {f.n}, got {len(xs)}")
        return f._exact(xs)
    xp = _as_point(x, f.n)
    return float(f._eval(xp[None, :])[0])


def evaluate_many(f: Expr, X) -> np.ndarray:
    return f._eval(_as_batch(X, f.n))


def subgradient(f: Expr, x) -> np.ndarray:
    """A subgradient of ``f`` at ``x`` (the gradient where ``f`` is smooth).

    Kinks are resolved deterministically: the lowest-index active piece of a
    max, and the zero vector for a norm at its centre.
    """
    return np.asarray(f._grad(_as_point(x, f.n)), dtype=float)


def is_smooth_at(f: Expr, x, tol: float = 1e-12) -> bool:
    return f._smooth(_as_point(x, f.n), tol)


def certify_convexity(f: Expr) -> ConvexCert:
    return f._cert()


def conjugate(f: Expr) -> ConjugateForm:
    return f._conj()


def _require_convex_conjugate(f: Expr) -> ConjugateForm:
    if not certify_convexity(f).convex:
        raise NonConvexError("expression is not certified convex")
    conj = conjugate(f)
    if not conj.available:
        raise ConjugateUnavailable(
            "no closed-form conjugate; use eps_subdiff_refute with sample points instead"
        )
    return conj


def fenchel_gap(f: Expr, x_star, v) -> float:
    """``f(x*) + f*(v) - <v, x*>``, nonnegative by Fenchel-Young."""
    conj = _require_convex_conjugate(f)
    x_star = _as_point(x_star, f.n)
    v = _as_point(v, f.n)
    fv = conj(v)
    if math.isinf(fv):
        return math.inf
    return evaluate(f, x_star) + fv - float(v @ x_star)


def eps_subdiff_contains(f: Expr, x_star, v, eps: float, tol: float = TOL_MEMBERSHIP) -> bool:
    """Whether ``v`` lies in the ``eps``-subdifferential of ``f`` at ``x_star``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return fenchel_gap(f, x_star, v) <= eps + tol


def scaled_eps_subdiff_contains(f: Expr, x_star, v, eps: float, mu: float, tol: float = TOL_MEMBERSHIP) -> bool:
    """Membership of ``v`` in the ``eps``-subdifferential of ``mu * f``."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    v = np.asarray(v, dtype=float)
    return eps_subdiff_contains(f, x_star, v / mu, eps / mu, tol)


def eps_subdiff_refute(f: Expr, x_star, v, eps: float, points, tol: float = TOL_MEMBERSHIP):
    """Sampled fallback: first point where the defining inequality fails, or None.

    This can only refute membership, never prove it.
    """
    x_star = _as_point(x_star, f.n)
    v = _as_point(v, f.n)
    X = _as_batch(points, f.n)
    lhs = f._eval(X) - evaluate(f, x_star)
    rhs = (X - x_star) @ v - eps
    bad = np.flatnonzero(lhs < rhs - tol)
    return X[bad[0]].copy() if bad.size else None


# ---------------------------------------------------------------------------
# Closed-form epsilon-subdifferential sets of quadratic functions


class QuadraticSubdifferential:
    """The family ``eps -> d_eps f(x*)`` for ``f = 0.5 x'Qx + b'x + c`` with PSD ``Q``.

    Each member is the (possibly degenerate) ellipsoid
    ``{g + w : w in range(Q), 0.5 w'Q^+ w <= eps}`` with ``g = Qx* + b``.
    Affine functions give singletons.
    """

    def __init__(self, center, Q):
        self.center = np.asarray(center, dtype=float)
        self.Q = np.asarray(Q, dtype=float)
        d, U = _psd_eig(self.Q)
        if np.any(d < 0):
            raise NonConvexError("quadratic is not positive semidefinite")
        self._d = d
        self._U = U
        self._pos = d > 0

    @classmethod
    def of(cls, f: Expr, x_star) -> QuadraticSubdifferential:
        q = f.as_quadratic()
        if q is None:
            raise UnsupportedAtomForMembership(
                f"{type(f).__name__} has no closed-form epsilon-subdifferential set"
            )
        Q, b, _ = q
        x_star = _as_point(x_star, f.n)
        return cls(Q @ x_star + b, Q)

    @property
    def n(self) -> int:
        return self.center.size

    def gap(self, v) -> float:
        """Smallest ``eps`` with ``v`` in the member set (``inf`` if none)."""
        w = np.asarray(v, dtype=float) - self.center
        z = self._U.T @ w
        null = z[~self._pos]
        if null.size and np.linalg.norm(null) > DOMAIN_TOL * (1.0 + np.linalg.norm(w)):
            return math.inf
        return float(0.5 * np.sum(z[self._pos] ** 2 / self._d[self._pos]))

    def contains(self, v, eps: float, tol: float = TOL_MEMBERSHIP) -> bool:
        return self.gap(v) <= eps + tol

    def support(self, u, eps: float) -> float:
        u = np.asarray(u, dtype=float)
        return float(self.center @ u + math.sqrt(max(0.0, 2.0 * eps * float(u @ self.Q @ u))))

    def project(self, y, eps: float) -> np.ndarray:
        z = self._U.T @ (np.asarray(y, dtype=float) - self.center)
        z[~self._pos] = 0.0
        d = self._d[self._pos]
        zp = z[self._pos]
        if eps <= 0.0 or zp.size == 0:
            z[self._pos] = 0.0
            return self.center + self._U @ z

        def excess(t):
            return float(np.sum(d * zp**2 / (2.0 * (d + t) ** 2))) - eps

        if excess(0.0) > 0.0:
            hi = math.sqrt(float(np.sum(d * zp**2)) / (2.0 * eps)) + 1.0
            t = optimize.brentq(excess, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
            zp = d * zp / (d + t)
            g = float(np.sum(zp**2 / (2.0 * d)))
            if g > eps:
                zp = zp * math.sqrt(eps / g)
            z[self._pos] = zp
        return self.center + self._U @ z

    def scaled(self, mu: float) -> QuadraticSubdifferential:
        """Family of ``mu * f``; note ``d_{mu eps}(mu f) = mu d_eps f``."""
        if mu < 0:
            raise ValueError("mu must be nonnegative")
        return QuadraticSubdifferential(mu * self.center, mu * self.Q)


def subdifferential_family(f: Expr, x_star) -> QuadraticSubdifferential:
    if not certify_convexity(f).convex:
        raise NonConvexError("expression is not certified convex")
    return QuadraticSubdifferential.of(f, x_star)


# ---------------------------------------------------------------------------
# Sum rule


@dataclass(frozen=True)
class SumRuleSplit:
    eps1: float
    eps2: float
    v1: np.ndarray
    v2: np.ndarray


def _candidate_split(f1: Expr, f2: Expr, x: np.ndarray, v: np.ndarray):
    q1, q2 = f1.as_quadratic(), f2.as_quadratic()
    if q1 is not None and q2 is not None:
        F1 = QuadraticSubdifferential.of(f1, x)
        F2 = QuadraticSubdifferential.of(f2, x)
        # optimal split of an infimal convolution of quadratics: w_i = Q_i z
        H = F1.Q + F2.Q
        z = np.linalg.pinv(H) @ (v - F1.center - F2.center)
        v1 = F1.center + F1.Q @ z
        return v1, v - v1
    if q1 is not None and not np.any(q1[0]):
        v1 = subgradient(f1, x)
        return v1, v - v1
    if q2 is not None and not np.any(q2[0]):
        v2 = subgradient(f2, x)
        return v - v2, v2

    def psi(u):
        total = fenchel_gap(f1, x, u) + fenchel_gap(f2, x, v - u)
        return total if math.isfinite(total) else 1e300

    starts = [0.5 * v, subgradient(f1, x), v - subgradient(f2, x)]
    best = min(
        (optimize.minimize(psi, s, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000}) for s in starts),
        key=lambda r: r.fun,
    )
    return best.x, v - best.x


def check_sum_rule_decomposition(
    f1: Expr, f2: Expr, x, eps: float, v, resolution: float = 1e-3, tol: float = TOL_MEMBERSHIP
) -> SumRuleSplit | None:
    """Split ``v`` in ``d_eps(f1 + f2)(x)`` as ``v1 + v2`` with ``vi`` in ``d_epsi fi(x)``.

    The split of ``eps`` is searched on a grid of step ``resolution`` over
    ``[0, eps]`` and refined by bisection when the admissible range of
    ``eps1`` is narrower than the grid. Returns None when the search fails.

    Raises PreconditionError if ``v`` is not in ``d_eps(f1 + f2)(x)``.
    """
    x = _as_point(x, f1.n)
    v = _as_point(v, f1.n)
    _require_convex_conjugate(f1)
    _require_convex_conjugate(f2)
    total = add(f1, f2)
    if conjugate(total).available and not eps_subdiff_contains(total, x, v, eps, tol):
        raise PreconditionError("v is not in the eps-subdifferential of f1 + f2")

    v1, v2 = _candidate_split(f1, f2, x, v)

    def ok1(e1):
        return eps_subdiff_contains(f1, x, v1, e1, tol)

    def ok2(e1):
        return eps_subdiff_contains(f2, x, v2, max(eps - e1, 0.0), tol)

    steps = max(1, int(math.ceil(eps / resolution))) if eps > 0 else 0
    grid = [min(k * resolution, eps) for k in range(steps + 1)]
    admissible = [e1 for e1 in grid if ok1(e1) and ok2(e1)]
    # middle of the admissible range keeps both memberships away from their boundary
    chosen = admissible[len(admissible) // 2] if admissible else None
    if chosen is None and ok1(eps):
        # smallest eps1 admitting v1; membership is monotone in eps1
        lo, hi = 0.0, eps
        if ok1(lo):
            hi = lo
        for _ in range(200):
            if hi - lo <= 1e-15 * max(1.0, eps):
                break
            mid = 0.5 * (lo + hi)
            if ok1(mid):
                hi = mid
            else:
                lo = mid
        if ok2(hi):
            chosen = hi
    if chosen is None:
        return None
    return SumRuleSplit(chosen, eps - chosen, v1, v2)
