"""Closed bounded real intervals and the LU order relations on them."""

from __future__ import annotations

import math


class Interval:
    """A closed bounded interval ``[lo, hi]`` with finite endpoints.

    Instances are immutable. Equality is exact endpoint equality, so the
    algebraic laws of interval addition and scaling hold without tolerances.
    """

    __slots__ = ("_lo", "_hi")

    def __init__(self, lo: float, hi: float | None = None) -> None:
        lo = float(lo)
        hi = lo if hi is None else float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"interval endpoints must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise ValueError(f"lower endpoint exceeds upper endpoint: [{lo}, {hi}]")
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    @property
    def lo(self) -> float:
        return self._lo

    @property
    def hi(self) -> float:
        return self._hi

    @property
    def width(self) -> float:
        return self._hi - self._lo

    def is_degenerate(self) -> bool:
        return self._lo == self._hi

    def __iter__(self):
        yield self._lo
        yield self._hi

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Interval):
            return NotImplemented
        return self._lo == other._lo and self._hi == other._hi

    def __hash__(self) -> int:
        return hash((self._lo, self._hi))

    def __repr__(self) -> str:
        return f"Interval({self._lo!r}, {self._hi!r})"

    def __str__(self) -> str:
        return f"[{self._lo:.12g}, {self._hi:.12g}]"

    def __add__(self, other: Interval) -> Interval:
        if not isinstance(other, Interval):
            return NotImplemented
        return add(self, other)

    def __sub__(self, other: Interval) -> Interval:
        if not isinstance(other, Interval):
            return NotImplemented
        return sub(self, other)

    def __rmul__(self, k: float) -> Interval:
        return scale(k, self)

    def __neg__(self) -> Interval:
        return scale(-1.0, self)


ZERO = Interval(0.0, 0.0)


def add(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo + b.lo, a.hi + b.hi)


def sub(a: Interval, b: Interval) -> Interval:
    """Minkowski difference ``{x - y : x in a, y in b}``.

    Note that ``sub(a, a)`` is not zero unless ``a`` is degenerate.
    """
    return Interval(a.lo - b.hi, a.hi - b.lo)


def scale(k: float, a: Interval) -> Interval:
    k = float(k)
    if k >= 0:
        return Interval(k * a.lo, k * a.hi)
    return Interval(k * a.hi, k * a.lo)


def hausdorff(a: Interval, b: Interval) -> float:
    """Hausdorff distance between two intervals (closed form)."""
    return max(abs(a.lo - b.lo), abs(a.hi - b.hi))


def le_lu(a: Interval, b: Interval) -> bool:
    return a.lo <= b.lo and a.hi <= b.hi


def lt_lu(a: Interval, b: Interval) -> bool:
    """``a`` precedes ``b`` in the LU order and differs from it."""
    return a.lo <= b.lo and a.hi <= b.hi and (a.lo != b.lo or a.hi != b.hi)


def lt_strict_lu(a: Interval, b: Interval) -> bool:
    return a.lo < b.lo and a.hi < b.hi
