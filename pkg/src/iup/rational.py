"""Exact scalar arithmetic: rationals plus infinite-bound sentinels.

All geometric quantities in this package are `fractions.Fraction` values.
Interval bounds may additionally be one of the two float sentinels
``float('-inf')`` / ``float('+inf')`` (half-space inputs); these are the only
floats ever mixed with rationals, and every comparison or max/min between a
Fraction and an infinity behaves correctly.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

NEG_INF = float("-inf")
POS_INF = float("inf")

# A bound is an exact rational or one of the two infinity sentinels.
Bound = Union[Fraction, float]


def rat(value) -> Fraction:
    """Coerce ints, Fractions and strings like "43/100" or "0.43" to Fraction.

    Decimal strings are exact by construction (Fraction("0.43") == 43/100).
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        raise TypeError(f"refusing inexact float {value!r}; pass a string or Fraction")
    raise TypeError(f"cannot interpret {value!r} as a rational")


def is_finite(v: Bound) -> bool:
    return isinstance(v, Fraction)


def bound(value) -> Bound:
    """Like rat() but also accepts the sentinels and "-inf"/"+inf" strings."""
    if isinstance(value, float):
        if value == NEG_INF or value == POS_INF:
            return value
        raise TypeError(f"refusing inexact float {value!r}")
    if isinstance(value, str):
        s = value.strip()
        if s in ("-inf", "-Inf"):
            return NEG_INF
        if s in ("+inf", "inf", "+Inf"):
            return POS_INF
        return Fraction(s)
    return rat(value)


def bound_str(v: Bound) -> str:
    """Serialize a bound: "p/q" (denominator omitted when 1) or "-inf"/"+inf"."""
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"{v.numerator}/{v.denominator}"
    return "-inf" if v == NEG_INF else "+inf"


def rat_str(v: Fraction) -> str:
    if not isinstance(v, Fraction):
        raise TypeError(f"expected Fraction, got {v!r}")
    return bound_str(v)
