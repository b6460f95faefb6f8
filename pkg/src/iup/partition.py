"""Symbolic partition of the unit cube for the coupled-map family.

The map is affine wherever the rounded values of all contiguous coordinate
sums x_i + ... + x_j are constant, so atoms are labelled by the vector of
those rounded values. Every a-priori label is turned into a candidate
constraint matrix and kept iff the tightened matrix is nonempty.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Sequence

from .geometry import (
    CoefficientMatrix,
    ConstraintMatrix,
    build_coefficient_matrix,
    constraint_matrix,
    convert_constraints,
    optimize,
)
from .rational import rat


class OnBoundary(Exception):
    """The point lies on a discontinuity plane of the partition."""


def sum_ranges(d: int) -> list[tuple[int, int]]:
    """(i, j) index pairs of the contiguous sums, shortest first: all single
    coordinates, then length-2 sums, and so on (1-based inclusive, as digits
    of the labels)."""
    return sorted(
        ((i, j) for i in range(1, d + 1) for j in range(i, d + 1)),
        key=lambda p: (p[1] - p[0], p[0]),
    )


def canonical_alpha(d: int) -> CoefficientMatrix:
    """Coefficient matrix with one row per contiguous sum (d(d+1)/2 rows)."""
    rows = []
    for i, j in sum_ranges(d):
        rows.append([1 if i <= k + 1 <= j else 0 for k in range(d)])
    return build_coefficient_matrix(rows)


def half_offset(h: int) -> tuple[Fraction, Fraction]:
    return Fraction(h) - Fraction(1, 2), Fraction(h) + Fraction(1, 2)


def enumerate_atoms(d: int) -> list[tuple[str, ConstraintMatrix]]:
    """All nonempty atoms on the canonical coefficient matrix, in label order.

    For each candidate label the bounds are clipped to the cube:
    lower = max(0, h - 1/2), upper = min(h + 1/2, j - i + 1).
    """
    alpha = canonical_alpha(d)
    ranges = sum_ranges(d)
    out: list[tuple[str, ConstraintMatrix]] = []
    for hs in itertools.product(*(range(0, j - i + 2) for i, j in ranges)):
        pairs = []
        for h, (i, j) in zip(hs, ranges):
            lo = max(Fraction(0), Fraction(h) - Fraction(1, 2))
            hi = min(Fraction(h) + Fraction(1, 2), Fraction(j - i + 1))
            pairs.append((lo, hi))
        m = optimize(constraint_matrix(alpha, pairs))
        if not m.has_crossing():
            out.append(("".join(str(h) for h in hs), m))
    return out


def label_of_h(hs: Sequence[int]) -> str:
    return "".join(str(h) for h in hs)


def h_values(x: Sequence, d: int) -> list[int]:
    """Rounded contiguous sums of an exact point; OnBoundary at half-integers."""
    xs = [rat(v) for v in x]
    out = []
    for i, j in sum_ranges(d):
        s = sum(xs[i - 1 : j], Fraction(0))
        if (s - Fraction(1, 2)).denominator == 1:
            raise OnBoundary(f"sum x_{i}..x_{j} = {s} lies on a discontinuity")
        out.append((s + Fraction(1, 2)).__floor__())
    return out


def locate(atoms: dict[str, ConstraintMatrix] | list[tuple[str, ConstraintMatrix]], x) -> str:
    """Label of the unique atom containing an interior point."""
    table = dict(atoms) if not isinstance(atoms, dict) else atoms
    d = next(iter(table.values())).alpha.d
    label = label_of_h(h_values(x, d))
    if label not in table:
        raise OnBoundary(f"point {x!r} is outside the partition (label {label})")
    return label


def atoms_on(alpha: CoefficientMatrix, d: int) -> list[tuple[str, ConstraintMatrix]]:
    """Atoms re-expressed on a coefficient matrix that contains (projective
    copies of) all contiguous-sum rows; extra rows get derived bounds."""
    canon = canonical_alpha(d)
    for row in canon.rows:
        if alpha.find_row(row) is None:
            raise ValueError("coefficient matrix is missing a contiguous-sum row")
    if alpha == canon:
        return enumerate_atoms(d)
    return [(lab, convert_constraints(m, alpha)) for lab, m in enumerate_atoms(d)]


def atoms_to_json(atoms: list[tuple[str, ConstraintMatrix]]) -> list[dict]:
    return [{"label": lab, **m.to_json()} for lab, m in atoms]
