"""Exact-arithmetic kernel for constraint-matrix polytopes.

A family of open convex polytopes in R^d shares a coefficient matrix: e >= d
row directions alpha_i. One member of the family is a constraint matrix m of
per-row open intervals, and the polytope is

    P = { x : lower_i < (alpha x)_i < upper_i  for all i }.

When e > d some bounds may be slack. The tightening operator ``optimize``
replaces every bound by its active value (the inf/sup of (alpha x)_i over the
closure of P) by maximizing/minimizing over a finite precomputed catalog of
row combinations, and doubles as the emptiness test: P is empty iff some
tightened row crosses (lower_i >= upper_i).

Everything here is pure Fraction arithmetic; no floating point.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .rational import NEG_INF, POS_INF, Bound, bound, bound_str, is_finite, rat


class GeometryError(Exception):
    pass


class DimensionMismatch(GeometryError):
    pass


class DegenerateMatrix(GeometryError):
    pass


class CoefficientMismatch(GeometryError):
    pass


class EmptyPolytope(GeometryError):
    pass


class NonPositiveScale(GeometryError):
    pass


class UnboundedResult(GeometryError):
    pass


# A sparse row combination: ((k, coeff), ...) with all coeffs nonzero.
Combo = tuple[tuple[int, Fraction], ...]


def _projective_key(row: Sequence[Fraction]) -> Optional[tuple]:
    """Normalize a row up to nonzero scalar multiples (None for the zero row)."""
    for v in row:
        if v != 0:
            return tuple(x / v for x in row)
    return None


def _solve_lambda_sets(rows: tuple[tuple[Fraction, ...], ...], d: int) -> list[list[Combo]]:
    """For each row i, enumerate the sparse vectors lam (support <= d) that are
    the unique solution of sum_k lam_k * alpha_k = alpha_i on their support.

    Enumerates supports S in lexicographic order by (size, subset). For each S
    a single Gaussian elimination of the d x (|S| + e) system decides, for
    every target row at once, whether the restricted system has a unique
    solution, and produces it.
    """
    e = len(rows)
    out: list[dict[tuple, Combo]] = [dict() for _ in range(e)]
    for i in range(e):
        key = tuple([Fraction(0)] * i + [Fraction(1)] + [Fraction(0)] * (e - i - 1))
        out[i][key] = ((i, Fraction(1)),)

    for s in range(1, d + 1):
        for S in itertools.combinations(range(e), s):
            # Augmented system: columns alpha_{S}^T | all alpha_i^T.
            mat = [
                [rows[k][j] for k in S] + [rows[t][j] for t in range(e)]
                for j in range(d)
            ]
            piv_rows: list[int] = []
            r = 0
            for c in range(s):
                pr = next((rr for rr in range(r, d) if mat[rr][c] != 0), None)
                if pr is None:
                    continue
                mat[r], mat[pr] = mat[pr], mat[r]
                pv = mat[r][c]
                for rr in range(d):
                    if rr != r and mat[rr][c] != 0:
                        f = mat[rr][c] / pv
                        mat[rr] = [a - f * b for a, b in zip(mat[rr], mat[r])]
                piv_rows.append(c)
                r += 1
                if r == d:
                    break
            if r < s:
                continue  # dependent support: never a unique solution
            for t in range(e):
                col = s + t
                if any(mat[rr][col] != 0 for rr in range(r, d)):
                    continue  # inconsistent for this target
                lam = [Fraction(0)] * s
                for idx, c in enumerate(piv_rows):
                    lam[c] = mat[idx][col] / mat[idx][c]
                combo = tuple((S[j], lam[j]) for j in range(s) if lam[j] != 0)
                dense = [Fraction(0)] * e
                for k, v in combo:
                    dense[k] = v
                out[t].setdefault(tuple(dense), combo)
    return [list(m.values()) for m in out]


@dataclass(frozen=True)
class CoefficientMatrix:
    """e x d matrix of half-space directions with its precomputed row-combination
    catalogs (one finite set per row, always containing the canonical vector)."""

    rows: tuple[tuple[Fraction, ...], ...]
    d: int
    combos: tuple[tuple[Combo, ...], ...] = field(compare=False, repr=False)

    @property
    def e(self) -> int:
        return len(self.rows)

    def row_dot(self, i: int, x: Sequence[Fraction]) -> Fraction:
        return sum((c * v for c, v in zip(self.rows[i], x)), Fraction(0))

    def axis_row(self, j: int) -> Optional[int]:
        """Index of the row equal to the j-th unit vector, if present."""
        unit = tuple(Fraction(1 if k == j else 0) for k in range(self.d))
        for i, row in enumerate(self.rows):
            if row == unit:
                return i
        return None

    def find_row(self, direction: Sequence[Fraction]) -> Optional[tuple[int, Fraction]]:
        """Locate the row projectively equal to `direction`; returns (index, c)
        with direction == c * rows[index], or None."""
        key = _projective_key([rat(v) for v in direction])
        if key is None:
            return None
        for i, row in enumerate(self.rows):
            if _projective_key(row) == key:
                for a, b in zip(direction, row):
                    if b != 0:
                        return i, rat(a) / b
        return None

    def to_json(self) -> dict:
        return {"d": self.d, "rows": [[bound_str(v) for v in r] for r in self.rows]}

    @staticmethod
    def from_json(obj: dict) -> "CoefficientMatrix":
        return build_coefficient_matrix([[rat(v) for v in r] for r in obj["rows"]])


def build_coefficient_matrix(rows: Iterable[Sequence]) -> CoefficientMatrix:
    """Validate the rows and precompute the full row-combination catalogs."""
    rws = tuple(tuple(rat(v) for v in r) for r in rows)
    if not rws:
        raise DimensionMismatch("no rows")
    d = len(rws[0])
    if d < 1 or any(len(r) != d for r in rws):
        raise DimensionMismatch("rows of unequal length")
    if len(rws) < d:
        raise DegenerateMatrix(f"need at least d={d} rows, got {len(rws)}")
    seen: dict[tuple, int] = {}
    for i, r in enumerate(rws):
        key = _projective_key(r)
        if key is None:
            raise DegenerateMatrix(f"row {i} is zero")
        if key in seen:
            raise DegenerateMatrix(f"rows {seen[key]} and {i} are projectively equal")
        seen[key] = i
    combos = tuple(tuple(c) for c in _solve_lambda_sets(rws, d))
    return CoefficientMatrix(rows=rws, d=d, combos=combos)


@dataclass(frozen=True)
class ConstraintMatrix:
    """Per-row (lower, upper) bounds tied to a coefficient matrix."""

    alpha: CoefficientMatrix
    lower: tuple[Bound, ...]
    upper: tuple[Bound, ...]
    optimized: bool = field(default=False, compare=False)

    def __post_init__(self):
        if len(self.lower) != self.alpha.e or len(self.upper) != self.alpha.e:
            raise DimensionMismatch(
                f"expected {self.alpha.e} bound pairs, got {len(self.lower)}/{len(self.upper)}"
            )

    @property
    def bounds(self) -> tuple[tuple[Bound, Bound], ...]:
        return tuple(zip(self.lower, self.upper))

    def has_crossing(self) -> bool:
        return any(lo >= hi for lo, hi in zip(self.lower, self.upper))

    def all_finite(self) -> bool:
        return all(is_finite(v) for v in self.lower + self.upper)

    def entries_equal(self, other: "ConstraintMatrix") -> bool:
        return self.lower == other.lower and self.upper == other.upper

    def to_json(self) -> dict:
        return {"bounds": [[bound_str(lo), bound_str(hi)] for lo, hi in self.bounds]}

    @staticmethod
    def from_json(obj: dict, alpha: CoefficientMatrix) -> "ConstraintMatrix":
        pairs = [(bound(lo), bound(hi)) for lo, hi in obj["bounds"]]
        return constraint_matrix(alpha, pairs)

    def __str__(self) -> str:
        return json.dumps(self.to_json())


def constraint_matrix(alpha: CoefficientMatrix, pairs: Iterable[Sequence]) -> ConstraintMatrix:
    lows, highs = [], []
    for p in pairs:
        lo, hi = p
        lows.append(bound(lo))
        highs.append(bound(hi))
    return ConstraintMatrix(alpha=alpha, lower=tuple(lows), upper=tuple(highs))


def unbounded_matrix(alpha: CoefficientMatrix) -> ConstraintMatrix:
    e = alpha.e
    return ConstraintMatrix(alpha=alpha, lower=(NEG_INF,) * e, upper=(POS_INF,) * e)


def cube_matrix(alpha: CoefficientMatrix) -> ConstraintMatrix:
    """The ambient unit cube (0,1)^d expressed on alpha, with active bounds
    (row extrema over the cube are attained at corners)."""
    lows, highs = [], []
    for row in alpha.rows:
        lows.append(sum((v for v in row if v < 0), Fraction(0)))
        highs.append(sum((v for v in row if v > 0), Fraction(0)))
    return ConstraintMatrix(alpha=alpha, lower=tuple(lows), upper=tuple(highs), optimized=True)


def _combo_lower(combo: Combo, lows, highs) -> Bound:
    s = Fraction(0)
    for k, c in combo:
        b = lows[k] if c > 0 else highs[k]
        if not isinstance(b, Fraction):
            return NEG_INF
        s += c * b
    return s


def _combo_upper(combo: Combo, lows, highs) -> Bound:
    s = Fraction(0)
    for k, c in combo:
        b = highs[k] if c > 0 else lows[k]
        if not isinstance(b, Fraction):
            return POS_INF
        s += c * b
    return s


def optimize(m: ConstraintMatrix, require_finite: bool = False) -> ConstraintMatrix:
    """Tighten every bound to its active value.

    Row i's new lower bound is the max over the catalog of sum_k lam_k * b_k
    where b_k is the lower bound when lam_k > 0 and the upper bound otherwise
    (zero coefficients are skipped, so 0 * inf never arises); uppers are the
    mirrored min. Emptiness shows up as a crossed row. The result is a fixed
    point when the polytope is nonempty; for empty ones a second pass may
    collapse the bounds further, but crossings persist, so the emptiness
    verdict is stable (results are also cached via the `optimized` flag).
    """
    if m.optimized:
        return m
    alpha = m.alpha
    lows, highs = m.lower, m.upper
    new_lo, new_hi = [], []
    for i in range(alpha.e):
        cands = alpha.combos[i]
        lo = max(_combo_lower(c, lows, highs) for c in cands)
        hi = min(_combo_upper(c, lows, highs) for c in cands)
        if require_finite and (lo == NEG_INF or hi == POS_INF):
            raise UnboundedResult(f"row {i} stays unbounded after optimization")
        new_lo.append(lo)
        new_hi.append(hi)
    return ConstraintMatrix(alpha=alpha, lower=tuple(new_lo), upper=tuple(new_hi), optimized=True)


def is_empty(m: ConstraintMatrix) -> bool:
    """True iff the open polytope is empty (some tightened row crosses)."""
    if m.has_crossing():
        return True  # crossings survive tightening
    return optimize(m).has_crossing()


def active_faces(m: ConstraintMatrix) -> list[tuple[bool, bool]]:
    """Per row, whether the lower/upper bound supports a (d-1)-face: the best
    non-canonical combination must be strictly inside the tightened bound."""
    o = optimize(m)
    if o.has_crossing():
        raise EmptyPolytope("active_faces requires a nonempty polytope")
    out = []
    for i in range(o.alpha.e):
        others = [c for c in o.alpha.combos[i] if c != ((i, Fraction(1)),)]
        lo_rival = max((_combo_lower(c, o.lower, o.upper) for c in others), default=NEG_INF)
        hi_rival = min((_combo_upper(c, o.lower, o.upper) for c in others), default=POS_INF)
        out.append((lo_rival < o.lower[i], o.upper[i] < hi_rival))
    return out


def intersect_bounds(m: ConstraintMatrix, m2: ConstraintMatrix) -> ConstraintMatrix:
    """Componentwise (max of lowers, min of uppers), not tightened."""
    if m.alpha is not m2.alpha and m.alpha != m2.alpha:
        raise CoefficientMismatch("intersect requires a shared coefficient matrix")
    lo = tuple(max(a, b) for a, b in zip(m.lower, m2.lower))
    hi = tuple(min(a, b) for a, b in zip(m.upper, m2.upper))
    return ConstraintMatrix(alpha=m.alpha, lower=lo, upper=hi)


def intersect(m: ConstraintMatrix, m2: ConstraintMatrix) -> ConstraintMatrix:
    """Intersection constraint matrix, tightened. If the raw bounds already
    cross, the intersection is certified empty and is returned untightened."""
    raw = intersect_bounds(m, m2)
    if raw.has_crossing():
        return raw
    return optimize(raw)


def includes(m: ConstraintMatrix, m2: ConstraintMatrix) -> bool:
    """Set inclusion P_m within P_m2, decided on bounds: tighten m, then ask
    m2.lower <= lower and upper <= m2.upper on every row.

    For empty P_m the set inclusion holds vacuously but this bound test may
    still fail (tightened bounds of an empty polytope cross); callers that
    need the vacuous case must guard with is_empty.
    """
    if m.alpha is not m2.alpha and m.alpha != m2.alpha:
        raise CoefficientMismatch("includes requires a shared coefficient matrix")
    o = optimize(m)
    return all(
        l2 <= l1 and h1 <= h2
        for l1, h1, l2, h2 in zip(o.lower, o.upper, m2.lower, m2.upper)
    )


def inclusion_margin(m: ConstraintMatrix, m2: ConstraintMatrix) -> Bound:
    """Minimal slack of the inclusion test (negative = violated). `m` must
    already be tightened for the margin to be meaningful."""
    worst: Bound = POS_INF
    for l1, h1, l2, h2 in zip(m.lower, m.upper, m2.lower, m2.upper):
        for gap in (l1 - l2, h2 - h1):
            if gap < worst:
                worst = gap
    return worst


def equal_polytopes(m: ConstraintMatrix, m2: ConstraintMatrix) -> bool:
    """True iff both define the same point set (tightened matrices coincide)."""
    if m.alpha is not m2.alpha and m.alpha != m2.alpha:
        raise CoefficientMismatch("equality requires a shared coefficient matrix")
    return optimize(m).entries_equal(optimize(m2))


def affine_image(m: ConstraintMatrix, a, shift: Sequence) -> ConstraintMatrix:
    """Image under x -> a*x + shift with a > 0: bounds a*O(m) + alpha*shift.

    Dilations and translations commute with tightening, so the result is
    itself tightened.
    """
    a = rat(a)
    if a <= 0:
        raise NonPositiveScale(f"scale must be positive, got {a}")
    sh = [rat(v) for v in shift]
    if len(sh) != m.alpha.d:
        raise DimensionMismatch("shift dimension mismatch")
    o = optimize(m)
    offs = [m.alpha.row_dot(i, sh) for i in range(m.alpha.e)]
    lo = tuple(a * l + t if isinstance(l, Fraction) else l for l, t in zip(o.lower, offs))
    hi = tuple(a * h + t if isinstance(h, Fraction) else h for h, t in zip(o.upper, offs))
    return ConstraintMatrix(alpha=m.alpha, lower=lo, upper=hi, optimized=True)


def translate(m: ConstraintMatrix, shift: Sequence) -> ConstraintMatrix:
    return affine_image(m, 1, shift)


def contains_point(m: ConstraintMatrix, x: Sequence) -> bool:
    """Strict membership of a rational point."""
    xs = [rat(v) for v in x]
    if len(xs) != m.alpha.d:
        raise DimensionMismatch("point dimension mismatch")
    for i in range(m.alpha.e):
        v = m.alpha.row_dot(i, xs)
        if not (m.lower[i] < v < m.upper[i]):
            return False
    return True


def convert_constraints(
    m: ConstraintMatrix, alpha_dst: CoefficientMatrix
) -> ConstraintMatrix:
    """Re-express a polytope on another coefficient matrix.

    Every face direction actually supporting the set must appear (projectively)
    in alpha_dst for the result to be the same set; unmatched destination rows
    start unbounded and are filled by tightening.
    """
    lows: list[Bound] = []
    highs: list[Bound] = []
    for row in alpha_dst.rows:
        hit = m.alpha.find_row(row)
        if hit is None:
            lows.append(NEG_INF)
            highs.append(POS_INF)
            continue
        i, c = hit  # row == c * m.alpha.rows[i]  => bounds scale by c
        lo, hi = m.lower[i], m.upper[i]
        if c > 0:
            lows.append(lo * c if isinstance(lo, Fraction) else lo)
            highs.append(hi * c if isinstance(hi, Fraction) else hi)
        else:
            lows.append(hi * c if isinstance(hi, Fraction) else NEG_INF)
            highs.append(lo * c if isinstance(lo, Fraction) else POS_INF)
    return optimize(ConstraintMatrix(alpha=alpha_dst, lower=tuple(lows), upper=tuple(highs)))
