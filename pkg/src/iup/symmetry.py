"""Affine symmetry transformations and their action on constraint matrices.

A transformation sigma(x) = L x + c is compatible with a coefficient matrix
when every transformed direction alpha_i L is a scalar multiple of a single
row of alpha; the triple (diagonal scalars, row permutation, offset vector)
then lets sigma act directly on bound columns, with lower/upper swapping on
negative scalars.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .geometry import (
    CoefficientMatrix,
    ConstraintMatrix,
    DegenerateMatrix,
    GeometryError,
    _projective_key,
    build_coefficient_matrix,
    optimize,
    translate,
)
from .rational import NEG_INF, POS_INF, Bound, bound_str, rat


class GroupNotFinite(GeometryError):
    pass


class BranchCrossing(GeometryError):
    """The image of a polytope straddles an integer lattice plane, so no single
    affine branch of the mod-1 transformation applies."""


@dataclass(frozen=True)
class SymmetryTransform:
    """Invertible affine map x -> linear @ x + offset."""

    name: str
    linear: tuple[tuple[Fraction, ...], ...]
    offset: tuple[Fraction, ...]

    @property
    def d(self) -> int:
        return len(self.offset)

    def apply_point(self, x: Sequence) -> tuple[Fraction, ...]:
        xs = [rat(v) for v in x]
        return tuple(
            sum((c * v for c, v in zip(row, xs)), Fraction(0)) + o
            for row, o in zip(self.linear, self.offset)
        )

    def shifted(self, k: Sequence[int]) -> "SymmetryTransform":
        """Same linear part, offset translated by the integer vector -k."""
        off = tuple(o - Fraction(ki) for o, ki in zip(self.offset, k))
        return SymmetryTransform(name=self.name, linear=self.linear, offset=off)

    def compose(self, other: "SymmetryTransform", name: str = "") -> "SymmetryTransform":
        """self after other: x -> self(other(x))."""
        lin = tuple(
            tuple(
                sum((self.linear[i][k] * other.linear[k][j] for k in range(self.d)), Fraction(0))
                for j in range(self.d)
            )
            for i in range(self.d)
        )
        off = self.apply_point(other.offset)
        return SymmetryTransform(name=name or f"{self.name}*{other.name}", linear=lin, offset=off)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "linear": [[bound_str(v) for v in row] for row in self.linear],
            "offset": [bound_str(v) for v in self.offset],
        }

    @staticmethod
    def from_json(obj: dict) -> "SymmetryTransform":
        return make_transform(
            obj["name"],
            [[rat(v) for v in row] for row in obj["linear"]],
            [rat(v) for v in obj["offset"]],
        )


def make_transform(name: str, linear: Iterable[Sequence], offset: Sequence) -> SymmetryTransform:
    lin = tuple(tuple(rat(v) for v in row) for row in linear)
    off = tuple(rat(v) for v in offset)
    d = len(off)
    if len(lin) != d or any(len(r) != d for r in lin):
        raise DegenerateMatrix("linear part must be d x d")
    if _exact_rank(lin) != d:
        raise DegenerateMatrix(f"linear part of {name!r} is singular")
    return SymmetryTransform(name=name, linear=lin, offset=off)


def _exact_rank(rows: tuple[tuple[Fraction, ...], ...]) -> int:
    mat = [list(r) for r in rows]
    n, m = len(mat), len(mat[0])
    rank = 0
    for c in range(m):
        pr = next((r for r in range(rank, n) if mat[r][c] != 0), None)
        if pr is None:
            continue
        mat[rank], mat[pr] = mat[pr], mat[rank]
        pv = mat[rank][c]
        for r in range(rank + 1, n):
            if mat[r][c] != 0:
                f = mat[r][c] / pv
                mat[r] = [a - f * b for a, b in zip(mat[r], mat[rank])]
        rank += 1
        if rank == n:
            break
    return rank


@dataclass(frozen=True)
class CompatibilityData:
    """Action data: (alpha sigma x)_i = diag_i * (alpha x)_{perm_i} + offset_e_i."""

    alpha: CoefficientMatrix
    sigma: SymmetryTransform
    diag: tuple[Fraction, ...]
    perm: tuple[int, ...]
    offset_e: tuple[Fraction, ...]

    def to_json(self) -> dict:
        return {
            "diag": [bound_str(v) for v in self.diag],
            "perm": list(self.perm),
            "offset": [bound_str(v) for v in self.offset_e],
        }


def check_compatibility(
    sigma: SymmetryTransform, alpha: CoefficientMatrix
) -> Optional[CompatibilityData]:
    """Match every transformed row to a scaled row of alpha; None when some row
    has no match or the induced row map is not a bijection."""
    if sigma.d != alpha.d:
        return None
    proj = {_projective_key(r): i for i, r in enumerate(alpha.rows)}
    diag: list[Fraction] = []
    perm: list[int] = []
    for i in range(alpha.e):
        img = tuple(
            sum((alpha.rows[i][k] * sigma.linear[k][j] for k in range(alpha.d)), Fraction(0))
            for j in range(alpha.d)
        )
        key = _projective_key(img)
        if key is None or key not in proj:
            return None
        j = proj[key]
        target = alpha.rows[j]
        c = next(img[t] / target[t] for t in range(alpha.d) if target[t] != 0)
        diag.append(c)
        perm.append(j)
    if len(set(perm)) != alpha.e:
        return None
    off = tuple(alpha.row_dot(i, sigma.offset) for i in range(alpha.e))
    return CompatibilityData(alpha=alpha, sigma=sigma, diag=tuple(diag), perm=tuple(perm), offset_e=off)


def apply_to_matrix(data: CompatibilityData, m: ConstraintMatrix) -> ConstraintMatrix:
    """Push a constraint matrix through the transformation; bounds swap on rows
    with a negative scalar."""
    if m.alpha != data.alpha:
        raise GeometryError("constraint matrix bound to a different coefficient matrix")
    lows: list[Bound] = []
    highs: list[Bound] = []
    for i in range(data.alpha.e):
        a, j, b = data.diag[i], data.perm[i], data.offset_e[i]
        lo, hi = m.lower[j], m.upper[j]
        if a > 0:
            new_lo = a * lo + b if isinstance(lo, Fraction) else NEG_INF
            new_hi = a * hi + b if isinstance(hi, Fraction) else POS_INF
        else:
            new_lo = a * hi + b if isinstance(hi, Fraction) else NEG_INF
            new_hi = a * lo + b if isinstance(lo, Fraction) else POS_INF
        lows.append(new_lo)
        highs.append(new_hi)
    return ConstraintMatrix(alpha=m.alpha, lower=tuple(lows), upper=tuple(highs))


def commutes_with_optimize(data: CompatibilityData) -> bool:
    """True iff the diagonal is a single scalar, in which case the induced
    action and the tightening operator commute."""
    return len(set(data.diag)) == 1


def apply_mod1(
    sigma: SymmetryTransform, m: ConstraintMatrix, data: Optional[CompatibilityData] = None
) -> ConstraintMatrix:
    """Apply the mod-1 reduction of sigma to a polytope inside the unit cube,
    selecting the affine branch valid on that polytope.

    The branch is found by applying the given representative and then shifting
    by the integer vector that puts every coordinate range back into [0, 1];
    a coordinate range straddling an integer raises BranchCrossing.
    """
    alpha = m.alpha
    if data is None:
        data = check_compatibility(sigma, alpha)
        if data is None:
            raise GeometryError(f"{sigma.name!r} is not compatible with this coefficient matrix")
    img = optimize(apply_to_matrix(data, optimize(m)))
    shift = []
    for j in range(alpha.d):
        i = alpha.axis_row(j)
        if i is None:
            raise GeometryError("mod-1 branch selection needs unit-vector rows")
        lo, hi = img.lower[i], img.upper[i]
        if not (isinstance(lo, Fraction) and isinstance(hi, Fraction)):
            raise BranchCrossing("unbounded image; cannot select a branch")
        k = lo.__floor__()
        if hi > k + 1:
            raise BranchCrossing(
                f"image coordinate {j} spans ({lo}, {hi}); crosses an integer plane"
            )
        shift.append(k)
    if all(k == 0 for k in shift):
        return img
    return translate(img, [-k for k in shift])


def build_group_alpha(
    generators: Iterable[SymmetryTransform],
    alpha0: CoefficientMatrix,
    cap: int = 10_000,
) -> CoefficientMatrix:
    """Stack alpha0 composed with every element of the group generated by the
    linear parts, dropping projectively duplicate rows (first occurrence kept).
    Every generator is compatible with the result; verified before returning.
    """
    gens = list(generators)
    d = alpha0.d
    ident = tuple(tuple(Fraction(1 if i == j else 0) for j in range(d)) for i in range(d))
    group: dict[tuple, tuple] = {ident: ident}
    frontier = [ident]
    gen_lins = [g.linear for g in gens]
    while frontier:
        nxt = []
        for el in frontier:
            for lin in gen_lins:
                prod = tuple(
                    tuple(sum((el[i][k] * lin[k][j] for k in range(d)), Fraction(0)) for j in range(d))
                    for i in range(d)
                )
                if prod not in group:
                    if len(group) >= cap:
                        raise GroupNotFinite(f"group closure exceeded cap {cap}")
                    group[prod] = prod
                    nxt.append(prod)
        frontier = nxt
    rows: list[tuple[Fraction, ...]] = []
    seen: set = set()
    for el in group.values():
        for r in alpha0.rows:
            img = tuple(
                sum((r[k] * el[k][j] for k in range(d)), Fraction(0)) for j in range(d)
            )
            key = _projective_key(img)
            if key is not None and key not in seen:
                seen.add(key)
                rows.append(img)
    alpha = build_coefficient_matrix(rows)
    for g in gens:
        if check_compatibility(g, alpha) is None:
            raise GeometryError(f"generator {g.name!r} incompatible with closed matrix")
    return alpha


# ---------------------------------------------------------------------------
# Named transformations of the coupled-map families (affine branches valid on
# the polytopes they are used with; apply_mod1 re-selects branches as needed).

def inversion(d: int) -> SymmetryTransform:
    """The involution x -> 1 - x on the unit cube."""
    lin = [[-1 if i == j else 0 for j in range(d)] for i in range(d)]
    return make_transform("Sigma", lin, [1] * d)


def identity(d: int) -> SymmetryTransform:
    lin = [[1 if i == j else 0 for j in range(d)] for i in range(d)]
    return make_transform("id", lin, [0] * d)


def sigma_321() -> SymmetryTransform:
    return make_transform("sigma_321", [[0, -1], [-1, 0]], [1, 1])


def sigma_4321() -> SymmetryTransform:
    return make_transform("sigma_4321", [[0, 0, -1], [0, -1, 0], [-1, 0, 0]], [1, 1, 1])


def sigma_4231() -> SymmetryTransform:
    return make_transform("sigma_4231", [[0, -1, -1], [0, 1, 0], [-1, -1, 0]], [1, 0, 1])


def sigma_1324() -> SymmetryTransform:
    return make_transform("sigma_1324", [[1, 1, 0], [0, -1, 0], [0, 1, 1]], [0, 1, 0])


def sigma_2134() -> SymmetryTransform:
    return make_transform("sigma_2134", [[-1, 0, 0], [1, 1, 0], [0, 0, 1]], [1, 0, 0])


def sigma_3124() -> SymmetryTransform:
    return make_transform("sigma_3124", [[-1, -1, 0], [1, 0, 0], [0, 1, 1]], [1, 0, 0])


def named_symmetries(d: int) -> dict[str, SymmetryTransform]:
    """Registry of the concrete transformations used by the catalog problems."""
    table: dict[str, SymmetryTransform] = {"id": identity(d), "Sigma": inversion(d)}
    if d == 2:
        table["sigma_321"] = sigma_321()
    elif d == 3:
        for fn in (sigma_4321, sigma_4231, sigma_1324, sigma_2134, sigma_3124):
            t = fn()
            table[t.name] = t
    return table
