"""Piecewise affine coupled-map family on the unit cube.

The map acts as x -> a*x + offset on each atom of the symbolic partition,
with a = 2(1 - eps) and a per-atom constant combining the coupling term and
the integer part subtracted by the fractional-part reduction. The coupling
field depends on a point only through the rounded contiguous sums, i.e.
through the atom label, so offsets are computed exactly from labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    CoefficientMatrix,
    ConstraintMatrix,
    affine_image,
    cube_matrix,
    intersect,
)
from .partition import OnBoundary, atoms_on, canonical_alpha, h_values, label_of_h, sum_ranges
from .rational import rat


class ParameterOutOfRange(Exception):
    pass


class OnDiscontinuity(Exception):
    """Evaluation at a point where some contiguous sum is a half-integer."""


@dataclass(frozen=True)
class ClusterDistribution:
    """Nonnegative weights summing to one; the map dimension is one less than
    the number of weights."""

    weights: tuple[Fraction, ...]

    def __post_init__(self):
        if any(w < 0 for w in self.weights):
            raise ParameterOutOfRange("weights must be nonnegative")
        if sum(self.weights) != 1:
            raise ParameterOutOfRange(f"weights sum to {sum(self.weights)}, not 1")

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return len(self.weights) - 1

    @staticmethod
    def uniform(d: int) -> "ClusterDistribution":
        return ClusterDistribution(tuple([Fraction(1, d + 1)] * (d + 1)))

    @staticmethod
    def of(values: Sequence) -> "ClusterDistribution":
        return ClusterDistribution(tuple(rat(v) for v in values))

    @staticmethod
    def symmetric2(varrho) -> "ClusterDistribution":
        """Three weights (r, 1-2r, r); the two-dimensional partly-symmetric family."""
        r = rat(varrho)
        return ClusterDistribution((r, 1 - 2 * r, r))


def floor_h(u) -> int:
    """Round-to-nearest with the half-integer convention mapped to 0."""
    u = rat(u)
    if (u - Fraction(1, 2)).denominator == 1:
        return 0
    return (u + Fraction(1, 2)).__floor__()


def b_rho_from_h(rho: ClusterDistribution, hs: Sequence[int]) -> tuple[Fraction, ...]:
    """Coupling field evaluated from the rounded contiguous sums (the atom
    label), which determine it completely."""
    d = rho.d
    idx = {rng: k for k, rng in enumerate(sum_ranges(d))}

    def h(i: int, j: int) -> int:
        if j < i:
            return 0
        return hs[idx[(i, j)]]

    w = rho.weights
    out = []
    for i in range(1, d + 1):
        v = (w[i - 1] + w[i]) * h(i, i)
        for j in range(1, i):
            v += w[j - 1] * (h(j, i) - h(j, i - 1))
        for j in range(i + 1, d + 1):
            v += w[j] * (h(i, j) - h(i + 1, j))
        out.append(v)
    return tuple(out)


def b_rho(rho: ClusterDistribution, x: Sequence) -> tuple[Fraction, ...]:
    """Coupling field at an exact point; raises OnDiscontinuity on the
    half-integer planes."""
    try:
        hs = h_values(x, rho.d)
    except OnBoundary as exc:
        raise OnDiscontinuity(str(exc)) from exc
    return b_rho_from_h(rho, hs)


@dataclass(frozen=True)
class PiecewiseAffineMap:
    """x -> a*x + offset_atom on each atom of an atomic partition of M."""

    alpha: CoefficientMatrix
    d: int
    a: Fraction
    ambient: ConstraintMatrix
    atoms: tuple[tuple[str, ConstraintMatrix, tuple[Fraction, ...]], ...]
    rho: Optional[ClusterDistribution] = None
    eps: Optional[Fraction] = None
    _atom_table: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_atom_table", {lab: (m, off) for lab, m, off in self.atoms}
        )

    def atom_matrix(self, label: str) -> ConstraintMatrix:
        return self._atom_table[label][0]

    def offset(self, label: str) -> tuple[Fraction, ...]:
        return self._atom_table[label][1]

    @property
    def labels(self) -> list[str]:
        return [lab for lab, _, _ in self.atoms]

    def to_json(self) -> dict:
        from .rational import bound_str

        return {
            "d": self.d,
            "a": bound_str(self.a),
            "rho": [bound_str(w) for w in self.rho.weights] if self.rho else None,
            "eps": bound_str(self.eps) if self.eps is not None else None,
            "atoms": [
                {"label": lab, **m.to_json(), "offset": [bound_str(v) for v in off]}
                for lab, m, off in self.atoms
            ],
        }

    def float_tables(self) -> tuple[float, dict[str, np.ndarray]]:
        return float(self.a), {lab: np.array([float(v) for v in off]) for lab, _, off in self.atoms}


def build_g_map(
    rho: ClusterDistribution,
    eps,
    alpha: Optional[CoefficientMatrix] = None,
) -> PiecewiseAffineMap:
    """The reduced coupled map with expansion 2(1-eps) on the atomic partition.

    On the atom with rounded sums h, the total affine action is
    x -> 2(1-eps)*x + 2*eps*B(h) - h_axes, with h_axes the single-coordinate
    components of the label (the integer part removed by the mod-1 reduction).
    """
    eps = rat(eps)
    if not (0 <= eps < Fraction(1, 2)):
        raise ParameterOutOfRange(f"eps must lie in [0, 1/2), got {eps}")
    d = rho.d
    if alpha is None:
        alpha = canonical_alpha(d)
    atoms = atoms_on(alpha, d)
    a = 2 * (1 - eps)
    enriched = []
    for lab, m in atoms:
        hs = [int(c) for c in lab]
        b = b_rho_from_h(rho, hs)
        off = tuple(2 * eps * b[j] - hs[j] for j in range(d))
        enriched.append((lab, m, off))
    return PiecewiseAffineMap(
        alpha=alpha,
        d=d,
        a=a,
        ambient=cube_matrix(alpha),
        atoms=tuple(enriched),
        rho=rho,
        eps=eps,
    )


def evaluate(fmap: PiecewiseAffineMap, x: Sequence) -> tuple[tuple[Fraction, ...], str]:
    """Exact one-step image and the atom label of the argument."""
    xs = [rat(v) for v in x]
    if any(not (0 < v < 1) for v in xs):
        raise OnBoundary(f"point {x!r} outside the open ambient cube")
    label = label_of_h(h_values(xs, fmap.d))
    if label not in fmap._atom_table:
        raise OnBoundary(f"point {x!r} is in no atom (label {label})")
    off = fmap.offset(label)
    y = tuple(fmap.a * v + o for v, o in zip(xs, off))
    return y, label


def image_of_polytope(fmap: PiecewiseAffineMap, m: ConstraintMatrix, label: str) -> ConstraintMatrix:
    """Image of the atomic piece: affine image of the tightened intersection
    with the atom. The caller is responsible for nonemptiness."""
    piece = intersect(m, fmap.atom_matrix(label))
    return affine_image(piece, fmap.a, fmap.offset(label))
