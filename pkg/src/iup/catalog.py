"""Closed-form candidate solutions of the coupled-map conditioning problems.

Each constructor returns a self-contained bundle: coefficient matrix,
candidate constraint matrices, the conditioning problem they are meant to
solve, the map, and the symmetry transformations the problem references.
Bundles serialize to JSON and feed the verifier unmodified.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .conditioning import ConditioningProblem, Transition
from .geometry import (
    CoefficientMatrix,
    ConstraintMatrix,
    build_coefficient_matrix,
    constraint_matrix,
    optimize,
)
from .maps import ClusterDistribution, ParameterOutOfRange, PiecewiseAffineMap, build_g_map
from .partition import canonical_alpha
from .rational import NEG_INF, POS_INF, bound_str, rat
from .symmetry import SymmetryTransform, named_symmetries


class DeltaInfeasible(Exception):
    pass


class SingularSystem(Exception):
    pass


@dataclass
class CatalogBundle:
    name: str
    params: dict
    alpha: CoefficientMatrix
    candidates: list[ConstraintMatrix]
    problem: ConditioningProblem
    fmap: PiecewiseAffineMap
    symmetries: dict[str, SymmetryTransform]
    orbit_generators: tuple[str, ...] = ()
    notes: str = ""

    def to_json(self) -> dict:
        from .symmetry import check_compatibility

        syms = {}
        for name, t in self.symmetries.items():
            entry = t.to_json()
            data = check_compatibility(t, self.alpha)
            if data is not None:
                entry["compatibility"] = data.to_json()
            syms[name] = entry
        return {
            "name": self.name,
            "params": self.params,
            "alpha": self.alpha.to_json(),
            "candidates": [m.to_json() for m in self.candidates],
            "problem": self.problem.to_json(),
            "map": self.fmap.to_json(),
            "symmetries": syms,
            "orbit_generators": list(self.orbit_generators),
            "notes": self.notes,
        }

    @staticmethod
    def from_json(obj: dict) -> "CatalogBundle":
        alpha = CoefficientMatrix.from_json(obj["alpha"])
        rho = ClusterDistribution.of(obj["map"]["rho"])
        fmap = build_g_map(rho, rat(obj["map"]["eps"]), alpha)
        return CatalogBundle(
            name=obj["name"],
            params=obj["params"],
            alpha=alpha,
            candidates=[ConstraintMatrix.from_json(c, alpha) for c in obj["candidates"]],
            problem=ConditioningProblem.from_json(obj["problem"]),
            fmap=fmap,
            symmetries={k: SymmetryTransform.from_json(v) for k, v in obj["symmetries"].items()},
            orbit_generators=tuple(obj.get("orbit_generators", ())),
            notes=obj.get("notes", ""),
        )


def p_star(eps) -> Fraction:
    """Fixed-point quantity (2 - eps) / (2 (3 - 2 eps))."""
    eps = rat(eps)
    return (2 - eps) / (2 * (3 - 2 * eps))


def r_coupling(varrho, eps) -> Fraction:
    """(1 - 2 varrho eps) / (3 - 2 eps)."""
    varrho, eps = rat(varrho), rat(eps)
    return (1 - 2 * varrho * eps) / (3 - 2 * eps)


def alpha_quadrilateral(a) -> CoefficientMatrix:
    """Directions x1, x2, a*x1+x2, x1+a*x2 plus the x1+x2 row, so the atomic
    partition stays representable. Requires a > 1 (rows collapse at a = 1)."""
    a = rat(a)
    if a <= 1:
        raise ParameterOutOfRange("slope must exceed 1 for the extended matrix")
    return build_coefficient_matrix([[1, 0], [0, 1], [a, 1], [1, a], [1, 1]])


def ma_entries(varrho, a, eps) -> list[tuple[Fraction, Fraction]]:
    """The unique candidate's bound pairs on the rows x1, x2, a*1+2, 1+a*2."""
    varrho, a, eps = rat(varrho), rat(a), rat(eps)
    r = r_coupling(varrho, eps)
    return [
        (eps * (1 - 2 * varrho), r),
        (r, 1 - 2 * eps * (1 - varrho - eps * (1 - 2 * varrho))),
        ((1 + a) / a * (r + (a - 1) * eps * (1 - 2 * varrho)), (1 + a) * r),
        ((1 + a) * r, (1 + a) / a * (a * r + 2 * (a - 1) * (1 - eps) ** 2 * (1 - 2 * r))),
    ]


def _problem_2d_single() -> ConditioningProblem:
    return ConditioningProblem(
        q=1,
        localisation={1: frozenset({"001", "011"})},
        transitions={
            (1, "001"): Transition(to=1, sym="sigma_321", equality=True),
            (1, "011"): Transition(to=1, sym="id", equality=False),
        },
    )


def make_ma(varrho, a, eps) -> CatalogBundle:
    """Quadrilateral candidate for the single-polytope two-dimensional problem.

    At a = 1 the extended directions coincide, so the candidate is returned on
    the canonical matrix with the collapsed sum row (lower = upper): the
    degenerate witness that no solution with axis-and-antidiagonal faces
    exists.
    """
    varrho, a, eps = rat(varrho), rat(a), rat(eps)
    if not (0 < varrho < Fraction(1, 2)):
        raise ParameterOutOfRange(f"varrho must lie in (0, 1/2), got {varrho}")
    if a < 1:
        raise ParameterOutOfRange(f"slope must be >= 1, got {a}")
    if not (0 < eps < Fraction(1, 2)):
        raise ParameterOutOfRange(f"eps must lie in (0, 1/2), got {eps}")
    rows = ma_entries(varrho, a, eps)
    rho = ClusterDistribution.symmetric2(varrho)
    if a == 1:
        alpha = canonical_alpha(2)
        # both sum rows of the formula coincide; lower == upper
        cand = constraint_matrix(alpha, [rows[0], rows[1], (rows[3][0], rows[2][1])])
        fmap = build_g_map(rho, eps, alpha)
    else:
        alpha = alpha_quadrilateral(a)
        cand = optimize(constraint_matrix(alpha, rows + [(NEG_INF, POS_INF)]))
        fmap = build_g_map(rho, eps, alpha)
    syms = named_symmetries(2)
    return CatalogBundle(
        name="ma",
        params={"varrho": bound_str(varrho), "a": bound_str(a), "eps": bound_str(eps)},
        alpha=alpha,
        candidates=[cand],
        problem=_problem_2d_single(),
        fmap=fmap,
        symmetries=syms,
        orbit_generators=("sigma_321",),
    )


# ---------------------------------------------------------------------------
# Three-dimensional first bifurcation

@dataclass(frozen=True)
class DeltaFeasibility:
    """The five nesting parameters with the full inequality system coupling
    them to eps. Constructors only enforce the eps-free shape inequalities;
    `violations` reports the complete system."""

    eps: Fraction
    deltas: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.deltas) != 5:
            raise DeltaInfeasible("expected five delta parameters")

    @property
    def p(self) -> Fraction:
        return p_star(self.eps)

    def shape_violations(self) -> list[str]:
        d1, d2, d3, d4, d5 = self.deltas
        out = []
        for i, v in enumerate(self.deltas, start=1):
            if v < 0:
                out.append(f"delta_{i} >= 0")
        if d3 > min(d2, d4):
            out.append("delta_3 <= min(delta_2, delta_4)")
        if d3 + max(d2, d4) > d1:
            out.append("delta_3 + max(delta_2, delta_4) <= delta_1")
        if max(d2, d4) > d5:
            out.append("max(delta_2, delta_4) <= delta_5")
        return out

    def violations(self) -> list[str]:
        d1, d2, d3, d4, d5 = self.deltas
        eps, p = self.eps, self.p
        out = self.shape_violations()
        if 2 * (1 - eps) * d1 > 2 * p - (1 - eps):
            out.append("2(1-eps) delta_1 <= 2p* - (1-eps)")
        if d1 > eps * (1 - 2 * p) + 2 * (1 - eps) * min(d2, d4):
            out.append("delta_1 <= eps(1-2p*) + 2(1-eps) min(delta_2, delta_4)")
        if 2 * (1 - eps) * max(d2, d4) > p - (1 - eps) ** 2:
            out.append("2(1-eps) max(delta_2, delta_4) <= p* - (1-eps)^2")
        if d5 > eps - p:
            out.append("delta_5 <= eps - p*")
        if d5 + d1 > 1 - 2 * p + min(d2, d4):
            out.append("delta_5 + delta_1 <= 1 - 2p* + min(delta_2, delta_4)")
        # coupling of delta_1 and delta_3 from the piece mapping across the
        # first candidate (easy to miss: it does not follow from the rest)
        lhs = 2 * (1 - eps) * min(
            p - eps / 2 - 2 * (1 - eps) * d3,
            2 * p - Fraction(1, 2) - 4 * (1 - eps) * d3,
        )
        if lhs > 1 - 2 * p - d1:
            out.append(
                "2(1-eps) min(p*-eps/2-2(1-eps)delta_3, 2p*-1/2-4(1-eps)delta_3)"
                " <= 1 - 2p* - delta_1"
            )
        return out

    @property
    def ok(self) -> bool:
        return not self.violations()


def sample_delta_box(eps, rng: random.Random, denom: int = 10_000) -> tuple[Fraction, ...]:
    """Draw a quintuple from the box of sufficient conditions (a convenience
    sampler; the box is strictly inside the full feasible set)."""
    eps = rat(eps)
    p = p_star(eps)

    def draw(lo: Fraction, hi: Fraction) -> Fraction:
        if hi <= lo:
            return lo
        return lo + (hi - lo) * Fraction(rng.randrange(denom + 1), denom)

    zero = Fraction(0)
    d1_cap = min(
        (2 * p - (1 - eps)) / (2 * (1 - eps)),
        eps * (1 - 2 * p),
        # keep the delta_1/delta_3 coupling satisfiable at delta_3 = 0
        1 - 2 * p - 2 * (1 - eps) * min(p - eps / 2, 2 * p - Fraction(1, 2)),
    )
    d1 = draw(zero, d1_cap)
    cap24 = min((p - (1 - eps) ** 2) / (2 * (1 - eps)), d1, 1 - 2 * p - d1, eps - p)
    d2 = draw(zero, max(zero, cap24))
    d4 = draw(zero, max(zero, cap24))
    d3 = draw(zero, max(zero, min(d2, d4, d1 - max(d2, d4))))
    d5 = draw(max(d2, d4), max(max(d2, d4), min(1 - 2 * p - d1, eps - p)))
    return (d1, d2, d3, d4, d5)


def m1_m2_entries(eps, deltas) -> tuple[list, list]:
    eps = rat(eps)
    d1, d2, d3, d4, d5 = (rat(v) for v in deltas)
    p = p_star(eps)
    b = 2 * (1 - eps)
    m1 = [
        (1 - 2 * p + b * d1, 1 - eps),
        (eps / 2, p - b * d2),
        (Fraction(0), p - eps / 2 - b * d3),
        (1 - p + b * d3, 1 - eps / 2),
        (eps / 2, p - b * d3),
        (1 - p + b * d4, 1 - eps / 2),
    ]
    m2 = [
        (2 * p + d1, Fraction(1)),
        (p + d2, 1 - p - d2),
        (Fraction(0), 1 - 2 * p - d1),
        (1 + p + d3, 2 - p - d5),
        (p + d5, 1 - p - d3),
        (1 + p + d4, 2 - p - d4),
    ]
    return m1, m2


def _problem_3d_first() -> ConditioningProblem:
    return ConditioningProblem(
        q=2,
        localisation={
            1: frozenset({"000101", "100101"}),
            2: frozenset(
                {"110111", "110112", "110212", "100101", "100111", "100112"}
            ),
        },
        transitions={
            (1, "000101"): Transition(to=2),
            (1, "100101"): Transition(to=1),
            (2, "110111"): Transition(to=1, equality=True),
            (2, "110112"): Transition(to=1, sym="sigma_4231"),
            (2, "110212"): Transition(to=2),
        },
        self_symmetry=((2, "sigma_4321"),),
    )


def make_m1_m2(eps, deltas: Sequence = (0, 0, 0, 0, 0)) -> CatalogBundle:
    """Nested pair of candidates for the three-dimensional first-bifurcation
    problem on the canonical matrix.

    Construction rejects quintuples violating the eps-free shape inequalities;
    the eps-coupled feasibility conditions are exactly what the verifier
    decides, so they are not enforced here (query DeltaFeasibility directly).
    """
    eps = rat(eps)
    if not (0 < eps < Fraction(1, 2)):
        raise ParameterOutOfRange(f"eps must lie in (0, 1/2), got {eps}")
    feas = DeltaFeasibility(eps=eps, deltas=tuple(rat(v) for v in deltas))
    bad = feas.shape_violations()
    if bad:
        raise DeltaInfeasible(f"violated: {bad[0]}")
    rows1, rows2 = m1_m2_entries(eps, feas.deltas)
    alpha = canonical_alpha(3)
    cands = [constraint_matrix(alpha, rows1), constraint_matrix(alpha, rows2)]
    fmap = build_g_map(ClusterDistribution.uniform(3), eps, alpha)
    return CatalogBundle(
        name="m1m2",
        params={"eps": bound_str(eps), "deltas": [bound_str(v) for v in feas.deltas]},
        alpha=alpha,
        candidates=cands,
        problem=_problem_3d_first(),
        fmap=fmap,
        symmetries=named_symmetries(3),
        orbit_generators=("sigma_4231", "sigma_1324"),
    )


# ---------------------------------------------------------------------------
# Three-dimensional second bifurcation

def alpha_second_bifurcation(eps) -> CoefficientMatrix:
    """Ten directions: axes, contiguous sums, the weighted sum x1+2x2+3x3 and
    three fixed-point-weighted directions; the tenth row is required for the
    transposition symmetries to act on rows by permutation and sign."""
    eps = rat(eps)
    p = p_star(eps)
    p1, p2, p3 = 1 - p, 1 - 2 * p, 1 - 3 * p
    return build_coefficient_matrix(
        [
            [1, 0, 0],
            [0, 1, 0],
            [0, 0, 1],
            [1, 1, 0],
            [0, 1, 1],
            [1, 1, 1],
            [1, 2, 3],
            [p1, p2, p3],
            [-p, p2, p3],
            [-p, -2 * p, p3],
        ]
    )


def p4_default_entries(eps) -> list[tuple]:
    eps = rat(eps)
    p = p_star(eps)
    p2, p3 = 1 - 2 * p, 1 - 3 * p
    h = Fraction(1, 2)
    return [
        (Fraction(0), h),
        (eps / 2, h),
        (Fraction(0), h),
        (eps / 2 * (3 - 2 * eps), Fraction(1)),
        (Fraction(0), h),
        (Fraction(0), Fraction(3, 2)),
        (Fraction(0), Fraction(1)),
        (p3 / 2, p2),
        (-p / 2 + p3 / 2, Fraction(0)),
        (-3 * p / 2 + p3 / 2, Fraction(0)),
    ]


def _problem_3d_second() -> ConditioningProblem:
    return ConditioningProblem(
        q=1,
        localisation={1: frozenset({"000000", "000001", "000101"})},
        transitions={
            (1, "000000"): Transition(to=1, sym="id", target_atom="000101"),
            (1, "000001"): Transition(to=1, sym="sigma_3124"),
            (1, "000101"): Transition(to=1, sym="sigma_2134"),
        },
    )


def make_p4(eps) -> CatalogBundle:
    """Candidate for the second-bifurcation problem: the tightened form of the
    six defining half-spaces completed by cube defaults, on the ten-row
    matrix."""
    eps = rat(eps)
    if not (0 < eps < Fraction(1, 2)):
        raise ParameterOutOfRange(f"eps must lie in (0, 1/2), got {eps}")
    alpha = alpha_second_bifurcation(eps)
    cand = optimize(constraint_matrix(alpha, p4_default_entries(eps)))
    fmap = build_g_map(ClusterDistribution.uniform(3), eps, alpha)
    return CatalogBundle(
        name="p4",
        params={"eps": bound_str(eps)},
        alpha=alpha,
        candidates=[cand],
        problem=_problem_3d_second(),
        fmap=fmap,
        symmetries=named_symmetries(3),
        orbit_generators=("sigma_2134", "sigma_1324"),
    )


# ---------------------------------------------------------------------------
# Continuation to weakly asymmetric weights (two-polytope two-dimensional)

def _problem_2d_pair() -> ConditioningProblem:
    return ConditioningProblem(
        q=2,
        localisation={
            1: frozenset({"001", "011"}),
            2: frozenset({"111", "011"}),
        },
        transitions={
            (1, "001"): Transition(to=2, equality=True),
            (1, "011"): Transition(to=1),
            (2, "111"): Transition(to=1, equality=True),
            (2, "011"): Transition(to=2),
        },
    )


def continue_problem2(varrho, a, eps, delta) -> CatalogBundle:
    """Candidate pair for weights (varrho+delta, 1-2varrho, varrho-delta) by
    continuation of the symmetric solution: the four exchanged edges solve
    two 2x2 linear systems, the remaining bounds are filled by tightening.

    The returned pair still has to be verified (feasibility in delta is not
    known in closed form); the bundle's problem encodes the duplicated
    conditions with equalities on the cross transitions.
    """
    varrho, a, eps, delta = rat(varrho), rat(a), rat(eps), rat(delta)
    if not (0 < varrho < Fraction(1, 2)) or abs(delta) >= varrho:
        raise ParameterOutOfRange("need 0 < varrho < 1/2 and |delta| < varrho")
    if a <= 1:
        raise ParameterOutOfRange("slope must exceed 1")
    if not (0 < eps < Fraction(1, 2)):
        raise ParameterOutOfRange(f"eps must lie in (0, 1/2), got {eps}")
    rho1, rho2, rho3 = varrho + delta, 1 - 2 * varrho, varrho - delta
    rho = ClusterDistribution.of([rho1, rho2, rho3])
    beta = 2 * (1 - eps)
    disc = beta * beta - 1  # (1-2eps)(3-2eps) up to sign; nonzero on (0,1/2)
    if disc == 0:
        raise SingularSystem("edge-exchange system is singular")

    # x1 edges: image of the plane x1 = 1/2 in the all-ones atom, then its image
    m1_lo1 = eps * (1 - 2 * rho3)
    m2_lo1 = beta * m1_lo1 + 2 * eps * rho3
    # x2 edges: image of the plane x2 = 1/2 in atom 001, then its image
    m2_hi2 = 1 - eps + 2 * eps * rho1
    m1_hi2 = beta * m2_hi2 + 2 * eps * (rho2 + rho3) - 1
    # exchanged pair of lower (1 + a*2) edges
    c1 = 2 * eps * (rho3 + a * rho1)
    c2 = 2 * eps * ((1 - rho3) + a * (1 - rho1)) - (1 + a)
    m1_lo4 = (beta * c1 + c2) / (1 - beta * beta)
    m2_lo4 = beta * m1_lo4 + c1
    # exchanged pair of upper (a*1 + 2) edges
    e1 = 2 * eps * (a * rho3 + rho1)
    e2 = 2 * eps * (a * (1 - rho3) + (1 - rho1)) - (1 + a)
    m1_hi3 = (beta * e1 + e2) / (1 - beta * beta)
    m2_hi3 = beta * m1_hi3 + e1

    alpha = alpha_quadrilateral(a)

    def complete(lo1, hi2, hi3, lo4) -> ConstraintMatrix:
        raw = constraint_matrix(
            alpha,
            [
                (lo1, POS_INF),
                (NEG_INF, hi2),
                (NEG_INF, hi3),
                (lo4, POS_INF),
                (NEG_INF, POS_INF),
            ],
        )
        return optimize(raw)

    cands = [complete(m1_lo1, m1_hi2, m1_hi3, m1_lo4), complete(m2_lo1, m2_hi2, m2_hi3, m2_lo4)]
    fmap = build_g_map(rho, eps, alpha)
    return CatalogBundle(
        name="cont2",
        params={
            "varrho": bound_str(varrho),
            "a": bound_str(a),
            "eps": bound_str(eps),
            "delta": bound_str(delta),
        },
        alpha=alpha,
        candidates=cands,
        problem=_problem_2d_pair(),
        fmap=fmap,
        symmetries=named_symmetries(2),
        orbit_generators=(),
        notes="verification required: the admissible |delta| range is empirical",
    )


# ---------------------------------------------------------------------------

def make_bundle(which: str, params: dict) -> CatalogBundle:
    """Dispatch used by the command-line interface."""
    if which == "ma":
        return make_ma(params["varrho"], params["a"], params["eps"])
    if which == "m1m2":
        return make_m1_m2(params["eps"], params.get("deltas", (0, 0, 0, 0, 0)))
    if which == "p4":
        return make_p4(params["eps"])
    if which == "cont2":
        return continue_problem2(params["varrho"], params["a"], params["eps"], params["delta"])
    raise ValueError(f"unknown catalog entry {which!r}")


def verify_bundle(bundle: CatalogBundle):
    from .conditioning import verify

    return verify(bundle.problem, bundle.candidates, bundle.fmap, bundle.symmetries)


def threshold_family(which: str, params: dict) -> Callable[[Fraction], bool]:
    """eps -> overall pass/fail of the bundle's verification."""

    def pred(eps: Fraction) -> bool:
        p = dict(params)
        p["eps"] = eps
        return verify_bundle(make_bundle(which, p)).passed

    return pred
