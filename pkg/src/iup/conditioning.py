"""Conditioning problems and their exact verifier.

A conditioning problem prescribes, for a collection of candidate polytopes,
which atoms each one meets and where each atomic piece maps (possibly up to a
symmetry, possibly with equality instead of inclusion). The verifier checks
every requirement in exact rational arithmetic and reports a per-condition
margin: the minimal slack, negative when violated.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .geometry import (
    CoefficientMismatch,
    ConstraintMatrix,
    affine_image,
    inclusion_margin,
    intersect,
    is_empty,
    optimize,
)
from .maps import PiecewiseAffineMap
from .rational import NEG_INF, Bound, bound_str, rat
from .symmetry import (
    BranchCrossing,
    CompatibilityData,
    SymmetryTransform,
    apply_mod1,
    check_compatibility,
)


class IncompatibleSymmetry(Exception):
    pass


class NotBracketing(Exception):
    pass


class NonMonotone(Exception):
    """Pass/fail verdicts are not monotone in the swept parameter."""


@dataclass(frozen=True)
class Transition:
    """Target of one atomic piece: polytope index `to` (1-based), symmetry
    name, equality flag, and an optional atom restricting the target."""

    to: int
    sym: str = "id"
    equality: bool = False
    target_atom: Optional[str] = None


@dataclass(frozen=True)
class ConditioningProblem:
    """Localisation sets and dynamical transitions for q polytopes.

    Transitions may cover only a sub-collection of the admissible (k, atom)
    pairs: with symmetric candidates, conditions on the remaining pieces
    follow from the listed ones, and problems extracted from orbits list
    exactly what was observed.
    """

    q: int
    localisation: dict[int, frozenset[str]]
    transitions: dict[tuple[int, str], Transition]
    self_symmetry: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        for k, atoms in self.localisation.items():
            if not 1 <= k <= self.q:
                raise ValueError(f"localisation key {k} out of range")
        for (k, atom), tr in self.transitions.items():
            if atom not in self.localisation.get(k, frozenset()):
                raise ValueError(f"transition on ({k}, {atom}) outside localisation")
            if not 1 <= tr.to <= self.q:
                raise ValueError(f"transition target {tr.to} out of range")

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "localisation": {str(k): sorted(v) for k, v in self.localisation.items()},
            "transitions": [
                {
                    "k": k,
                    "atom": atom,
                    "to": tr.to,
                    "sym": tr.sym,
                    "equality": tr.equality,
                    **({"target_atom": tr.target_atom} if tr.target_atom else {}),
                }
                for (k, atom), tr in sorted(self.transitions.items())
            ],
            "self_symmetry": [{"k": k, "sym": s} for k, s in self.self_symmetry],
        }

    @staticmethod
    def from_json(obj: dict) -> "ConditioningProblem":
        return ConditioningProblem(
            q=int(obj["q"]),
            localisation={
                int(k): frozenset(v) for k, v in obj["localisation"].items()
            },
            transitions={
                (int(t["k"]), t["atom"]): Transition(
                    to=int(t["to"]),
                    sym=t.get("sym", "id"),
                    equality=bool(t.get("equality", False)),
                    target_atom=t.get("target_atom"),
                )
                for t in obj["transitions"]
            },
            self_symmetry=tuple((int(s["k"]), s["sym"]) for s in obj.get("self_symmetry", [])),
        )


@dataclass
class ConditionVerdict:
    kind: str  # optimality | ambient | localisation | dynamics | self_symmetry
    k: int
    atom: Optional[str]
    passed: bool
    margin: Optional[Bound]
    note: str = ""

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "atom": self.atom,
            "passed": self.passed,
            "margin": bound_str(self.margin) if self.margin is not None else None,
            "note": self.note,
        }


@dataclass
class VerificationReport:
    passed: bool
    conditions: list[ConditionVerdict]

    def failures(self) -> list[ConditionVerdict]:
        return [c for c in self.conditions if not c.passed]

    def min_margin(self) -> Optional[Bound]:
        vals = [c.margin for c in self.conditions if c.margin is not None]
        return min(vals) if vals else None

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "min_margin": bound_str(self.min_margin()) if self.min_margin() is not None else None,
            "conditions": [c.to_json() for c in self.conditions],
        }


def _entrywise_equal_margin(a: ConstraintMatrix, b: ConstraintMatrix) -> Bound:
    """0 when entrywise equal, else minus the largest absolute deviation."""
    worst = Fraction(0)
    for x, y in zip(a.lower + a.upper, b.lower + b.upper):
        if isinstance(x, Fraction) and isinstance(y, Fraction):
            dev = abs(x - y)
            if dev > worst:
                worst = dev
        elif x != y:
            return NEG_INF
    return -worst


def verify(
    problem: ConditioningProblem,
    candidates: Sequence[ConstraintMatrix],
    fmap: PiecewiseAffineMap,
    symmetries: dict[str, SymmetryTransform],
) -> VerificationReport:
    """Exact check of every condition.

    (a) each candidate is a fixed point of the tightening operator;
    (b) each candidate lies inside the ambient polytope;
    (c) each candidate meets exactly the atoms in its localisation set;
    (d) each listed atomic piece maps into (or onto) its target, the atom
        offset being re-derived from the map object;
    (e) declared self-symmetries hold entrywise.
    """
    if len(candidates) != problem.q:
        raise ValueError(f"expected {problem.q} candidates, got {len(candidates)}")
    alpha = fmap.alpha
    for m in candidates:
        if m.alpha != alpha:
            raise CoefficientMismatch("candidates must live on the map's coefficient matrix")

    used_syms = {tr.sym for tr in problem.transitions.values()} | {
        s for _, s in problem.self_symmetry
    }
    compat: dict[str, Optional[CompatibilityData]] = {}
    for name in sorted(used_syms):
        if name == "id":
            continue
        if name not in symmetries:
            raise IncompatibleSymmetry(f"unknown symmetry {name!r}")
        data = check_compatibility(symmetries[name], alpha)
        if data is None:
            raise IncompatibleSymmetry(f"{name!r} is not compatible with the coefficient matrix")
        compat[name] = data

    conds: list[ConditionVerdict] = []
    ambient = fmap.ambient
    opt = [optimize(m) for m in candidates]

    def target_matrix(tr: Transition) -> ConstraintMatrix:
        base = opt[tr.to - 1]
        if tr.sym != "id":
            base = apply_mod1(symmetries[tr.sym], base, compat[tr.sym])
        if tr.target_atom is not None:
            base = intersect(base, fmap.atom_matrix(tr.target_atom))
        return base

    for k in range(1, problem.q + 1):
        m = candidates[k - 1]
        om = opt[k - 1]
        margin = _entrywise_equal_margin(m, om)
        conds.append(
            ConditionVerdict("optimality", k, None, margin == 0, margin)
        )
        amb_margin = inclusion_margin(om, ambient)
        conds.append(ConditionVerdict("ambient", k, None, amb_margin >= 0, amb_margin))

        wanted = problem.localisation.get(k, frozenset())
        for label in fmap.labels:
            piece = intersect(om, fmap.atom_matrix(label))
            if label in wanted:
                margin = min(hi - lo for lo, hi in piece.bounds)
                conds.append(
                    ConditionVerdict("localisation", k, label, margin > 0, margin)
                )
            else:
                margin = max(lo - hi for lo, hi in piece.bounds)
                conds.append(
                    ConditionVerdict(
                        "localisation", k, label, margin >= 0, margin, note="must be empty"
                    )
                )

        for (kk, label), tr in sorted(problem.transitions.items()):
            if kk != k:
                continue
            piece = intersect(om, fmap.atom_matrix(label))
            if piece.has_crossing():
                conds.append(
                    ConditionVerdict(
                        "dynamics", k, label, False, None, note="piece is empty"
                    )
                )
                continue
            image = affine_image(piece, fmap.a, fmap.offset(label))
            try:
                tgt = target_matrix(tr)
            except BranchCrossing as exc:
                conds.append(
                    ConditionVerdict("dynamics", k, label, False, None, note=str(exc))
                )
                continue
            if tr.equality:
                margin = _entrywise_equal_margin(image, tgt)
                conds.append(
                    ConditionVerdict(
                        "dynamics", k, label, margin == 0, margin,
                        note=f"= {tr.sym}(P_{tr.to})",
                    )
                )
            else:
                margin = inclusion_margin(image, tgt)
                conds.append(
                    ConditionVerdict(
                        "dynamics", k, label, margin >= 0, margin,
                        note=f"in {tr.sym}(P_{tr.to})"
                        + (f" cap A_{tr.target_atom}" if tr.target_atom else ""),
                    )
                )

    for k, name in problem.self_symmetry:
        om = opt[k - 1]
        if om.has_crossing():
            conds.append(ConditionVerdict("self_symmetry", k, None, False, None, note="empty"))
            continue
        try:
            img = apply_mod1(symmetries[name], om, compat[name])
        except BranchCrossing as exc:
            conds.append(ConditionVerdict("self_symmetry", k, None, False, None, note=str(exc)))
            continue
        margin = _entrywise_equal_margin(img, om)
        conds.append(
            ConditionVerdict("self_symmetry", k, None, margin == 0, margin, note=name)
        )

    return VerificationReport(passed=all(c.passed for c in conds), conditions=conds)


def orbit_set(
    candidates: Sequence[ConstraintMatrix],
    generators: Sequence[SymmetryTransform],
    cap: int = 512,
) -> list[ConstraintMatrix]:
    """Materialize the orbit of the candidates under the generated group,
    applying the mod-1 branch valid on each member; members are deduplicated
    by tightened entries."""
    members: list[ConstraintMatrix] = []

    def push(m: ConstraintMatrix) -> bool:
        o = optimize(m)
        for u in members:
            if u.entries_equal(o):
                return False
        members.append(o)
        return True

    for m in candidates:
        push(m)
    frontier = list(members)
    while frontier:
        nxt = []
        for m in frontier:
            for g in generators:
                img = apply_mod1(g, m)
                if push(img):
                    nxt.append(img)
            if len(members) > cap:
                raise RuntimeError(f"orbit exceeded cap {cap}")
        frontier = nxt
    return members


def check_asiup(
    candidates: Sequence[ConstraintMatrix],
    generators: Sequence[SymmetryTransform],
    sigma: Optional[SymmetryTransform] = None,
) -> tuple[bool, Optional[tuple[int, int]]]:
    """Whether the orbit set avoids its image under the involution x -> 1-x:
    every pairwise intersection of an orbit member with the involution image
    of another must be empty. Returns the first offending pair as witness."""
    from .symmetry import inversion

    if not candidates:
        raise ValueError("no candidates")
    alpha = candidates[0].alpha
    if sigma is None:
        sigma = inversion(alpha.d)
    members = orbit_set(candidates, generators)
    images = [apply_mod1(sigma, u) for u in members]
    for i, u in enumerate(members):
        for j, v in enumerate(images):
            if not is_empty(intersect(u, v)):
                return False, (i, j)
    return True, None


def bisect_threshold(
    family: Callable[[Fraction], bool],
    lo,
    hi,
    tol,
    spot_checks: int = 2,
) -> tuple[Fraction, Fraction]:
    """Bracket the smallest parameter at which the family verdict flips from
    fail to pass, assuming monotone verdicts.

    Requires family(lo) false and family(hi) true; bisects on exact rational
    midpoints until hi - lo <= tol. A few interior probes plus all bisection
    evaluations are checked for monotonicity; a pass below a fail raises
    NonMonotone.
    """
    lo, hi, tol = rat(lo), rat(hi), rat(tol)
    evals: dict[Fraction, bool] = {}

    def probe(x: Fraction) -> bool:
        if x not in evals:
            evals[x] = bool(family(x))
        return evals[x]

    if probe(lo):
        raise NotBracketing(f"family already passes at lo={lo}")
    if not probe(hi):
        raise NotBracketing(f"family still fails at hi={hi}")
    for i in range(1, spot_checks + 1):
        probe(lo + (hi - lo) * Fraction(i, spot_checks + 1))
    a, b = lo, hi
    while b - a > tol:
        mid = (a + b) / 2
        if probe(mid):
            b = mid
        else:
            a = mid
    last_fail = max(x for x, ok in evals.items() if not ok)
    first_pass = min(x for x, ok in evals.items() if ok)
    if last_fail > first_pass:
        raise NonMonotone(
            f"fail at {last_fail} above pass at {first_pass}: verdicts not monotone"
        )
    return a, b


# ---------------------------------------------------------------------------
# Closed-form threshold certificates

def poly_eval(coeffs: Sequence[Fraction], x: Fraction) -> Fraction:
    """Evaluate a polynomial given leading-first coefficients."""
    acc = Fraction(0)
    for c in coeffs:
        acc = acc * x + c
    return acc


def sign_change(coeffs: Sequence[Fraction], lo, hi) -> bool:
    a, b = poly_eval(coeffs, rat(lo)), poly_eval(coeffs, rat(hi))
    return (a < 0 < b) or (b < 0 < a)


def eps_quadratic_coeffs(a) -> list[Fraction]:
    """Quadratic whose smaller root is the coupling threshold of the
    two-dimensional uniform-weight family with slope a: 2x^2 - (3a+2)x + (a+1)."""
    a = rat(a)
    return [Fraction(2), -(3 * a + 2), a + 1]


def closed_form_thresholds() -> dict[str, dict]:
    """Rational certificates for the named thresholds: each entry carries the
    defining polynomial (leading-first), a float approximation and a rational
    bracket across which the polynomial changes sign."""
    return {
        "eps_2d_a2": {
            "poly": eps_quadratic_coeffs(2),  # root (4 - sqrt(10))/2
            "approx": 0.4188611699158102,
            "bracket": (Fraction(418861, 1000000), Fraction(418862, 1000000)),
        },
        "eps_3d_first": {
            "poly": [Fraction(4), Fraction(-14), Fraction(15), Fraction(-4)],
            "approx": 0.3972152847997048,
            "bracket": (Fraction(39, 100), Fraction(2, 5)),
        },
        "eps_3d_second": {
            "poly": [Fraction(1), Fraction(-5), Fraction(2)],  # root (5 - sqrt(17))/2
            "approx": 0.4384471871911697,
            "bracket": (Fraction(438447, 1000000), Fraction(438448, 1000000)),
        },
    }
