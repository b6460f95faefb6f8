"""Acceptance suite: one test per criterion, each printing a PASS line with
its wall time (run with -s to see them). Tolerances are pinned here; nothing
is deferred to later calibration."""

import random
import time
from contextlib import contextmanager
from fractions import Fraction as F

import oracle
from iup.catalog import (
    continue_problem2,
    make_m1_m2,
    make_ma,
    make_p4,
    p_star,
    threshold_family,
    verify_bundle,
)
from iup.conditioning import (
    bisect_threshold,
    check_asiup,
    closed_form_thresholds,
    orbit_set,
    poly_eval,
    sign_change,
    verify,
)
from iup.geometry import (
    affine_image,
    build_coefficient_matrix,
    constraint_matrix,
    contains_point,
    intersect,
    is_empty,
    optimize,
)
from iup.orbit import cluster, extract_problem, simulate
from iup.partition import enumerate_atoms
from iup.symmetry import apply_to_matrix, check_compatibility

TOL = F(1, 10**6)


@contextmanager
def criterion(num, budget_s, summary):
    t0 = time.time()
    yield
    dt = time.time() - t0
    assert dt < budget_s, f"criterion {num} exceeded its {budget_s}s budget ({dt:.1f}s)"
    print(f"criterion {num}: PASS ({dt:.2f}s) - {summary}")


def test_criterion_1_partition_counts():
    with criterion(1, 1.0, "6 atoms in the plane, 26 in space, displayed matrices exact"):
        atoms2 = enumerate_atoms(2)
        assert [lab for lab, _ in atoms2] == ["000", "001", "011", "101", "111", "112"]
        atoms3 = dict(enumerate_atoms(3))
        assert len(atoms3) == 26
        half = F(1, 2)
        displayed = {
            "000101": ([0, 0, 0, half, 0, half], [half, half, half, 1, half, 1]),
            "100101": ([half, 0, 0, half, 0, half], [1, half, half, F(3, 2), half, F(3, 2)]),
            "100111": ([half, 0, 0, half, half, 1], [1, half, half, F(3, 2), 1, F(3, 2)]),
            "100112": ([half, 0, 0, 1, half, F(3, 2)], [1, half, half, F(3, 2), 1, 2]),
            "110111": ([half, half, 0, 1, half, 1], [1, 1, half, F(3, 2), 1, F(3, 2)]),
            "110112": ([half, half, 0, 1, half, F(3, 2)], [1, 1, half, F(3, 2), F(3, 2), 2]),
            "110212": ([half, half, 0, F(3, 2), half, F(3, 2)], [1, 1, half, 2, F(3, 2), F(5, 2)]),
        }
        for lab, (lo, hi) in displayed.items():
            m = atoms3[lab]
            assert list(m.lower) == [F(v) for v in lo], lab
            assert list(m.upper) == [F(v) for v in hi], lab


def test_criterion_2_single_family_threshold():
    with criterion(2, 10.0, "threshold brackets (4-sqrt(10))/2 at 1e-6; 0.43 pass / 0.41 fail"):
        assert verify_bundle(make_ma(F(1, 3), 2, F(43, 100))).passed
        assert not verify_bundle(make_ma(F(1, 3), 2, F(41, 100))).passed
        pred = threshold_family("ma", {"varrho": F(1, 3), "a": 2})
        lo, hi = bisect_threshold(pred, F(2, 5), F(49, 100), TOL)
        assert hi - lo <= TOL
        # (4 - sqrt(10))/2 is the smaller root of 2x^2 - 8x + 3
        assert sign_change([F(2), F(-8), F(3)], lo, hi)
        assert abs((lo + hi) / 2 - F(41886116991581, 10**14)) < F(1, 10**5)


def test_criterion_3_unit_slope_degeneracy():
    with criterion(3, 1.0, "unit slope collapses the sum rows; empty candidate"):
        b = make_ma(F(1, 3), 1, F(43, 100))
        m = b.candidates[0]
        assert m.lower[2] == m.upper[2]  # the only sum row: lower == upper
        assert is_empty(m)


def test_criterion_4_pair_threshold():
    with criterion(4, 30.0, "pair family: 0.40 pass / 0.39 fail; cubic root bracketed"):
        assert verify_bundle(make_m1_m2(F(2, 5))).passed
        assert not verify_bundle(make_m1_m2(F(39, 100))).passed
        pred = threshold_family("m1m2", {})
        lo, hi = bisect_threshold(pred, F(38, 100), F(42, 100), TOL)
        assert hi - lo <= TOL
        cubic = [F(4), F(-14), F(15), F(-4)]
        assert sign_change(cubic, lo, hi)
        assert poly_eval(cubic, F(39, 100)) < 0 < poly_eval(cubic, F(2, 5))


def test_criterion_5_second_bifurcation_threshold():
    with criterion(5, 60.0, "ten-direction family: 0.44 pass / 0.43 fail; (5-sqrt(17))/2 bracketed"):
        assert verify_bundle(make_p4(F(44, 100))).passed
        assert not verify_bundle(make_p4(F(43, 100))).passed
        pred = threshold_family("p4", {})
        lo, hi = bisect_threshold(pred, F(42, 100), F(45, 100), TOL)
        assert hi - lo <= TOL
        assert sign_change([F(1), F(-5), F(2)], lo, hi)

        eps = F(44, 100)
        b = make_p4(eps)
        gens = [b.symmetries[n] for n in b.orbit_generators]
        ok, _ = check_asiup(b.candidates, gens)
        assert ok
        members = orbit_set(b.candidates, gens)
        ax3 = b.alpha.axis_row(2)
        p = p_star(eps)
        # the vertical extent of the orbit set: pairs of members top out at
        # (1-eps)^2/3, p* and 1-p*; the inverted copy of the base polytope
        # starts exactly at 1 - (1-eps)^2/3, strictly above everything
        sups = sorted(m.upper[ax3] for m in members)
        assert sups == sorted([(1 - eps) ** 2 / 3, (1 - eps) ** 2 / 3, p, p, 1 - p, 1 - p])
        sup_x3 = sups[-1]
        assert sup_x3 == 1 - p
        assert sup_x3 < 1 - (1 - eps) ** 2 / 3
        inf_inverted_base = 1 - b.candidates[0].upper[ax3]
        assert 1 - (1 - eps) ** 2 / 3 <= inf_inverted_base


def test_criterion_6_asymmetry_of_single_family():
    with criterion(6, 10.0, "orbit set avoids its inverted copy at (1/3, 2, 0.43)"):
        b = make_ma(F(1, 3), 2, F(43, 100))
        ok, wit = check_asiup(b.candidates, [b.symmetries["sigma_321"]])
        assert ok and wit is None
        m = b.candidates[0]
        assert m.upper[0] < 1 - m.upper[0]


def test_criterion_7_continuation_invariants():
    with criterion(7, 30.0, "continuation matches the symmetric pair at 0; edge sum is 1"):
        from iup.symmetry import sigma_321

        for a in (F(2), F(3, 2)):
            b0 = continue_problem2(F(1, 3), a, F(45, 100), 0)
            ma = make_ma(F(1, 3), a, F(45, 100)).candidates[0]
            assert b0.candidates[0].entries_equal(ma)
            data = check_compatibility(sigma_321(), b0.alpha)
            assert b0.candidates[1].entries_equal(optimize(apply_to_matrix(data, ma)))
        # 20 sampled feasible asymmetries at an interior slope (the admissible
        # window there brackets 0.00553, located by bisection)
        count = 0
        for k in list(range(-10, 0)) + list(range(1, 11)):
            delta = F(k, 4000)
            bd = continue_problem2(F(1, 3), F(3, 2), F(45, 100), delta)
            assert verify_bundle(bd).passed, delta
            assert bd.candidates[0].upper[0] + bd.candidates[1].upper[0] == 1
            count += 1
        assert count == 20


def test_criterion_8_kernel_oracle_suite():
    with criterion(8, 300.0, "10^4 random matrices agree with the vertex oracle"):
        rng = random.Random(2024)
        plan = [
            (1, 0, 12), (2, 1, 30), (2, 2, 30), (2, 4, 18),
            (3, 1, 24), (3, 3, 18), (4, 2, 12), (4, 4, 4), (4, 6, 2),
        ]
        cases = 0
        for d, extra, n_alphas in plan:
            for _ in range(n_alphas):
                rows = oracle.random_alpha_rows(rng, d, extra)
                alpha = build_coefficient_matrix(rows)
                for _ in range(67):
                    lower, upper = oracle.random_bounds(rng, rows)
                    m = constraint_matrix(alpha, list(zip(lower, upper)))
                    o = optimize(m)
                    # idempotent on every case: entrywise fixed point when the
                    # set is nonempty, stable crossing when it is empty
                    again = optimize(constraint_matrix(alpha, list(zip(o.lower, o.upper))))
                    empty = o.has_crossing()
                    assert again.has_crossing() if empty else again.entries_equal(o)
                    assert is_empty(m) == empty
                    assert empty == (not oracle.feasible_open(rows, lower, upper))
                    if not empty:
                        assert [tuple(b) for b in zip(o.lower, o.upper)] == (
                            oracle.row_extrema(rows, lower, upper)
                        )
                    cases += 1
        assert cases >= 10_000


def test_criterion_9_extraction_loop():
    with criterion(9, 30.0, "orbit-extracted problem matches and the candidate verifies"):
        b = make_ma(F(1, 3), 2, F(43, 100))
        seed = [F(1, 4), F(9, 20)]
        assert contains_point(b.candidates[0], seed)
        orb = simulate(b.fmap, [str(v) for v in seed], steps=4000, transient=1000)
        assert orb.n == 4000
        rep = cluster(orb)
        syms = {"id": b.symmetries["id"], "sigma_321": b.symmetries["sigma_321"]}
        problem, rep = extract_problem(orb, rep, syms)
        assert problem.q == 1
        assert problem.localisation[1] == frozenset({"001", "011"})
        assert problem.transitions[(1, "001")].to == 1
        assert problem.transitions[(1, "001")].sym == "sigma_321"
        assert problem.transitions[(1, "011")].to == 1
        assert problem.transitions[(1, "011")].sym == "id"
        assert verify(problem, b.candidates, b.fmap, b.symmetries).passed


def test_criterion_10_membership_semantics():
    with criterion(10, 60.0, "membership invariants hold on 10^3 points per case"):
        rng = random.Random(55)
        b = make_ma(F(1, 3), 2, F(43, 100))
        alpha = b.alpha
        cases = [
            constraint_matrix(
                alpha, [(0, F(1, 2)), (0, F(1, 2)), (F(1, 2), 2), (F(1, 2), 2), (F(1, 2), 1)]
            ),
            b.candidates[0],
            optimize(intersect(b.candidates[0], b.fmap.atom_matrix("011"))),
        ]
        sig = b.symmetries["sigma_321"]
        data = check_compatibility(sig, alpha)
        a_scale, shift = F(57, 50), [F(1, 7), F(-1, 9)]
        for m in cases:
            m2 = cases[0]
            inter = intersect(m, m2)
            img = affine_image(m, a_scale, shift)
            sym = apply_to_matrix(data, m)
            violations = 0
            for _ in range(1000):
                x = [F(rng.randint(-1200, 2400), 1200) for _ in range(2)]
                if contains_point(inter, x) != (contains_point(m, x) and contains_point(m2, x)):
                    violations += 1
                y = [a_scale * v + s for v, s in zip(x, shift)]
                if contains_point(img, y) != contains_point(m, x):
                    violations += 1
                if contains_point(sym, sig.apply_point(x)) != contains_point(m, x):
                    violations += 1
            assert violations == 0
