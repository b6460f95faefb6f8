import random
from fractions import Fraction as F

import pytest

from iup.catalog import (
    DeltaFeasibility,
    DeltaInfeasible,
    alpha_second_bifurcation,
    continue_problem2,
    m1_m2_entries,
    ma_entries,
    make_m1_m2,
    make_ma,
    make_p4,
    p_star,
    r_coupling,
    sample_delta_box,
    verify_bundle,
)
from iup.geometry import includes, is_empty, optimize
from iup.maps import ParameterOutOfRange
from iup.symmetry import apply_to_matrix, check_compatibility, sigma_4321


def test_p_star_and_fixed_point_identity():
    for eps in (F(2, 5), F(43, 100), F(49, 100)):
        p = p_star(eps)
        assert p == 1 - eps / 2 - 2 * (1 - eps) * p
        assert F(1, 4) < p < F(1, 2)
        assert 1 - 3 * p < 0 < 1 - 2 * p


def test_r_coupling_uniform_cancellation():
    for eps in (F(1, 10), F(43, 100), F(49, 100)):
        assert r_coupling(F(1, 3), eps) == F(1, 3)
    assert r_coupling(F(2, 5), F(1, 4)) == F(4, 5) / F(5, 2)


def test_ma_entries_display_values():
    rows = ma_entries(F(1, 3), 2, F(43, 100))
    assert rows[0] == (F(43, 300), F(1, 3))
    assert rows[1] == (F(1, 3), F(8249, 15000))
    assert rows[2] == (F(143, 200), F(1))
    assert rows[3] == (F(1), F(13249, 10000))


def test_ma_vertex_is_parameter_independent():
    # the uniform-weight candidate pins the corner (1/3, 1/3) for every slope
    for a in (F(3, 2), F(2)):
        for eps in (F(42, 100), F(45, 100)):
            rows = ma_entries(F(1, 3), a, eps)
            assert rows[0][1] == F(1, 3)
            assert rows[1][0] == F(1, 3)
            # and the corner saturates both slope rows
            assert rows[2][1] == (1 + a) * F(1, 3)
            assert rows[3][0] == (1 + a) * F(1, 3)


def test_ma_degenerate_at_unit_slope():
    b = make_ma(F(1, 3), 1, F(43, 100))
    m = b.candidates[0]
    assert m.lower[2] == m.upper[2]
    assert is_empty(m)


def test_ma_candidate_is_tightened_in_regime():
    b = make_ma(F(1, 3), 2, F(43, 100))
    m = b.candidates[0]
    assert optimize(m).entries_equal(m)
    # the four displayed rows survive the embedding into the extended matrix
    rows = ma_entries(F(1, 3), 2, F(43, 100))
    assert list(zip(m.lower, m.upper))[:4] == rows


def test_ma_parameter_validation():
    with pytest.raises(ParameterOutOfRange):
        make_ma(F(1, 2), 2, F(43, 100))
    with pytest.raises(ParameterOutOfRange):
        make_ma(F(1, 3), F(1, 2), F(43, 100))
    with pytest.raises(ParameterOutOfRange):
        make_ma(F(1, 3), 2, F(1, 2))


def test_nesting_in_slope():
    # solutions shrink as the slope drops (different coefficient matrices, so
    # compare by sampled membership); left/top edges are slope-independent
    from iup.geometry import contains_point

    ma2 = make_ma(F(1, 3), 2, F(46, 100)).candidates[0]
    ma32 = make_ma(F(1, 3), F(3, 2), F(46, 100)).candidates[0]
    assert ma32.lower[0] == ma2.lower[0]
    assert ma32.upper[1] == ma2.upper[1]
    rng = random.Random(13)
    inside = 0
    for _ in range(4000):
        x = [F(rng.randint(1, 599), 600) for _ in range(2)]
        if contains_point(ma32, x):
            inside += 1
            assert contains_point(ma2, x)
    assert inside > 20


# ---------------------------------------------------------------------------
# first-bifurcation pair

def test_m1_m2_self_symmetry_sums():
    # the second candidate is invariant under the orientation-reversing
    # relabelling, which forces the displayed entry sums
    for eps in (F(2, 5), F(44, 100)):
        for deltas in ((0,) * 5, (F(1, 100), F(1, 400), F(1, 500), F(1, 400), F(1, 300))):
            _, m2 = m1_m2_entries(eps, deltas)
            assert m2[0][0] + m2[2][1] == 1
            assert m2[0][1] + m2[2][0] == 1
            assert m2[1][0] + m2[1][1] == 1
            assert m2[3][0] + m2[4][1] == 2
            assert m2[3][1] + m2[4][0] == 2
            assert m2[5][0] + m2[5][1] == 3


def test_m2_fixed_by_orientation_reversal():
    b = make_m1_m2(F(2, 5))
    data = check_compatibility(sigma_4321(), b.alpha)
    m2 = b.candidates[1]
    assert apply_to_matrix(data, m2).entries_equal(m2)


def test_m1_m2_candidates_tightened_at_feasible_point():
    b = make_m1_m2(F(2, 5))
    for m in b.candidates:
        assert optimize(m).entries_equal(m)


def test_delta_shape_rejection():
    with pytest.raises(DeltaInfeasible):
        make_m1_m2(F(2, 5), (F(1, 100), F(1, 1000), F(1, 100), F(1, 1000), F(1, 100)))
    with pytest.raises(DeltaInfeasible):
        make_m1_m2(F(2, 5), (-F(1, 100), 0, 0, 0, 0))


def test_delta_feasibility_full_system():
    eps = F(2, 5)
    assert DeltaFeasibility(eps=eps, deltas=(F(0),) * 5).ok
    # below the first-bifurcation threshold even the origin is infeasible
    bad = DeltaFeasibility(eps=F(39, 100), deltas=(F(0),) * 5)
    assert any("(1-eps)^2" in v for v in bad.violations())


def test_delta_box_sampler_feasible_and_nesting():
    rng = random.Random(9)
    eps = F(42, 100)
    base = make_m1_m2(eps)
    hits = 0
    for _ in range(20):
        deltas = sample_delta_box(eps, rng)
        feas = DeltaFeasibility(eps=eps, deltas=deltas)
        assert feas.ok, feas.violations()
        b = make_m1_m2(eps, deltas)
        for nested, outer in zip(b.candidates, base.candidates):
            assert includes(nested, outer)
        if any(d != 0 for d in deltas):
            hits += 1
    assert hits > 10


def test_delta_box_sampled_candidates_verify():
    rng = random.Random(33)
    eps = F(42, 100)
    for _ in range(3):
        deltas = sample_delta_box(eps, rng)
        assert verify_bundle(make_m1_m2(eps, deltas)).passed, deltas


# ---------------------------------------------------------------------------
# second-bifurcation candidate

def test_second_bifurcation_alpha_rows():
    eps = F(44, 100)
    alpha = alpha_second_bifurcation(eps)
    assert alpha.e == 10 and alpha.d == 3
    p = p_star(eps)
    assert alpha.rows[7] == (1 - p, 1 - 2 * p, 1 - 3 * p)
    assert alpha.rows[9] == (-p, -2 * p, 1 - 3 * p)


def test_p4_candidate_nonempty_and_tight():
    b = make_p4(F(44, 100))
    m = b.candidates[0]
    assert not is_empty(m)
    assert optimize(m).entries_equal(m)


def test_p4_empty_analysis_not_triggered_below_threshold():
    # the candidate polytope itself stays nonempty below the threshold; the
    # dynamics conditions are what fail there
    b = make_p4(F(43, 100))
    assert not is_empty(b.candidates[0])


def test_p4_bundle_roundtrip():
    # the weighted directions depend on the coupling, so the round trip must
    # rebuild the same ten-row matrix and the same verdict
    from iup.catalog import CatalogBundle

    b = make_p4(F(44, 100))
    back = CatalogBundle.from_json(b.to_json())
    assert back.alpha == b.alpha
    assert all(x.entries_equal(y) for x, y in zip(back.candidates, b.candidates))
    assert verify_bundle(back).passed


# ---------------------------------------------------------------------------
# continuation pair

def test_continuation_matches_symmetric_solution_at_zero():
    from iup.symmetry import sigma_321

    b0 = continue_problem2(F(1, 3), 2, F(45, 100), 0)
    ma = make_ma(F(1, 3), 2, F(45, 100)).candidates[0]
    assert b0.candidates[0].entries_equal(ma)
    data = check_compatibility(sigma_321(), b0.alpha)
    assert b0.candidates[1].entries_equal(optimize(apply_to_matrix(data, ma)))


def test_continuation_sum_invariant():
    rng = random.Random(77)
    for _ in range(20):
        delta = F(rng.randint(-60, 60), 1000)
        b = continue_problem2(F(1, 3), F(3, 2), F(45, 100), delta)
        assert b.candidates[0].upper[0] + b.candidates[1].upper[0] == 1


def test_continuation_verifies_for_small_delta_interior_slope():
    # at an interior slope the admissible asymmetry is positive ...
    assert verify_bundle(continue_problem2(F(1, 3), F(3, 2), F(45, 100), F(1, 250))).passed
    assert verify_bundle(continue_problem2(F(1, 3), F(3, 2), F(45, 100), -F(1, 250))).passed
    # ... and large asymmetry breaks the pair
    assert not verify_bundle(continue_problem2(F(1, 3), F(3, 2), F(45, 100), F(1, 25))).passed


def test_continuation_empirical_delta_window():
    # frozen bracket located by bisection: the pair verifies iff |delta| is
    # below roughly 0.005535 at (varrho, a, eps) = (1/3, 3/2, 9/20)
    lo, hi = F(1417, 256000), F(5677, 1024000)
    assert verify_bundle(continue_problem2(F(1, 3), F(3, 2), F(45, 100), lo)).passed
    assert not verify_bundle(continue_problem2(F(1, 3), F(3, 2), F(45, 100), hi)).passed


def test_boundary_slope_admits_no_asymmetry():
    # at the maximal slope one inclusion is tight for every coupling, so any
    # asymmetry breaks it; the symmetric pair itself still verifies
    assert verify_bundle(continue_problem2(F(1, 3), 2, F(45, 100), 0)).passed
    assert not verify_bundle(continue_problem2(F(1, 3), 2, F(45, 100), F(1, 1000))).passed


def test_continuation_parameter_validation():
    with pytest.raises(ParameterOutOfRange):
        continue_problem2(F(1, 3), 2, F(45, 100), F(1, 2))
    with pytest.raises(ParameterOutOfRange):
        continue_problem2(F(1, 3), 1, F(45, 100), 0)
