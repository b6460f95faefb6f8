import numpy as np
import pytest
from fractions import Fraction as F

from iup.catalog import make_m1_m2, make_ma
from iup.conditioning import verify
from iup.geometry import contains_point
from iup.maps import ClusterDistribution, build_g_map
from iup.orbit import (
    AmbiguousTransition,
    NoPlateau,
    cluster,
    extract_problem,
    read_orbit_csv,
    simulate,
    write_orbit_csv,
)


def test_simulate_deterministic(tmp_path):
    g = build_g_map(ClusterDistribution.symmetric2(F(1, 3)), F(43, 100))
    o1 = simulate(g, "random:7", steps=500, transient=100)
    o2 = simulate(g, "random:7", steps=500, transient=100)
    assert np.array_equal(o1.points, o2.points)
    assert o1.labels == o2.labels
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_orbit_csv(o1, p1)
    write_orbit_csv(o2, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_simulate_requires_steps():
    g = build_g_map(ClusterDistribution.uniform(2), F(2, 5))
    with pytest.raises(ValueError):
        simulate(g, "random:1", steps=0)


def test_orbit_csv_roundtrip(tmp_path):
    g = build_g_map(ClusterDistribution.uniform(2), F(2, 5))
    o = simulate(g, "random:3", steps=200, transient=50)
    path = tmp_path / "orbit.csv"
    write_orbit_csv(o, path)
    pts, labs = read_orbit_csv(path)
    assert np.array_equal(pts, o.points)
    assert labs == o.labels


# ---------------------------------------------------------------------------
# clustering on synthetic data

def test_two_clouds():
    rng = np.random.default_rng(5)
    a = rng.uniform(0, 0.08, size=(120, 2))
    b = rng.uniform(0, 0.08, size=(120, 2)) + np.array([0.3, 0.3])
    rep = cluster(np.vstack([a, b]))
    assert rep.q == 2


def test_identical_points_single_cluster():
    pts = np.ones((50, 2)) * 0.25
    rep = cluster(pts)
    assert rep.q == 1


def test_cascade_has_no_plateau():
    # geometric cascade of spacings: the count never holds for a decade
    xs = np.cumsum(1.35 ** np.arange(40))
    pts = np.stack([xs, np.zeros_like(xs)], axis=1)
    with pytest.raises(NoPlateau):
        cluster(pts, plateau_factor=10.0)


def test_filling_orbit_is_single_cluster():
    # weak coupling: the orbit fills the square and the sweep settles on one
    # cluster over a wide threshold interval
    g = build_g_map(ClusterDistribution.uniform(2), F(1, 100))
    o = simulate(g, "random:11", steps=3000, transient=500)
    rep = cluster(o)
    assert rep.q == 1


def test_cluster_count_stable_under_doubling():
    b = make_ma(F(1, 3), 2, F(43, 100))
    seeds = ["1/4", "9/20"]
    q = []
    for steps in (2000, 4000):
        o = simulate(b.fmap, seeds, steps=steps, transient=1000)
        q.append(cluster(o).q)
    assert q[0] == q[1] == 2


# ---------------------------------------------------------------------------
# extraction

def _extract_2d(eps=F(43, 100), steps=4000):
    b = make_ma(F(1, 3), 2, eps)
    orb = simulate(b.fmap, ["1/4", "9/20"], steps=steps, transient=1000)
    rep = cluster(orb)
    syms = {"id": b.symmetries["id"], "sigma_321": b.symmetries["sigma_321"]}
    problem, rep = extract_problem(orb, rep, syms)
    return b, orb, problem, rep


def test_extraction_matches_single_polytope_problem():
    b, orb, problem, rep = _extract_2d()
    assert problem.q == 1
    assert problem.localisation[1] == frozenset({"001", "011"})
    assert problem.transitions[(1, "001")].to == 1
    assert problem.transitions[(1, "001")].sym == "sigma_321"
    assert problem.transitions[(1, "011")].to == 1
    assert problem.transitions[(1, "011")].sym == "id"
    assert problem.self_symmetry == ()


def test_extraction_verifies_against_catalog():
    b, orb, problem, rep = _extract_2d()
    assert verify(problem, b.candidates, b.fmap, b.symmetries).passed


def test_extracted_localisation_never_overclaims():
    # the orbit may undersample an atom but must not invent one
    b, orb, problem, rep = _extract_2d()
    declared = b.problem.localisation[1]
    assert problem.localisation[1] <= declared


def test_orbit_stays_in_invariant_set():
    from iup.conditioning import orbit_set

    b, orb, problem, rep = _extract_2d()
    members = orbit_set(b.candidates, [b.symmetries["sigma_321"]])
    for p in orb.points[::7]:
        x = [F(float(v)) for v in p]
        ok = any(
            all(
                m.lower[i] <= m.alpha.row_dot(i, x) <= m.upper[i]
                for i in range(m.alpha.e)
            )
            for m in members
        )
        assert ok


def test_extraction_first_bifurcation_structure():
    b = make_m1_m2(F(2, 5))
    seed = [F(87, 100), F(13, 25), F(1, 10)]
    assert contains_point(b.candidates[1], seed)
    orb = simulate(b.fmap, [str(v) for v in seed], steps=6000, transient=1000)
    # six clusters at this sample size; the decade criterion needs more points
    # than fit in memory for single linkage, so the run uses a half-decade
    rep = cluster(orb, plateau_factor=5.0)
    assert rep.q == 6
    syms = {n: b.symmetries[n] for n in ("id", "sigma_4231", "sigma_1324", "sigma_4321")}
    problem, rep = extract_problem(orb, rep, syms)
    assert problem.q == 2
    assert problem.localisation[1] == b.problem.localisation[2]  # the seeded pair member
    assert (1, "sigma_4321") in problem.self_symmetry
    assert len(problem.localisation[2]) == 2
    assert problem.transitions[(1, "110212")] .to == 1
    assert problem.transitions[(1, "110212")].sym == "id"
    assert len(problem.transitions) == 8


def test_extraction_report_fields():
    b, orb, problem, rep = _extract_2d()
    assert rep.representatives and rep.localisation
    assert all(k == 1 for k, _ in problem.transitions)
    js = rep.to_json()
    assert js["q"] == 2 and js["trace"]


# ---------------------------------------------------------------------------
# failure modes

def _fake_map_with_offset(off):
    from dataclasses import replace

    g = build_g_map(ClusterDistribution.uniform(2), F(2, 5))
    atoms = tuple((lab, m, tuple(F(v) for v in off)) for lab, m, _ in g.atoms)
    return replace(g, atoms=atoms)


def test_simulate_escape_detection():
    from iup.orbit import EscapedAmbient

    bad = _fake_map_with_offset([2, 2])  # every atom pushes out of the cube
    with pytest.raises(EscapedAmbient):
        simulate(bad, ["1/4", "1/4"], steps=10, transient=0)


def _hand_orbit(points, labels, fmap):
    from iup.orbit import Orbit

    return Orbit(
        points=np.asarray(points, dtype=float), labels=list(labels), d=2, fmap=fmap,
        seed=tuple(points[0]), seed_spec="hand", steps=len(points), transient=0,
        dropped_boundary=0, boundary_tol=1e-9,
    )


def test_unassigned_image_raises():
    from iup.orbit import ClusterReport, UnassignedImage
    from iup.symmetry import identity

    rng = np.random.default_rng(1)
    cloud = rng.uniform(0.1, 0.14, size=(40, 2))
    fmap = _fake_map_with_offset([F(1, 2), F(1, 2)])  # images land far away
    orb = _hand_orbit(cloud, ["000"] * 40, fmap)
    rep = ClusterReport(
        q=1, assignments=np.zeros(40, dtype=int), cut_threshold=0.02,
        plateau=(0.02, 0.2), trace=[],
    )
    with pytest.raises(UnassignedImage):
        extract_problem(orb, rep, {"id": identity(2)}, min_hits=1)


def test_ambiguous_transition_raises():
    from iup.orbit import AmbiguousTransition, ClusterReport
    from iup.symmetry import identity

    rng = np.random.default_rng(2)
    a = rng.uniform(0.10, 0.14, size=(40, 2))
    b = a + np.array([0.1, 0.0])  # two nearby clusters, never folded (no syms)
    pts = np.vstack([a, b])
    # images of cluster A sit between A and B within the (huge) cut
    fmap = _fake_map_with_offset([F(1, 20), F(0)])
    orb = _hand_orbit(pts, ["000"] * 80, fmap)
    rep = ClusterReport(
        q=2, assignments=np.array([0] * 40 + [1] * 40), cut_threshold=0.5,
        plateau=(0.1, 0.5), trace=[],
    )
    with pytest.raises(AmbiguousTransition):
        extract_problem(orb, rep, {"id": identity(2)}, min_hits=1)
