"""Floating-point orbit simulation, cluster detection and problem extraction.

This is the only inexact module: orbits are iterated in double precision and
everything extracted from them is combinatorial (cluster count, atom labels,
transition targets, symmetry indices), so float noise cannot leak into the
exact verification path.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .conditioning import ConditioningProblem, Transition
from .maps import PiecewiseAffineMap
from .partition import sum_ranges
from .symmetry import SymmetryTransform


class EscapedAmbient(Exception):
    pass


class NoPlateau(Exception):
    """The cluster count never stabilizes over the requested threshold span."""


class AmbiguousTransition(Exception):
    """An atomic piece's image matches several inequivalent targets."""


class UnassignedImage(Exception):
    """An atomic piece's image lands close to no cluster."""


@dataclass
class Orbit:
    points: np.ndarray  # retained points, shape (n, d)
    labels: list[str]  # atom label per retained point
    d: int
    fmap: PiecewiseAffineMap
    seed: tuple[float, ...]
    seed_spec: str
    steps: int
    transient: int
    dropped_boundary: int
    boundary_tol: float

    @property
    def n(self) -> int:
        return len(self.points)


def _seed_point(seed, d: int) -> tuple[tuple[float, ...], str]:
    if isinstance(seed, str) and seed.startswith("random:"):
        rng = random.Random(int(seed.split(":", 1)[1]))
        return tuple(rng.uniform(0.05, 0.95) for _ in range(d)), seed
    pt = tuple(float(Fraction(str(v))) for v in seed)
    return pt, ",".join(str(v) for v in seed)


def _float_label(x: np.ndarray, ranges, tol: float) -> tuple[Optional[str], bool]:
    """Atom label of a float point; flags proximity to a discontinuity."""
    digits = []
    near = False
    for i, j in ranges:
        s = float(np.sum(x[i - 1 : j]))
        if abs((s - 0.5) - round(s - 0.5)) < tol:
            near = True
        digits.append(str(int(math.floor(s + 0.5))))
    return "".join(digits), near


def simulate(
    fmap: PiecewiseAffineMap,
    seed,
    steps: int = 4000,
    transient: int = 1000,
    boundary_tol: float = 1e-9,
    escape_tol: float = 1e-6,
) -> Orbit:
    """Iterate in double precision, drop the transient, and retain points that
    keep a safe distance from every discontinuity plane (dropped points are
    counted but iteration continues through them)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    d = fmap.d
    x0, spec = _seed_point(seed, d)
    a_f, offsets = fmap.float_tables()
    ranges = sum_ranges(d)
    atom_labels = set(fmap.labels)
    x = np.array(x0, dtype=float)
    pts: list[np.ndarray] = []
    labs: list[str] = []
    dropped = 0
    for t in range(steps + transient):
        if np.any(x < -escape_tol) or np.any(x > 1 + escape_tol):
            raise EscapedAmbient(f"orbit left the cube at step {t}: {x}")
        label, near = _float_label(x, ranges, boundary_tol)
        if label not in offsets:
            # numerically on the wrong side of a boundary; treat as a drop and
            # nudge via the nearest valid atom by re-rounding without tolerance
            raise EscapedAmbient(f"point {x} has no atom (label {label})")
        if t >= transient:
            if near:
                dropped += 1
            else:
                pts.append(x.copy())
                labs.append(label)
        x = a_f * x + offsets[label]
    return Orbit(
        points=np.array(pts) if pts else np.zeros((0, d)),
        labels=labs,
        d=d,
        fmap=fmap,
        seed=x0,
        seed_spec=spec,
        steps=steps,
        transient=transient,
        dropped_boundary=dropped,
        boundary_tol=boundary_tol,
    )


def write_orbit_csv(orbit: Orbit, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(orbit.d)] + ["atom"])
        for p, lab in zip(orbit.points, orbit.labels):
            w.writerow([repr(float(v)) for v in p] + [lab])


def read_orbit_csv(path) -> tuple[np.ndarray, list[str]]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        d = len(header) - 1
        pts, labs = [], []
        for row in rd:
            pts.append([float(v) for v in row[:d]])
            labs.append(row[d])
    return np.array(pts), labs


@dataclass
class ClusterReport:
    q: int
    assignments: np.ndarray  # cluster index per point, 0-based
    cut_threshold: float
    plateau: tuple[float, float]
    trace: list[tuple[float, int]]  # (threshold, count) sweep, descending
    localisation: dict[int, list[str]] = field(default_factory=dict)
    transitions: dict = field(default_factory=dict)
    symmetry_relations: list = field(default_factory=list)
    self_symmetries: list = field(default_factory=list)
    representatives: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "cut_threshold": self.cut_threshold,
            "plateau": list(self.plateau),
            "cluster_sizes": np.bincount(self.assignments).tolist() if len(self.assignments) else [],
            "trace": [[t, c] for t, c in self.trace],
            "localisation": {str(k): v for k, v in self.localisation.items()},
            "transitions": [
                {"k": k, "atom": atom, "to": to, "sym": sym}
                for (k, atom), (to, sym) in sorted(self.transitions.items())
            ],
            "symmetry_relations": self.symmetry_relations,
            "self_symmetries": self.self_symmetries,
            "representatives": self.representatives,
        }


def cluster(
    orbit,
    plateau_factor: float = 10.0,
    grid_steps: int = 64,
    max_count_fraction: float = 0.5,
) -> ClusterReport:
    """Single-linkage sweep over a geometric grid of distance thresholds, from
    the bounding-box diameter downward. The accepted count is the first
    (largest-threshold) run of constant count whose endpoints span a ratio of
    at least plateau_factor and whose count stays well below the point count.
    """
    orbit_points = orbit.points if isinstance(orbit, Orbit) else np.asarray(orbit)
    n = len(orbit_points)
    if n == 0:
        raise ValueError("empty orbit")
    if n == 1:
        return ClusterReport(1, np.zeros(1, dtype=int), 0.0, (0.0, 0.0), [])
    dists = pdist(orbit_points)
    diameter = float(dists.max())
    if diameter == 0.0:
        return ClusterReport(1, np.zeros(n, dtype=int), 0.0, (0.0, 0.0), [])
    link = linkage(dists, method="single")
    merge_heights = np.sort(link[:, 2])
    positive = merge_heights[merge_heights > 0]
    t_min = float(positive.min()) / 2 if len(positive) else diameter * 1e-9
    t_min = max(t_min, diameter * 1e-12)
    ratio = (t_min / diameter) ** (1.0 / (grid_steps - 1))
    grid = [diameter * ratio**k for k in range(grid_steps)]
    counts = [int(n - np.searchsorted(merge_heights, t, side="right")) for t in grid]
    trace = list(zip(grid, counts))

    cap = max(1, int(n * max_count_fraction))
    i = 0
    while i < grid_steps:
        j = i
        while j + 1 < grid_steps and counts[j + 1] == counts[i]:
            j += 1
        span = grid[i] / grid[j]
        if counts[i] <= cap and j > i and span >= plateau_factor:
            cut = math.sqrt(grid[i] * grid[j])
            q = counts[i]
            assign = fcluster(link, t=cut, criterion="distance") - 1
            assert assign.max() + 1 == q, (assign.max() + 1, q)
            return ClusterReport(
                q=q,
                assignments=assign,
                cut_threshold=cut,
                plateau=(grid[j], grid[i]),
                trace=trace,
            )
        i = j + 1
    raise NoPlateau(
        f"no threshold run of ratio >= {plateau_factor} with a stable count; "
        f"trace head: {trace[:8]}"
    )


def _sym_float(sym: SymmetryTransform) -> tuple[np.ndarray, np.ndarray]:
    lin = np.array([[float(v) for v in row] for row in sym.linear])
    off = np.array([float(v) for v in sym.offset])
    return lin, off


def _apply_sym_points(sym: SymmetryTransform, pts: np.ndarray) -> np.ndarray:
    lin, off = _sym_float(sym)
    return (pts @ lin.T + off) % 1.0


def _directed_hausdorff(src: np.ndarray, dst_tree: cKDTree) -> float:
    dd, _ = dst_tree.query(src)
    return float(np.max(dd))


def _set_distance(a: np.ndarray, b: np.ndarray) -> float:
    ta, tb = cKDTree(a), cKDTree(b)
    return max(_directed_hausdorff(a, tb), _directed_hausdorff(b, ta))


def extract_problem(
    orbit: Orbit,
    report: ClusterReport,
    symmetries: dict[str, SymmetryTransform],
    min_hits: int = 5,
    unique_factor: float = 10.0,
) -> tuple[ConditioningProblem, ClusterReport]:
    """Turn clusters into a conditioning problem.

    Clusters that are symmetry images of others are folded onto one
    representative per class (their conditions are redundant). The class
    containing the cluster nearest the seed is represented by that cluster;
    other classes by their earliest-visited member. For each representative
    and each atom it charges, the one-step images of the points must match a
    unique representative-plus-symmetry target; candidate targets that are the
    same point set (cluster self-symmetries) are collapsed before uniqueness
    is required.
    """
    pts = orbit.points
    labs = orbit.labels
    q0 = report.q
    clusters = [pts[report.assignments == c] for c in range(q0)]
    cut = max(report.cut_threshold, 1e-12)

    sym_items = [(n, s) for n, s in symmetries.items() if n != "id"]

    # fold symmetry-image clusters into classes
    parent = list(range(q0))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    relations = []
    for jj in range(q0):
        for kk in range(jj + 1, q0):
            for name, sym in sym_items:
                if _set_distance(_apply_sym_points(sym, clusters[jj]), clusters[kk]) <= cut:
                    relations.append({"from": jj, "to": kk, "sym": name})
                    ra, rb = find(jj), find(kk)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
                    break

    # representative choice: seed-nearest cluster for the seed's class,
    # earliest-visited member elsewhere
    seed = np.array(orbit.seed, dtype=float)
    seed_cluster = min(
        range(q0), key=lambda c: float(np.min(np.linalg.norm(clusters[c] - seed, axis=1)))
    )
    first_visit = {}
    for idx in range(len(pts)):
        c = int(report.assignments[idx])
        if c not in first_visit:
            first_visit[c] = idx
    class_members: dict[int, list[int]] = {}
    for c in range(q0):
        class_members.setdefault(find(c), []).append(c)
    reps = []
    for members in class_members.values():
        if seed_cluster in members:
            reps.append(seed_cluster)
        else:
            reps.append(min(members, key=lambda c: first_visit.get(c, len(pts))))
    reps.sort(key=lambda c: (c != seed_cluster, first_visit.get(c, len(pts))))
    rep_index = {c: i + 1 for i, c in enumerate(reps)}  # 1-based problem indices

    self_syms = []
    for c in reps:
        for name, sym in sym_items:
            if _set_distance(_apply_sym_points(sym, clusters[c]), clusters[c]) <= cut:
                self_syms.append({"k": rep_index[c], "sym": name})

    # localisation
    localisation: dict[int, frozenset] = {}
    atom_points: dict[tuple[int, str], np.ndarray] = {}
    for c in reps:
        mask = report.assignments == c
        cl_labels = [l for l, m in zip(labs, mask) if m]
        cl_pts = pts[mask]
        hits: dict[str, list[int]] = {}
        for idx, l in enumerate(cl_labels):
            hits.setdefault(l, []).append(idx)
        kept = {l for l, ids in hits.items() if len(ids) >= min_hits}
        localisation[rep_index[c]] = frozenset(kept)
        for l in kept:
            atom_points[(rep_index[c], l)] = cl_pts[hits[l]]

    # candidate targets: representative x symmetry, deduplicated by point set
    a_f, offsets = orbit.fmap.float_tables()
    target_sets: list[tuple[int, str, np.ndarray]] = []
    for c in reps:
        base = clusters[c]
        sets_here: list[tuple[str, np.ndarray]] = [("id", base)]
        for name, sym in sym_items:
            img = _apply_sym_points(sym, base)
            if all(_set_distance(img, existing) > cut for _, existing in sets_here):
                sets_here.append((name, img))
        for name, arr in sets_here:
            target_sets.append((rep_index[c], name, arr))
    trees = [(k, name, cKDTree(arr)) for k, name, arr in target_sets]

    transitions: dict[tuple[int, str], Transition] = {}
    trans_report = {}
    for (k, label), X in sorted(atom_points.items()):
        Y = X * a_f + offsets[label]
        scored = sorted(
            ((_directed_hausdorff(Y, tree), kk, name) for kk, name, tree in trees),
        )
        best, bk, bname = scored[0]
        if best > cut:
            raise UnassignedImage(
                f"images of cluster {k} piece {label} are {best:.3g} from the "
                f"nearest target (tolerance {cut:.3g})"
            )
        rivals = [s for s in scored[1:] if s[0] <= best * unique_factor or s[0] <= cut]
        if rivals:
            raise AmbiguousTransition(
                f"piece ({k}, {label}) matches ({bk}, {bname}) at {best:.3g} but also "
                + ", ".join(f"({r[1]}, {r[2]}) at {r[0]:.3g}" for r in rivals[:3])
            )
        transitions[(k, label)] = Transition(to=bk, sym=bname)
        trans_report[(k, label)] = (bk, bname)

    problem = ConditioningProblem(
        q=len(reps),
        localisation=localisation,
        transitions=transitions,
        self_symmetry=tuple(sorted((s["k"], s["sym"]) for s in self_syms)),
    )
    report.localisation = {k: sorted(v) for k, v in localisation.items()}
    report.transitions = trans_report
    report.symmetry_relations = relations
    report.self_symmetries = self_syms
    report.representatives = reps
    return problem, report
