"""Exact-arithmetic toolkit for invariant unions of polytopes in expanding
piecewise affine maps: constraint-matrix geometry, symmetries, symbolic
partitions, orbit-driven problem extraction and exact verification."""

__version__ = "0.1.0"

from .geometry import (
    CoefficientMatrix,
    ConstraintMatrix,
    active_faces,
    affine_image,
    build_coefficient_matrix,
    constraint_matrix,
    contains_point,
    cube_matrix,
    equal_polytopes,
    includes,
    intersect,
    is_empty,
    optimize,
)
from .symmetry import (
    SymmetryTransform,
    apply_mod1,
    apply_to_matrix,
    build_group_alpha,
    check_compatibility,
    commutes_with_optimize,
    named_symmetries,
)
from .partition import canonical_alpha, enumerate_atoms, locate
from .maps import ClusterDistribution, PiecewiseAffineMap, b_rho, build_g_map, evaluate, floor_h, image_of_polytope
from .conditioning import (
    ConditioningProblem,
    Transition,
    VerificationReport,
    bisect_threshold,
    check_asiup,
    closed_form_thresholds,
    verify,
)
from .catalog import (
    CatalogBundle,
    DeltaFeasibility,
    continue_problem2,
    make_m1_m2,
    make_ma,
    make_p4,
    p_star,
    r_coupling,
)
from .orbit import Orbit, cluster, extract_problem, simulate
