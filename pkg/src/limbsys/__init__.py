"""Discrete Monge-Kantorovich transport, extremality, and numbered limb systems.

The package solves finite transportation problems exactly, certifies whether
an optimal (or any) coupling is an extreme point of its transportation
polytope, decomposes acyclic supports into numbered limb systems, rebuilds
couplings from limb systems by backward recursion, and certifies twist and
subtwist conditions for costs on gridded one-dimensional manifolds.
"""
from .errors import (
    DomainMismatch,
    Infeasible,
    LimbsysError,
    MassMismatch,
    NotAForest,
    ShapeMismatch,
    TooLarge,
)
from .measures import (
    CostMatrix,
    Coupling,
    DiscreteMeasure,
    PartialMap,
    add,
    marginals,
    pushforward_coupling,
    scale,
)
from .kantorovich import DualPotentials, Solution, solve, verify_certificate, zero_set
from .support import ForestReport, SupportGraph, acyclicity_test, build_support_graph
from .limbs import (
    LimbReconstruction,
    NumberedLimbSystem,
    decompose,
    reconstruct,
    uniqueness_check,
    validate,
    verify_recursion,
)
from .extremality import (
    ExtremalityVerdict,
    MethodVerdict,
    brute_force_oracle,
    check_extremality,
    enumerate_vertices,
    forest_certificate,
    rank_certificate,
)
from .manifold import (
    COST_LIBRARY,
    CostFunction,
    GridManifold,
    TwistReport,
    circle_demo,
    cost_by_name,
    cost_matrix,
    cross_difference,
    cross_difference_entries,
    h_values,
    marked_limb_split,
    marked_points,
    peaked_density,
    twist_census,
)

__version__ = "0.1.0"

__all__ = [
    "CostMatrix",
    "Coupling",
    "DiscreteMeasure",
    "DualPotentials",
    "ExtremalityVerdict",
    "ForestReport",
    "GridManifold",
    "CostFunction",
    "COST_LIBRARY",
    "LimbReconstruction",
    "LimbsysError",
    "MethodVerdict",
    "NumberedLimbSystem",
    "PartialMap",
    "Solution",
    "SupportGraph",
    "TwistReport",
    "acyclicity_test",
    "add",
    "brute_force_oracle",
    "build_support_graph",
    "check_extremality",
    "circle_demo",
    "cost_by_name",
    "cost_matrix",
    "cross_difference",
    "cross_difference_entries",
    "decompose",
    "enumerate_vertices",
    "forest_certificate",
    "h_values",
    "marginals",
    "marked_limb_split",
    "marked_points",
    "peaked_density",
    "pushforward_coupling",
    "rank_certificate",
    "reconstruct",
    "scale",
    "solve",
    "twist_census",
    "uniqueness_check",
    "validate",
    "verify_certificate",
    "verify_recursion",
    "zero_set",
    "DomainMismatch",
    "Infeasible",
    "MassMismatch",
    "NotAForest",
    "ShapeMismatch",
    "TooLarge",
]
