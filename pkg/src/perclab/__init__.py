"""Percolation estimation laboratory for the product of a regular tree and
the integer line: exact geometry and series, a reproducible Monte-Carlo
engine, decay-rate and threshold estimators, and an exhaustive tiny-graph
oracle."""

from .geometry import (
    BallSpec,
    OrbitKey,
    TreeAddress,
    Vertex,
    delta,
    enumerate_ball,
    level,
    level_count,
    neighbors,
    orbit_key,
    sphere_count,
    tree_distance,
)
from .mc import (
    ConfigSampler,
    TwoPointTable,
    estimate_two_point,
    explore_cluster,
    full_labeling,
    triangle_mc,
)
from .series import (
    RegionVerdict,
    SeriesDivergence,
    j_closed_form,
    j_enumerate,
    j_region,
    tree_chi,
    tree_triangle_partial,
    tree_two_point,
)
from .stats import EstimateWithCI

__all__ = [
    "BallSpec",
    "ConfigSampler",
    "EstimateWithCI",
    "OrbitKey",
    "RegionVerdict",
    "SeriesDivergence",
    "TreeAddress",
    "TwoPointTable",
    "Vertex",
    "delta",
    "enumerate_ball",
    "estimate_two_point",
    "explore_cluster",
    "full_labeling",
    "j_closed_form",
    "j_enumerate",
    "j_region",
    "level",
    "level_count",
    "neighbors",
    "orbit_key",
    "sphere_count",
    "tree_chi",
    "tree_distance",
    "tree_triangle_partial",
    "tree_two_point",
    "triangle_mc",
]

__version__ = "0.1.0"
