"""Homotopy solver for assignment-form optimal transport between point clouds."""

from .assignment import (
    Permutation,
    apply_permutation,
    compose,
    cost,
    cost_matrix,
    exact_assign,
    greedysort,
    local_improve,
    refine,
    trace_objective,
)
from .data import InstanceSpec, generate, load_cloud, load_report, load_trace, save_cloud, save_report, save_trace
from .homotopy import HomotopyConfig, HomotopyTrace, SolveReport, TraceRecord, lower_bound, solve, step_study
from .linalg import (
    OrthogonalMatrix,
    RandomizedSVD,
    SvdFactors,
    gram,
    orthogonal_root,
    partial_rotation,
    procrustes,
    svd_full,
    svd_randomized,
)

__version__ = "0.1.0"
