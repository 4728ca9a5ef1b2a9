"""Rank-one updates of a partial symmetric eigendecomposition, and their
application to out-of-sample extension of the graph Laplacian."""

__version__ = "0.1.0"

from .core import (
    PartialEigen,
    RankOneUpdate,
    SymmetricMatrix,
    coefficients_z,
    matvec,
    project_residual,
)
from .secular import (
    SecularProblem,
    TruncationConfig,
    choose_mu,
    compute_s,
    eval_w1,
    eval_w2,
    solve_roots,
)
from .eigvec import eigvec_estimate
from .update import (
    DeflationReport,
    UpdateResult,
    deflate,
    rank_one_update,
    reorthogonalize,
    residual_quality,
)
from .graph import (
    GraphConfig,
    LaplacianPair,
    PointCloud,
    augment_and_delta,
    build_weights,
    laplacian_sym,
    top_eigenpair_power,
)
from .extend import (
    ExtensionResult,
    extend,
    lift_eigenpairs,
    perturbation_correct,
    proxy_residual,
)
from .labbench import (
    ExperimentSpec,
    MetricRow,
    eigvec_angle,
    oracle_eigh,
    run_experiment,
    run_extension_compare,
    run_graph_sigma,
    run_scaling,
    run_synthetic,
)

__all__ = [
    "PartialEigen", "RankOneUpdate", "SymmetricMatrix",
    "coefficients_z", "matvec", "project_residual",
    "SecularProblem", "TruncationConfig", "choose_mu", "compute_s",
    "eval_w1", "eval_w2", "solve_roots",
    "eigvec_estimate",
    "DeflationReport", "UpdateResult", "deflate", "rank_one_update",
    "reorthogonalize", "residual_quality",
    "GraphConfig", "LaplacianPair", "PointCloud", "augment_and_delta",
    "build_weights", "laplacian_sym", "top_eigenpair_power",
    "ExtensionResult", "extend", "lift_eigenpairs", "perturbation_correct",
    "proxy_residual",
    "ExperimentSpec", "MetricRow", "eigvec_angle", "oracle_eigh",
    "run_experiment", "run_extension_compare", "run_graph_sigma",
    "run_scaling", "run_synthetic",
]
