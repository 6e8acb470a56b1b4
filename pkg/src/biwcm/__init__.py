"""Bipartite weighted configuration models for validating trade-like networks."""

__version__ = "0.1.0"

from .core import (
    GraphError,
    Mode,
    StrengthVectors,
    WeightedBipartiteGraph,
    build_graph,
    connectance,
    drop_isolated,
    strengths,
)
from .fileio import read_graph, read_matrix
from .metrics import fitness_complexity, snodf, spearman
from .nullmodels import (
    balassa_threshold,
    expected_weight,
    expected_weights,
    pvalue,
    pvalue_matrix,
    rca,
    rca_binarize,
    sparse_regime_check,
)
from .sampling import ensemble_stats, sample
from .solvers import (
    ConvergenceError,
    FittedModel,
    ModelKind,
    SolverConfig,
    fit,
    merca,
    solve,
)
from .validation import Procedure, alpha_validate, fdr_threshold, mu_validate, validate

__all__ = [
    "ConvergenceError", "FittedModel", "GraphError", "Mode", "ModelKind", "Procedure",
    "SolverConfig", "StrengthVectors", "WeightedBipartiteGraph", "alpha_validate",
    "balassa_threshold", "build_graph", "connectance", "drop_isolated", "ensemble_stats",
    "expected_weight", "expected_weights", "fdr_threshold", "fit", "fitness_complexity",
    "merca", "mu_validate", "pvalue", "pvalue_matrix", "rca", "rca_binarize", "read_graph", "read_matrix", "sample",
    "snodf", "solve", "sparse_regime_check", "spearman", "strengths", "validate",
]
