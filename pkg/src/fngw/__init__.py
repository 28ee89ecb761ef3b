"""Fused network Gromov-Wasserstein distances between attributed graphs."""

from .apps import KMeansConfig, gram_matrix, kmeans_cluster, pairwise_distance_matrix
from .barycenter import BarycenterConfig, fngw_barycenter
from .dictionary import Dictionary, LearnConfig, UnmixConfig, Unmixing, dictionary_learn, reconstruct_from_atoms, unmix
from .distance import FngwParams, fngw_cost, fngw_distance, fngw_gradient
from .graph import Graph, SolverError, ValidationError, validate_graph
from .lp import TransportPlan, solve_linear_ot
from .prediction import PredictionModel, decode_candidates, predict_relaxed, ridge_weights, top_k_accuracy

__version__ = "0.1.0"

__all__ = [
    "BarycenterConfig", "Dictionary", "FngwParams", "Graph", "KMeansConfig", "LearnConfig", "PredictionModel",
    "SolverError", "TransportPlan", "UnmixConfig", "Unmixing", "ValidationError", "decode_candidates",
    "dictionary_learn", "fngw_barycenter", "fngw_cost", "fngw_distance", "fngw_gradient", "gram_matrix",
    "kmeans_cluster", "pairwise_distance_matrix", "predict_relaxed", "reconstruct_from_atoms", "ridge_weights",
    "solve_linear_ot", "top_k_accuracy", "unmix", "validate_graph",
]
