"""Mixed-membership community detection and hyperedge prediction on hypergraphs."""

__version__ = "0.1.0"

from .hypergraph import (Hypergraph, HypergraphFormatError, NodeLabels, clique_expand,
                         load_hypergraph, load_labels, restrict_to_pairs, save_hypergraph)
from .inference import FitConfig, FitError, FitResult, ModelParams, fit, log_likelihood
from .scoring import edge_rates, prob_exists_clique, prob_exists_hypergraph

__all__ = [
    "FitConfig",
    "FitError",
    "FitResult",
    "Hypergraph",
    "HypergraphFormatError",
    "ModelParams",
    "NodeLabels",
    "clique_expand",
    "edge_rates",
    "fit",
    "load_hypergraph",
    "load_labels",
    "log_likelihood",
    "prob_exists_clique",
    "prob_exists_hypergraph",
    "restrict_to_pairs",
    "save_hypergraph",
]
