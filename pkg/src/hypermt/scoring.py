"""Existence probabilities for candidate hyperedges under a fitted model."""

from __future__ import annotations

import logging
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .inference import ModelParams

logger = logging.getLogger(__name__)


def _as_edges(edges: Iterable[Iterable[int]]) -> list[tuple[int, ...]]:
    out = []
    for e in edges:
        e = tuple(sorted(int(i) for i in e))
        if len(e) < 2 or len(set(e)) != len(e):
            raise ValueError(f"candidate {e} must have at least 2 distinct nodes")
        out.append(e)
    return out


def edge_rates(edges: Sequence[Iterable[int]], p: ModelParams) -> np.ndarray:
    """``lambda_e = sum_k w[d_e, k] prod_{i in e} u[i, k]`` for each candidate.

    Candidates larger than the model's maximum size get rate 0.
    """
    edges = _as_edges(edges)
    rates = np.zeros(len(edges))
    groups: dict[int, list[int]] = {}
    for j, e in enumerate(edges):
        groups.setdefault(len(e), []).append(j)
    too_big = 0
    for d, idx in groups.items():
        if d > p.max_size:
            too_big += len(idx)
            continue
        nodes = np.array([edges[j] for j in idx], dtype=np.int64)
        rates[idx] = np.prod(p.u[nodes], axis=1) @ p.w[d]
    if too_big:
        logger.warning("%d candidates larger than model size %d scored 0", too_big, p.max_size)
    return rates


def edge_rate(edge: Iterable[int], p: ModelParams) -> float:
    return float(edge_rates([edge], p)[0])


def prob_exists_hypergraph(edges: Sequence[Iterable[int]], p: ModelParams) -> np.ndarray:
    """``P(A_e > 0) = 1 - exp(-lambda_e)`` under the hypergraph model."""
    return -np.expm1(-edge_rates(edges, p))


def prob_exists_clique(edges: Sequence[Iterable[int]], p_graph: ModelParams) -> np.ndarray:
    """Product over the pairs of each candidate of the pairwise existence probability.

    ``p_graph`` is a model fitted on the clique expansion (pairs only).
    """
    edges = _as_edges(edges)
    pairs: dict[tuple[int, int], int] = {}
    for e in edges:
        for pair in combinations(e, 2):
            pairs.setdefault(pair, len(pairs))
    pair_list = list(pairs)
    if not pair_list:
        return np.ones(len(edges))
    pair_prob = prob_exists_hypergraph(pair_list, p_graph)
    out = np.empty(len(edges))
    for j, e in enumerate(edges):
        out[j] = np.prod([pair_prob[pairs[pair]] for pair in combinations(e, 2)])
    return out
