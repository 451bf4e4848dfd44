"""Synthetic hypergraphs drawn from the model itself.

Two sampling modes are available:

``exact``
    Enumerate every node subset of size 2..D, draw ``A_e ~ Pois(lambda_e)``
    and keep the positive ones. Limited by ``budget`` candidate subsets.
``per-size``
    For each size d and community k draw the number of hyperedges from
    ``Pois(w[d, k] * psi[d, k])`` and then each member set with probability
    proportional to ``prod_{i in e} u[i, k]``. Since the sum of independent
    Poisson counts over k is again Poisson with rate ``lambda_e``, this is the
    same distribution as ``exact``; repeated sets are merged by summing.

:func:`planted_params` builds (u, w) for a planted partition with optional
background mixing or explicit overlapping membership profiles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Sequence

import numpy as np
from scipy.stats import poisson

from .hypergraph import Hypergraph
from .sympoly import esp_table

logger = logging.getLogger(__name__)

MODES = ("exact", "per-size")


@dataclass
class GenConfig:
    u: np.ndarray
    w: np.ndarray
    seed: int = 0
    mode: str = "exact"
    budget: int = 5_000_000

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.u.ndim != 2 or self.w.ndim != 2 or self.u.shape[1] != self.w.shape[1]:
            raise ValueError("u must be N x K and w must be (D + 1) x K")
        if np.any(self.u < 0) or np.any(self.w < 0):
            raise ValueError("parameters must be nonnegative")

    @property
    def num_nodes(self) -> int:
        return self.u.shape[0]

    @property
    def max_size(self) -> int:
        return self.w.shape[0] - 1


@dataclass
class Generated:
    hypergraph: Hypergraph
    u: np.ndarray
    w: np.ndarray
    merged_duplicates: int = 0
    expected_counts: dict[int, float] = field(default_factory=dict)

    def __iter__(self):
        yield self.hypergraph
        yield self.u


def expected_counts(u: np.ndarray, w: np.ndarray) -> dict[int, float]:
    """Expected number of hyperedges (summed weight) per size."""
    psi = esp_table(u, w.shape[0] - 1)
    return {d: float(w[d] @ psi[d]) for d in range(2, w.shape[0])}


def generate(cfg: GenConfig) -> Generated:
    rng = np.random.default_rng(cfg.seed)
    if cfg.mode == "exact":
        edges, weights = _sample_exact(cfg, rng)
        merged = 0
    else:
        edges, weights, merged = _sample_per_size(cfg, rng)
    h = Hypergraph.from_edges(cfg.num_nodes, edges, weights)
    if merged:
        logger.info("per-size sampling merged %d repeated hyperedges", merged)
    return Generated(h, cfg.u.copy(), cfg.w.copy(), merged, expected_counts(cfg.u, cfg.w))


def _sample_exact(cfg: GenConfig, rng: np.random.Generator, chunk: int = 200_000):
    n, dmax = cfg.num_nodes, cfg.max_size
    total = sum(comb(n, d) for d in range(2, dmax + 1))
    if total > cfg.budget:
        raise ValueError(f"exact mode needs {total} candidates, budget is {cfg.budget}")
    edges: list[tuple[int, ...]] = []
    weights: list[int] = []
    for d in range(2, dmax + 1):
        if not np.any(cfg.w[d] > 0):
            continue
        it = combinations(range(n), d)
        while True:
            block = np.fromiter((i for c in _take(it, chunk) for i in c), dtype=np.int64)
            if block.size == 0:
                break
            block = block.reshape(-1, d)
            lam = np.prod(cfg.u[block], axis=1) @ cfg.w[d]
            counts = rng.poisson(lam)
            hit = np.nonzero(counts)[0]
            edges.extend(map(tuple, block[hit].tolist()))
            weights.extend(counts[hit].tolist())
    return edges, weights


def _take(it, n):
    for _ in range(n):
        try:
            yield next(it)
        except StopIteration:
            return


def suffix_esp(x: np.ndarray, max_degree: int) -> np.ndarray:
    """``S[j, r]`` = degree-r symmetric polynomial of ``x[j:]``; shape (N+1, D+1)."""
    n = len(x)
    table = np.zeros((n + 1, max_degree + 1))
    table[n, 0] = 1.0
    for j in range(n - 1, -1, -1):
        table[j] = table[j + 1]
        table[j, 1:] += x[j] * table[j + 1, :-1]
    return table


def sample_product_subsets(x: np.ndarray, size: int, count: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` subsets of ``size`` nodes with P(S) proportional to prod x[S].

    Walks the nodes in order and includes node j with its exact conditional
    probability ``x[j] * S[j+1, r-1] / S[j, r]`` given r members still to
    place. Returns an int array of shape (count, size), rows sorted.
    """
    x = np.asarray(x, dtype=float)
    table = suffix_esp(x, size)
    if table[0, size] <= 0:
        raise ValueError("no subset of the requested size has positive weight")
    out = np.empty((count, size), dtype=np.int64)
    remaining = np.full(count, size)
    filled = np.zeros(count, dtype=np.int64)
    rows = np.arange(count)
    for j in np.nonzero(x > 0)[0]:
        active = remaining > 0
        if not active.any():
            break
        r = remaining[active]
        prob = x[j] * table[j + 1, r - 1] / table[j, r]
        take = rng.random(r.size) < prob
        sel = rows[active][take]
        out[sel, filled[sel]] = j
        filled[sel] += 1
        remaining[sel] -= 1
    if np.any(remaining > 0):
        raise RuntimeError("subset sampler ran out of nodes")
    return out


def _sample_per_size(cfg: GenConfig, rng: np.random.Generator):
    psi = esp_table(cfg.u, cfg.max_size)
    merged: dict[tuple[int, ...], int] = {}
    drawn = 0
    for d in range(2, cfg.max_size + 1):
        for k in range(cfg.u.shape[1]):
            rate = cfg.w[d, k] * psi[d, k]
            if rate <= 0:
                continue
            count = int(rng.poisson(rate))
            if count == 0:
                continue
            sets = sample_product_subsets(cfg.u[:, k], d, count, rng)
            for e in map(tuple, sets.tolist()):
                merged[e] = merged.get(e, 0) + 1
            drawn += count
    return list(merged), list(merged.values()), drawn - len(merged)


def planted_memberships(num_nodes: int, num_communities: int, *,
                        profiles: Sequence[Sequence[float]] | None = None,
                        proportions: Sequence[float] | None = None,
                        background: float = 0.0,
                        strengths: np.ndarray | None = None) -> np.ndarray:
    """Membership matrix for contiguous blocks of nodes.

    Without ``profiles`` nodes are split into equal hard blocks, one per
    community. ``profiles`` gives one membership row per block with block
    shares ``proportions``. ``background`` is added to every zero entry,
    which mixes communities the way a between-group density would.
    ``strengths`` scales each node's row (degree heterogeneity).
    """
    if profiles is None:
        profiles = np.eye(num_communities)
    profiles = np.asarray(profiles, dtype=float)
    if profiles.shape[1] != num_communities:
        raise ValueError("profiles must have one column per community")
    if proportions is None:
        proportions = np.full(len(profiles), 1.0 / len(profiles))
    proportions = np.asarray(proportions, dtype=float)
    if len(proportions) != len(profiles) or np.any(proportions < 0):
        raise ValueError("need one nonnegative proportion per profile")
    proportions = proportions / proportions.sum()
    bounds = np.round(np.cumsum(proportions) * num_nodes).astype(int)
    block = np.searchsorted(bounds, np.arange(num_nodes), side="right")
    u = profiles[block].copy()
    u[u == 0] = background
    if strengths is not None:
        strengths = np.asarray(strengths, dtype=float)
        if strengths.shape != (num_nodes,) or np.any(strengths < 0):
            raise ValueError("strengths must be one nonnegative value per node")
        u *= strengths[:, None]
    return u


def planted_params(num_nodes: int, num_communities: int, max_size: int,
                   edges_per_size: dict[int, float] | Sequence[float], *,
                   profiles: Sequence[Sequence[float]] | None = None,
                   proportions: Sequence[float] | None = None,
                   background: float = 0.0,
                   strengths: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Planted-partition parameters with a target expected count per size.

    ``edges_per_size[d]`` expected hyperedges of size d are split evenly over
    communities; ``w[d, k]`` is set so that ``w[d, k] * psi[d, k]`` equals the
    community's share. The diagonal scale of ``w`` then plays the role of a
    within-group density, while ``background`` controls between-group mixing.
    """
    u = planted_memberships(num_nodes, num_communities, profiles=profiles,
                            proportions=proportions, background=background,
                            strengths=strengths)
    if not isinstance(edges_per_size, dict):
        edges_per_size = {d: m for d, m in zip(range(2, max_size + 1), edges_per_size)}
    psi = esp_table(u, max_size)
    w = np.zeros((max_size + 1, num_communities))
    for d, m in edges_per_size.items():
        if not 2 <= d <= max_size:
            raise ValueError(f"size {d} outside 2..{max_size}")
        share = m / num_communities
        w[d] = np.divide(share, psi[d], out=np.zeros(num_communities), where=psi[d] > 0)
    return u, w


def lognormal_strengths(num_nodes: int, sigma: float, seed: int = 0) -> np.ndarray:
    """Per-node strengths with unit mean and log-scale spread ``sigma``."""
    rng = np.random.default_rng(seed)
    return rng.lognormal(-0.5 * sigma**2, sigma, size=num_nodes)


def size_profile(mean_size: float, max_size: int) -> np.ndarray:
    """Shifted-Poisson size shares on 2..max_size with the given mean (before truncation)."""
    d = np.arange(2, max_size + 1)
    p = poisson.pmf(d - 2, max(mean_size - 2.0, 1e-9))
    return p / p.sum()
