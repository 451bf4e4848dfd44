"""Cross-validated hyperedge prediction and community-quality metrics."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from math import comb
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .hypergraph import Hypergraph, NodeLabels, clique_expand, restrict_to_pairs
from .inference import FitConfig, FitError, ModelParams, fit
from .scoring import prob_exists_clique, prob_exists_hypergraph

logger = logging.getLogger(__name__)

MODES = ("hypergraph", "clique", "pairs")

Scorer = Callable[[Sequence[tuple[int, ...]]], np.ndarray]
ScorerFactory = Callable[[Hypergraph, np.random.Generator], Scorer]


class NegativeSamplingError(RuntimeError):
    """Could not find enough node sets that are not hyperedges."""


@dataclass
class FoldPlan:
    assignment: np.ndarray
    num_folds: int
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignment == fold)[0]

    def train_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignment != fold)[0]

    def sizes(self) -> list[int]:
        return np.bincount(self.assignment, minlength=self.num_folds).tolist()


def make_folds(h: Hypergraph, num_folds: int = 5, seed: int = 0) -> FoldPlan:
    """Uniformly random partition of hyperedges into folds of near-equal size."""
    if num_folds < 2:
        raise ValueError("need at least 2 folds")
    if h.num_edges < num_folds:
        raise ValueError(f"{h.num_edges} hyperedges cannot fill {num_folds} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(h.num_edges)
    assignment = np.empty(h.num_edges, dtype=np.int64)
    assignment[order] = np.arange(h.num_edges) % num_folds
    return FoldPlan(assignment, num_folds, seed)


def auc(scores_pos: Sequence[float], scores_neg: Sequence[float]) -> float:
    """Paired AUC: share of positions where the positive outranks the negative.

    Ties count one half.
    """
    pos = np.asarray(scores_pos, dtype=float)
    neg = np.asarray(scores_neg, dtype=float)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC needs non-empty score vectors")
    if pos.shape != neg.shape:
        raise ValueError("paired AUC needs equally long score vectors")
    return float((np.sum(pos > neg) + 0.5 * np.sum(pos == neg)) / pos.size)


def sample_negatives(exclude: Iterable[Hypergraph], num_nodes: int, sizes: Sequence[int],
                     seed: int | np.random.Generator = 0,
                     max_attempts: int | None = None) -> list[tuple[int, ...]]:
    """Random node sets, one per requested size, that are not observed hyperedges.

    Sets are drawn uniformly among subsets of the given size; anything found
    in one of the ``exclude`` hypergraphs is rejected. Gives up after
    ``max_attempts`` draws (default 1000 per requested set).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    observed: set[tuple[int, ...]] = set()
    for h in exclude:
        observed.update(h.edges)
    size_counts: dict[int, int] = {}
    for e in observed:
        size_counts[len(e)] = size_counts.get(len(e), 0) + 1
    for d in set(sizes):
        if d < 2 or d > num_nodes:
            raise NegativeSamplingError(f"no node sets of size {d} among {num_nodes} nodes")
        if comb(num_nodes, d) <= size_counts.get(d, 0):
            raise NegativeSamplingError(f"every set of size {d} is a hyperedge")
    budget = 1000 * len(sizes) if max_attempts is None else max_attempts
    out: list[tuple[int, ...]] = []
    attempts = 0
    for d in sizes:
        while True:
            attempts += 1
            if attempts > budget:
                raise NegativeSamplingError("rejection budget exhausted")
            cand = tuple(sorted(rng.choice(num_nodes, size=d, replace=False).tolist()))
            if cand not in observed:
                out.append(cand)
                break
    return out


def model_scorer(params: ModelParams, mode: str) -> Scorer:
    if mode == "clique":
        return lambda edges: prob_exists_clique(edges, params)
    return lambda edges: prob_exists_hypergraph(edges, params)


def training_input(train: Hypergraph, mode: str) -> Hypergraph:
    if mode == "clique":
        return clique_expand(train)
    if mode == "pairs":
        return restrict_to_pairs(train)
    return train


def _sample_positives(test: Hypergraph, count: int, rng: np.random.Generator,
                      only_size: int | None = None) -> list[tuple[int, ...]]:
    pool = [e for e in test.edges if only_size is None or len(e) == only_size]
    if not pool:
        return []
    idx = rng.choice(len(pool), size=count, replace=len(pool) < count)
    return [pool[j] for j in idx]


def _sampled_auc(score: Scorer, h: Hypergraph, test: Hypergraph, samples: int,
                 rng: np.random.Generator, only_size: int | None = None) -> float:
    pos = _sample_positives(test, samples, rng, only_size)
    if not pos:
        return math.nan
    neg = sample_negatives([h], h.num_nodes, [len(e) for e in pos], rng)
    return auc(score(pos), score(neg))


@dataclass
class FoldResult:
    fold: int
    auc: float
    auc_pairs: float
    train_edges: int
    test_edges: int
    fit_time: float
    loglik: float = math.nan
    error: str | None = None


@dataclass
class EvalReport:
    mode: str
    folds: list[FoldResult]
    samples: int
    seed: int
    auc_mean: float = math.nan
    auc_sd: float = math.nan
    auc_pairs_mean: float = math.nan
    auc_pairs_sd: float = math.nan
    f1: float | None = None
    cosine: float | None = None
    nmi: float | None = None
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def summarize(self) -> None:
        for name in ("auc", "auc_pairs"):
            vals = np.array([getattr(f, name) for f in self.folds if f.error is None])
            vals = vals[~np.isnan(vals)]
            if vals.size:
                setattr(self, f"{name}_mean", float(vals.mean()))
                setattr(self, f"{name}_sd", float(vals.std()))

    def to_dict(self) -> dict:
        return asdict(self)


def cross_validate(h: Hypergraph, cfg: FitConfig, mode: str = "hypergraph",
                   num_folds: int = 5, samples: int = 1000, seed: int = 0,
                   scorer: ScorerFactory | None = None) -> EvalReport:
    """K-fold hyperedge prediction with size-balanced sampled AUC.

    For every fold the model is trained on the other folds (clique mode on
    their clique expansion, pairs mode on their size-2 hyperedges only) and
    scored on ``samples`` held-out hyperedges against as many non-hyperedges
    with the same size profile. ``auc_pairs`` restricts the test side to the
    held-out pairs. A custom ``scorer`` factory replaces the model fit; it
    receives the training hypergraph and a generator.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    start = time.perf_counter()
    plan = make_folds(h, num_folds, seed)
    fold_seeds = np.random.SeedSequence(seed).spawn(num_folds)
    results = []
    for f in range(num_folds):
        rng = np.random.default_rng(fold_seeds[f])
        train = h.subset(plan.train_indices(f))
        test = h.subset(plan.test_indices(f))
        if mode == "pairs":
            test = restrict_to_pairs(test)
        data = training_input(train, mode)
        t0 = time.perf_counter()
        loglik = math.nan
        try:
            if scorer is not None:
                score = scorer(data, rng)
            else:
                if data.num_edges == 0:
                    raise FitError("training fold has no hyperedges")
                fold_cfg = replace(cfg, seed=int(rng.integers(2**31)))
                res = fit(data, fold_cfg)
                loglik = res.loglik
                score = model_scorer(res.params, mode)
        except FitError as err:
            logger.warning("fold %d: %s", f, err)
            results.append(FoldResult(f, math.nan, math.nan, data.num_edges, test.num_edges,
                                      time.perf_counter() - t0, error=str(err)))
            continue
        fit_time = time.perf_counter() - t0
        if mode == "pairs":
            overall = pairs = _sampled_auc(score, h, test, samples, rng)
        else:
            overall = _sampled_auc(score, h, test, samples, rng)
            pairs = _sampled_auc(score, h, test, samples, rng, only_size=2)
        results.append(FoldResult(f, overall, pairs, data.num_edges, test.num_edges,
                                  fit_time, loglik))
    report = EvalReport(mode, results, samples, seed)
    report.summarize()
    report.wall_time = time.perf_counter() - start
    return report


def constant_scorer(value: float = 0.5) -> ScorerFactory:
    return lambda train, rng: (lambda edges: np.full(len(edges), value))


def random_scorer() -> ScorerFactory:
    return lambda train, rng: (lambda edges: rng.random(len(edges)))


def _confusion(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    table = np.zeros((pred.max() + 1, truth.max() + 1))
    np.add.at(table, (pred, truth), 1)
    return table


def f1_score(pred: Sequence[int], truth: NodeLabels | Sequence[int]) -> float:
    """Macro F1 after matching communities to labels.

    Communities are paired with labels by the assignment maximizing summed
    pairwise F1; labels left without a partner score 0.
    """
    codes = truth.codes if isinstance(truth, NodeLabels) else np.asarray(truth)
    table = _confusion(np.asarray(pred), codes)
    denom = table.sum(axis=1)[:, None] + table.sum(axis=0)[None, :]
    pair_f1 = np.divide(2 * table, denom, out=np.zeros_like(table), where=denom > 0)
    rows, cols = linear_sum_assignment(pair_f1, maximize=True)
    total = float(pair_f1[rows, cols].sum())
    return total / table.shape[1]


def match_columns(u: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Permutation of ``u``'s columns best aligned with ``truth``.

    Maximizes the summed per-node cosine similarity, which is linear in the
    permutation once rows are normalized. Returns ``perm`` such that column
    ``perm[j]`` of ``u`` is matched to truth column j.
    """
    un = _row_normalize(u)
    tn = _row_normalize(truth)
    gain = un.T @ tn
    rows, cols = linear_sum_assignment(gain, maximize=True)
    perm = np.empty(truth.shape[1], dtype=np.int64)
    perm[cols] = rows
    return perm


def _row_normalize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norm, out=np.zeros_like(x), where=norm > 0)


def cosine_similarity_per_node(u: np.ndarray, truth: np.ndarray, match: bool = True) -> np.ndarray:
    """Cosine similarity between each membership row and its ground-truth row.

    ``truth`` may be one-hot labels or mixed memberships. With ``match`` the
    columns of ``u`` are first permuted to best fit ``truth``. Zero rows
    score 0.
    """
    u = np.asarray(u, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if match:
        if u.shape[1] < truth.shape[1]:
            u = np.hstack([u, np.zeros((u.shape[0], truth.shape[1] - u.shape[1]))])
        u = u[:, match_columns(u, truth)]
    zero = ~np.any(u > 0, axis=1)
    if zero.any():
        logger.info("%d nodes with all-zero membership scored 0", int(zero.sum()))
    return np.einsum("ij,ij->i", _row_normalize(u), _row_normalize(truth))


def cosine_similarity(u: np.ndarray, truth: np.ndarray, match: bool = True) -> float:
    """Mean per-node cosine similarity."""
    return float(cosine_similarity_per_node(u, truth, match).mean())


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(pred: Sequence[int], truth: Sequence[int] | NodeLabels) -> float:
    """Normalized mutual information, arithmetic-mean normalization.

    Returns 0 when either partition has a single cluster.
    """
    codes = truth.codes if isinstance(truth, NodeLabels) else np.asarray(truth)
    pred = np.unique(np.asarray(pred), return_inverse=True)[1]
    codes = np.unique(codes, return_inverse=True)[1]
    table = _confusion(pred, codes)
    h_pred = _entropy(table.sum(axis=1))
    h_true = _entropy(table.sum(axis=0))
    if h_pred == 0 or h_true == 0:
        logger.info("single-cluster partition; NMI set to 0")
        return 0.0
    n = table.sum()
    joint = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / n**2
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    return max(0.0, min(1.0, mi / (0.5 * (h_pred + h_true))))


def community_report(params: ModelParams, labels: NodeLabels) -> dict:
    """F1, mean cosine similarity and NMI of a fit against node labels."""
    hard = params.hard_assignments()
    per_node = cosine_similarity_per_node(params.u, labels.onehot())
    return {
        "f1": f1_score(hard, labels),
        "cosine": float(per_node.mean()),
        "nmi": nmi(hard, labels),
        "cosine_per_node": per_node,
    }
