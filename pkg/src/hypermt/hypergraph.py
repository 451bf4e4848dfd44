"""Hypergraph container, text-format I/O and pairwise projections.

Nodes are dense integer ids ``0..N-1``. A hyperedge is stored as a sorted
tuple of distinct ids together with a positive integer weight (the number of
times the interaction was observed). Node sets are unique: duplicate lines in
an input file are merged by summing their weights.

File format (one hyperedge per line)::

    # comment
    a b c
    a,d : 3

Tokens are separated by whitespace or commas and an optional trailing
``: <weight>`` gives the interaction count (default 1).  Files written by
:func:`save_hypergraph` start with a ``# nodes:`` directive listing every node
token in id order, which makes isolated nodes and the id map survive a round
trip.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

_SPLIT = re.compile(r"[\s,]+")
_NODES_DIRECTIVE = "# nodes:"


class HypergraphFormatError(ValueError):
    """Raised for malformed hyperedge-list or label files."""


class Hypergraph:
    """Weighted hypergraph on nodes ``0..num_nodes-1``.

    Build instances with :meth:`from_edges`, which normalizes (sorts) node
    sets and merges duplicates. The object is treated as immutable.
    """

    def __init__(self, num_nodes: int, edges: Sequence[tuple[int, ...]],
                 weights: Sequence[int] | np.ndarray,
                 node_names: Sequence[str] | None = None):
        self.num_nodes = int(num_nodes)
        self.edges: tuple[tuple[int, ...], ...] = tuple(tuple(e) for e in edges)
        self.weights = np.asarray(weights, dtype=np.int64).copy()
        self.weights.setflags(write=False)
        self.node_names = list(node_names) if node_names is not None else None
        self._validate()

    @classmethod
    def from_edges(cls, num_nodes: int, edges: Iterable[Iterable[int]],
                   weights: Iterable[int] | None = None,
                   node_names: Sequence[str] | None = None) -> "Hypergraph":
        """Normalize and merge raw node sets into a hypergraph.

        Node sets are sorted; repeated sets have their weights summed, keeping
        the position of the first occurrence.
        """
        edges = [tuple(int(i) for i in e) for e in edges]
        if weights is None:
            weights = [1] * len(edges)
        weights = [int(a) for a in weights]
        if len(weights) != len(edges):
            raise ValueError("edges and weights differ in length")
        merged: dict[tuple[int, ...], int] = {}
        for e, a in zip(edges, weights):
            key = tuple(sorted(e))
            if len(set(key)) != len(key):
                raise ValueError(f"repeated node in hyperedge {e}")
            merged[key] = merged.get(key, 0) + a
        return cls(num_nodes, list(merged), list(merged.values()), node_names)

    def _validate(self) -> None:
        if len(self.weights) != len(self.edges):
            raise ValueError("edges and weights differ in length")
        if self.node_names is not None and len(self.node_names) != self.num_nodes:
            raise ValueError("node_names must have one entry per node")
        seen = set()
        for e in self.edges:
            if len(e) < 2:
                raise ValueError(f"hyperedge {e} has fewer than 2 nodes")
            if any(b <= a for a, b in zip(e, e[1:])):
                raise ValueError(f"hyperedge {e} is not strictly increasing")
            if e[0] < 0 or e[-1] >= self.num_nodes:
                raise ValueError(f"hyperedge {e} references unknown nodes")
            if e in seen:
                raise ValueError(f"duplicate hyperedge {e}")
            seen.add(e)
        if len(self.weights) and self.weights.min() < 1:
            raise ValueError("hyperedge weights must be positive integers")

    def __repr__(self) -> str:
        return (f"Hypergraph(num_nodes={self.num_nodes}, num_edges={self.num_edges}, "
                f"max_size={self.max_size})")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Hypergraph):
            return NotImplemented
        return (self.num_nodes == other.num_nodes and self.edges == other.edges
                and np.array_equal(self.weights, other.weights))

    __hash__ = None  # type: ignore[assignment]

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def sizes(self) -> np.ndarray:
        """Hyperedge sizes ``d_e`` as an int array."""
        return np.array([len(e) for e in self.edges], dtype=np.int64)

    @property
    def max_size(self) -> int:
        """Largest observed hyperedge size ``D`` (0 for an empty hypergraph)."""
        return int(self.sizes.max()) if self.num_edges else 0

    @cached_property
    def edge_index(self) -> dict[tuple[int, ...], int]:
        return {e: idx for idx, e in enumerate(self.edges)}

    @cached_property
    def incidence(self) -> list[list[tuple[int, int]]]:
        """Per-node list of ``(edge index, weight)`` pairs."""
        inc: list[list[tuple[int, int]]] = [[] for _ in range(self.num_nodes)]
        for idx, (e, a) in enumerate(zip(self.edges, self.weights)):
            for i in e:
                inc[i].append((idx, int(a)))
        return inc

    @cached_property
    def incidence_matrix(self) -> sp.csr_matrix:
        """Sparse ``N x E`` matrix with entry ``A_e`` where node i is in e."""
        sizes = self.sizes
        rows = np.fromiter((i for e in self.edges for i in e), dtype=np.int64,
                           count=int(sizes.sum()))
        cols = np.repeat(np.arange(self.num_edges), sizes)
        vals = np.repeat(self.weights.astype(float), sizes)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.num_nodes, self.num_edges))

    @cached_property
    def by_size(self) -> dict[int, tuple[np.ndarray, np.ndarray]]:
        """Map size d to ``(edge indices, node matrix of shape (E_d, d))``."""
        groups: dict[int, list[int]] = {}
        for idx, e in enumerate(self.edges):
            groups.setdefault(len(e), []).append(idx)
        out = {}
        for d in sorted(groups):
            idx = np.array(groups[d], dtype=np.int64)
            nodes = np.array([self.edges[j] for j in idx], dtype=np.int64).reshape(len(idx), d)
            out[d] = (idx, nodes)
        return out

    def degrees(self, weighted: bool = True) -> np.ndarray:
        """Node degrees, counting weights when ``weighted``."""
        inc = self.incidence_matrix
        if not weighted:
            inc = (inc > 0).astype(float)
        return np.asarray(inc.sum(axis=1)).ravel()

    def subset(self, indices: Iterable[int]) -> "Hypergraph":
        """Hypergraph with the selected hyperedges and the same node set."""
        indices = list(indices)
        return Hypergraph(self.num_nodes, [self.edges[j] for j in indices],
                          self.weights[indices] if indices else [], self.node_names)

    def restrict_max_size(self, max_size: int) -> "Hypergraph":
        """Drop hyperedges larger than ``max_size``."""
        keep = [j for j, e in enumerate(self.edges) if len(e) <= max_size]
        dropped = self.num_edges - len(keep)
        if dropped:
            logger.info("dropped %d hyperedges larger than %d", dropped, max_size)
        return self.subset(keep)

    def binarize(self) -> "Hypergraph":
        """Copy with every weight set to 1."""
        return Hypergraph(self.num_nodes, self.edges, np.ones(self.num_edges, dtype=np.int64),
                          self.node_names)

    def with_nodes(self, num_nodes: int, node_names: Sequence[str] | None = None) -> "Hypergraph":
        """Copy with an enlarged node set; existing ids are unchanged."""
        if num_nodes < self.num_nodes:
            raise ValueError("cannot shrink the node set")
        return Hypergraph(num_nodes, self.edges, self.weights, node_names)

    def node_label(self, i: int) -> str:
        return self.node_names[i] if self.node_names is not None else str(i)


@dataclass
class NodeLabels:
    """One categorical label per node, encoded against ``vocabulary``."""

    codes: np.ndarray
    vocabulary: list[str]

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)
        if not self.vocabulary:
            raise ValueError("label vocabulary is empty")
        if len(self.codes) and (self.codes.min() < 0 or self.codes.max() >= len(self.vocabulary)):
            raise ValueError("label code outside vocabulary")

    @classmethod
    def from_strings(cls, labels: Sequence[str]) -> "NodeLabels":
        vocab: dict[str, int] = {}
        codes = [vocab.setdefault(lab, len(vocab)) for lab in labels]
        return cls(np.array(codes, dtype=np.int64), list(vocab))

    @property
    def num_classes(self) -> int:
        return len(self.vocabulary)

    def onehot(self) -> np.ndarray:
        out = np.zeros((len(self.codes), self.num_classes))
        out[np.arange(len(self.codes)), self.codes] = 1.0
        return out

    def strings(self) -> list[str]:
        return [self.vocabulary[c] for c in self.codes]


def parse_line(line: str) -> tuple[list[str], int] | None:
    """Split one hyperedge line into node tokens and a weight.

    Returns ``None`` for blank lines and comments.
    """
    text = line.strip()
    if not text or text.startswith("#"):
        return None
    weight = 1
    if ":" in text:
        text, _, wtext = text.rpartition(":")
        try:
            weight = int(wtext.strip())
        except ValueError:
            raise HypergraphFormatError(f"bad weight {wtext.strip()!r}") from None
        if weight < 1:
            raise HypergraphFormatError(f"weight must be >= 1, got {weight}")
    tokens = [t for t in _SPLIT.split(text.strip()) if t]
    return tokens, weight


def read_hyperedges(path: str | Path, *, strict: bool = True,
                    node_names: Sequence[str] | None = None,
                    allow_new_nodes: bool = True) -> Hypergraph:
    """Parse a hyperedge-list file.

    ``node_names`` pre-seeds the token-to-id map (as does a ``# nodes:``
    directive in the file). Unknown tokens get the next free id in order of
    first appearance unless ``allow_new_nodes`` is false. Lines with fewer
    than two distinct nodes raise in strict mode and are skipped with a
    warning otherwise.
    """
    path = Path(path)
    names: dict[str, int] = {}
    if node_names is not None:
        names = {tok: i for i, tok in enumerate(node_names)}
    edges: list[tuple[int, ...]] = []
    weights: list[int] = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if stripped.startswith(_NODES_DIRECTIVE) and node_names is None:
                for tok in stripped[len(_NODES_DIRECTIVE):].split():
                    names.setdefault(tok, len(names))
                continue
            try:
                parsed = parse_line(line)
            except HypergraphFormatError as err:
                raise HypergraphFormatError(f"{path}:{lineno}: {err}") from None
            if parsed is None:
                continue
            tokens, weight = parsed
            if len(set(tokens)) != len(tokens):
                raise HypergraphFormatError(f"{path}:{lineno}: repeated node in hyperedge")
            if len(tokens) < 2:
                if strict:
                    raise HypergraphFormatError(
                        f"{path}:{lineno}: hyperedge needs at least 2 nodes")
                skipped += 1
                continue
            ids = []
            for tok in tokens:
                if tok not in names:
                    if not allow_new_nodes:
                        raise HypergraphFormatError(f"{path}:{lineno}: unknown node {tok!r}")
                    names[tok] = len(names)
                ids.append(names[tok])
            edges.append(tuple(ids))
            weights.append(weight)
    if skipped:
        logger.warning("%s: skipped %d hyperedges with fewer than 2 nodes", path, skipped)
    if not edges:
        raise HypergraphFormatError(f"{path}: no hyperedges found")
    ordered = sorted(names, key=names.__getitem__)
    return Hypergraph.from_edges(len(ordered), edges, weights, node_names=ordered)


def load_hypergraph(path: str | Path, *, strict: bool = True,
                    max_size: int | None = None, binarize: bool = False) -> Hypergraph:
    """Load and validate a hypergraph, optionally capping size and weights."""
    h = read_hyperedges(path, strict=strict)
    if max_size is not None:
        h = h.restrict_max_size(max_size)
    if binarize:
        h = h.binarize()
    return h


def format_edge(h: Hypergraph, e: Iterable[int]) -> str:
    return " ".join(h.node_label(i) for i in e)


def save_hypergraph(h: Hypergraph, path: str | Path) -> None:
    """Write ``h`` in hyperedge-list format, including the node directive."""
    names = [h.node_label(i) for i in range(h.num_nodes)]
    bad = [n for n in names if not n or _SPLIT.search(n) or ":" in n or n.startswith("#")]
    if bad:
        raise ValueError(f"node names cannot be written as tokens: {bad[:3]}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_NODES_DIRECTIVE} {' '.join(names)}\n")
        for e, a in zip(h.edges, h.weights):
            line = format_edge(h, e)
            fh.write(f"{line} : {a}\n" if a != 1 else f"{line}\n")


def save_node_map(h: Hypergraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "node"])
        for i in range(h.num_nodes):
            writer.writerow([i, h.node_label(i)])


def load_labels(path: str | Path, nodes: Hypergraph | Sequence[str]) -> NodeLabels:
    """Read a ``node,label`` CSV (with header) aligned to ``nodes``.

    ``nodes`` is a hypergraph or the list of node tokens in id order.
    """
    if isinstance(nodes, Hypergraph):
        nodes = [nodes.node_label(i) for i in range(nodes.num_nodes)]
    lookup = {tok: i for i, tok in enumerate(nodes)}
    labels: list[str | None] = [None] * len(nodes)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise HypergraphFormatError(f"{path}: empty label file")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise HypergraphFormatError(f"{path}:{lineno}: expected node,label")
            tok, lab = row[0].strip(), row[1].strip()
            if tok in lookup:
                labels[lookup[tok]] = lab
    missing = [nodes[i] for i, lab in enumerate(labels) if lab is None]
    if missing:
        raise HypergraphFormatError(f"{path}: no label for nodes {missing[:5]}")
    return NodeLabels.from_strings(labels)  # type: ignore[arg-type]


def save_labels(h: Hypergraph, labels: NodeLabels, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "label"])
        for i, lab in enumerate(labels.strings()):
            writer.writerow([h.node_label(i), lab])


def clique_expand(h: Hypergraph) -> Hypergraph:
    """Project each hyperedge onto its pairs; each pair inherits ``A_e``.

    Pairs produced by several hyperedges accumulate their weights.
    """
    pairs: dict[tuple[int, int], int] = {}
    for e, a in zip(h.edges, h.weights):
        for pair in combinations(e, 2):
            pairs[pair] = pairs.get(pair, 0) + int(a)
    return Hypergraph(h.num_nodes, list(pairs), list(pairs.values()), h.node_names)


def restrict_to_pairs(h: Hypergraph) -> Hypergraph:
    """Keep only the hyperedges of size 2."""
    return h.subset(j for j, e in enumerate(h.edges) if len(e) == 2)
