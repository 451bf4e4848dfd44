"""Scenario builders used by tests and the command line."""

from __future__ import annotations

import numpy as np

from .generator import GenConfig, generate, planted_params
from .hypergraph import Hypergraph, NodeLabels

GUEST_LABEL = "guest"


def fixture_noisy(h: Hypergraph, labels: NodeLabels | None = None, guest_count: int = 10,
                  member_count: int = 10, seed: int = 0
                  ) -> tuple[Hypergraph, NodeLabels | None, tuple[int, ...]]:
    """Append one large "event" hyperedge with new guest nodes.

    The event joins ``guest_count`` new nodes (ids ``N..N+g-1``) and
    ``member_count`` existing nodes drawn uniformly without replacement.
    Returns the new hypergraph, labels extended with a guest class, and the
    added hyperedge.
    """
    if member_count > h.num_nodes:
        raise ValueError("member_count exceeds the number of nodes")
    if guest_count < 0 or member_count < 0:
        raise ValueError("counts must be nonnegative")
    if guest_count + member_count == 0:
        return h, labels, ()
    if guest_count + member_count < 2:
        raise ValueError("the event hyperedge needs at least 2 nodes")
    rng = np.random.default_rng(seed)
    members = sorted(rng.choice(h.num_nodes, size=member_count, replace=False).tolist())
    guests = list(range(h.num_nodes, h.num_nodes + guest_count))
    event = tuple(members + guests)
    if event in h.edge_index:
        raise ValueError("event hyperedge already present")
    names = None
    if h.node_names is not None:
        taken = set(h.node_names)
        names = list(h.node_names)
        for g in range(guest_count):
            name = f"guest{g}"
            while name in taken:
                name += "_"
            names.append(name)
    out = Hypergraph(h.num_nodes + guest_count, list(h.edges) + [event],
                     list(h.weights) + [1], names)
    new_labels = None
    if labels is not None:
        vocab = list(labels.vocabulary)
        if GUEST_LABEL not in vocab:
            vocab.append(GUEST_LABEL)
        codes = np.concatenate([labels.codes,
                                np.full(guest_count, vocab.index(GUEST_LABEL))])
        new_labels = NodeLabels(codes, vocab)
    return out, new_labels, event


def two_block_hypergraph(block_size: int = 30, seed: int = 0, pairs: float = 400.0,
                         triangles: float = 150.0, background: float = 0.02
                         ) -> tuple[Hypergraph, NodeLabels]:
    """Two planted classes of contact-like data, mostly pairs and triangles."""
    u, w = planted_params(2 * block_size, 2, 3, {2: pairs, 3: triangles},
                          background=background)
    h = generate(GenConfig(u, w, seed=seed, mode="exact")).hypergraph
    labels = NodeLabels(np.repeat([0, 1], block_size), ["A", "B"])
    return h, labels
