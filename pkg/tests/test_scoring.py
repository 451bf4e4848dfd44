import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from hypermt.inference import ModelParams
from hypermt.scoring import edge_rate, edge_rates, prob_exists_clique, prob_exists_hypergraph


def random_model(seed, n=6, k=3, dmax=4):
    rng = np.random.default_rng(seed)
    w = rng.uniform(size=(dmax + 1, k))
    w[:2] = 0
    return ModelParams(rng.uniform(size=(n, k)), w)


def test_zero_membership_node_gives_zero():
    p = random_model(0)
    p.u[2] = 0
    assert edge_rate((0, 2, 4), p) == 0.0


def test_k1_unit_memberships():
    p = ModelParams(np.ones((5, 1)), np.array([[0], [0], [0.3], [0.7]]))
    assert edge_rate((1, 3, 4), p) == pytest.approx(0.7)


@pytest.mark.parametrize("seed", range(4))
def test_rates_match_direct_sum(seed):
    p = random_model(seed)
    cands = [(0, 1), (1, 3, 5), (0, 2, 3, 4), (4, 5)]
    expected = [oracles.rate(e, p.u, p.w) for e in cands]
    np.testing.assert_allclose(edge_rates(cands, p), expected, rtol=1e-12)


def test_oversized_candidate_scores_zero():
    p = random_model(1, dmax=2)
    assert edge_rates([(0, 1, 2)], p)[0] == 0.0


def test_bad_candidates():
    p = random_model(1)
    with pytest.raises(ValueError):
        edge_rates([(1,)], p)
    with pytest.raises(ValueError):
        edge_rates([(1, 1)], p)


def test_existence_probability_values():
    p = ModelParams(np.ones((3, 1)), np.array([[0], [0], [math.log(2)]]))
    assert prob_exists_hypergraph([(0, 1)], p)[0] == pytest.approx(0.5)
    p = ModelParams(np.ones((3, 1)), np.array([[0], [0], [0.0]]))
    assert prob_exists_hypergraph([(0, 1)], p)[0] == 0.0
    p = ModelParams(np.ones((3, 1)), np.array([[0], [0], [1e4]]))
    assert prob_exists_hypergraph([(0, 1)], p)[0] == 1.0


def test_clique_probability():
    p = ModelParams(np.ones((4, 1)), np.array([[0], [0], [math.log(2)]]))
    assert prob_exists_clique([(0, 1, 2)], p)[0] == pytest.approx(0.125)
    graph = random_model(2, dmax=2)
    np.testing.assert_allclose(prob_exists_clique([(0, 3)], graph),
                               prob_exists_hypergraph([(0, 3)], graph))
    graph.u[1] = 0
    assert prob_exists_clique([(0, 1, 3)], graph)[0] == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 5), st.integers(0, 2), st.floats(0.0, 3.0))
def test_rate_monotone_in_parameters(seed, i, k, bump):
    p = random_model(seed)
    e = (min(i, 4), 5)
    before = edge_rate(e, p)
    q = p.copy()
    q.u[e[0], k] += bump
    q.w[2, k] += bump
    assert edge_rate(e, q) >= before
    prob = prob_exists_hypergraph([e], q)[0]
    assert 0.0 <= prob <= 1.0
    assert prob == pytest.approx(1 - math.exp(-edge_rate(e, q)), abs=1e-15)
