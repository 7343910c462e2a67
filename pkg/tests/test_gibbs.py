import math

import numpy as np
import pytest
from conftest import random_network
from oracles import directed_log_lik, escobar_west_eta
from scipy import stats as sps

from depsbm.core import Hyperparameters, NetworkSequence
from depsbm.gibbs import (
    ChainState,
    Model,
    SamplerOptions,
    gamma_probability,
    label_probabilities,
    sweep,
    update_alpha,
    update_eta,
    update_gamma,
    update_label,
)


def _model(net, **kw):
    hyper = kw.pop("hyper", None) or Hyperparameters(a_theta=np.ones(net.n_categories))
    return Model(net, None, hyper, SamplerOptions(supervised=False, **kw))


def test_two_node_full_conditional():
    y = np.array([[[1, 2], [2, 2]]])
    net = NetworkSequence(y, 2)
    chain = ChainState.from_partitions(_model(net, fixed_eta=1.0), [[0, 1]], [[0, 0]], eta1=1.0)
    p, _ = label_probabilities(chain, "rows", 0, 0)
    a = [1.0, 1.0]
    join = math.exp(directed_log_lik(y[0], [0, 0], [0, 0], a))
    split = math.exp(directed_log_lik(y[0], [1, 0], [0, 0], a))
    want = np.array([1.0 * join, 1.0 * split])
    assert np.asarray(p) == pytest.approx(want / want.sum(), abs=1e-12)
    chain.beta = 0.0
    p0, _ = label_probabilities(chain, "rows", 0, 0)
    assert np.asarray(p0) == pytest.approx([0.5, 0.5], abs=1e-12)


def _four_node_chain(z0, z1, gamma1, alpha=0.5):
    net = NetworkSequence(np.ones((2, 4, 4), int), 2)
    model = _model(net, fixed_eta=1.0, fixed_alpha=alpha)
    g = np.zeros((2, 4), np.int32)
    g[1] = gamma1
    return ChainState.from_partitions(model, [z0, z1], [z0, z1], g, g.copy(), [alpha], [alpha], 1.0)


def test_gamma_probability_hand_value():
    chain = _four_node_chain([0, 0, 1, 1], [0, 0, 1, 1], [0, 1, 1, 1], alpha=0.5)
    assert gamma_probability(chain, "rows", 1, 0) == pytest.approx(0.8, abs=1e-12)


def test_gamma_indicator_cases():
    bad = _four_node_chain([0, 1, 1, 1], [0, 0, 1, 1], [0, 1, 1, 1])
    assert gamma_probability(bad, "rows", 1, 0) == 0.0
    for _ in range(20):
        assert update_gamma(bad, "rows", 1, 0) == 0
    full = _four_node_chain([0, 0, 1, 1], [0, 0, 1, 1], [0, 1, 1, 1], alpha=1.0)
    assert gamma_probability(full, "rows", 1, 0) == 1.0
    with pytest.raises(ValueError):
        update_gamma(full, "rows", 0, 0)


def test_forward_indicator_pins_to_mate():
    chain = _four_node_chain([0, 0, 1, 1], [0, 0, 1, 1], [1, 1, 1, 0])
    p, _ = label_probabilities(chain, "rows", 0, 0)
    assert np.asarray(p) == pytest.approx([1.0, 0.0, 0.0])
    for _ in range(20):
        update_label(chain, "rows", 0, 0)
        assert chain.rows.z[0].tolist() == [0, 0, 1, 1]


def test_forward_indicator_blocks_merge():
    chain = _four_node_chain([0, 0, 1, 1], [0, 0, 1, 1], [1, 0, 1, 0])
    p, _ = label_probabilities(chain, "rows", 0, 0)
    p = np.asarray(p)
    # candidates: node 1's cluster, nodes {2,3}, fresh; the middle one would merge 0 and 2
    assert p[1] == 0.0 and p[0] > 0 and p[2] > 0
    chain.beta = 0.0
    p0 = np.asarray(label_probabilities(chain, "rows", 0, 0)[0])
    assert p0 == pytest.approx([0.5, 0.0, 0.5])


def test_persisting_labels_are_skipped():
    chain = _four_node_chain([0, 0, 1, 1], [0, 0, 1, 1], [1, 1, 1, 1])
    for _ in range(10):
        update_label(chain, "rows", 1, 2)
    assert chain.rows.z[1].tolist() == [0, 0, 1, 1]


def test_alpha_full_conditional_moments():
    net = NetworkSequence(np.ones((2, 10, 10), int), 2)
    model = _model(net, fixed_eta=1.0)
    g = np.zeros((2, 10), np.int32)
    g[1, :4] = 1
    z = np.zeros((2, 10), int)
    chain = ChainState.from_partitions(model, z, z, g, g.copy(), rng=5)
    draws = np.array([update_alpha(chain, "rows", 1) for _ in range(100_000)])
    mean = (1 + 4) / (1 + 1 + 10)
    assert abs(draws.mean() - mean) < 3 * draws.std(ddof=1) / math.sqrt(draws.size)
    assert draws.var() == pytest.approx(5 * 7 / (12**2 * 13), rel=0.03)


def test_fixed_alpha_and_zero_step():
    net = NetworkSequence(np.ones((2, 5, 5), int), 2)
    chain = ChainState.from_partitions(_model(net, fixed_alpha=0.3), np.zeros((2, 5), int), rng=1,
                                       alpha1=[0.3], alpha2=[0.3], eta1=2.0)
    assert update_alpha(chain, "rows", 1) == 0.3
    for _ in range(50):
        assert update_eta(chain, "rows", step=0.0) == 2.0


def test_eta_matches_auxiliary_variable_sampler():
    n, k = 10, 3
    hyper = Hyperparameters(a_theta=np.ones(2), a_eta=2.0, b_eta=1.0)
    net = NetworkSequence(np.ones((1, n, n), int), 2)
    z = [[0, 0, 0, 0, 1, 1, 1, 2, 2, 2]]
    chain = ChainState.from_partitions(_model(net, hyper=hyper), z, z, eta1=1.0, rng=8)
    mh = np.array([update_eta(chain, "rows") for _ in range(200_000)])[::20]
    ref = escobar_west_eta(k, n, 2.0, 1.0, 50_000, np.random.default_rng(9))[::5]
    edges = np.quantile(ref, np.linspace(0, 1, 11)[1:-1])
    obs = np.bincount(np.searchsorted(edges, mh), minlength=10)
    assert sps.chisquare(obs).pvalue > 0.001
    assert sps.ks_2samp(mh, ref).pvalue > 0.001


def test_sweeps_are_deterministic_and_valid(rng):
    net = random_network(rng, n=8, m=3)
    model = Model(net, None, Hyperparameters(a_theta=np.ones(4)))
    a = ChainState.from_prior(model, rng=21)
    b = ChainState.from_prior(model, rng=21)
    for _ in range(25):
        sweep(a)
        sweep(b)
        a.validate()
    assert a.snapshot().keys() == b.snapshot().keys()
    for key, val in a.snapshot().items():
        assert np.array_equal(val, b.snapshot()[key])


def test_undirected_sweeps_share_one_sequence(rng):
    net = random_network(rng, n=8, m=2, directed=False, include_diagonal=False)
    chain = ChainState.from_prior(Model(net, None, Hyperparameters(a_theta=np.ones(4))), rng=2)
    assert chain.cols is chain.rows
    for _ in range(20):
        sweep(chain)
    chain.validate()
    assert "z2" not in chain.snapshot()
