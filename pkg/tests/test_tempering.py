import math

import numpy as np
import pytest
from conftest import random_network

from depsbm.core import Hyperparameters
from depsbm.gibbs import ChainState, Model, SamplerOptions, sweep
from depsbm.tempering import (
    Ladder,
    RunConfig,
    SwapRecord,
    adapt_ladder,
    exchange_states,
    run,
    swap_probability,
    swap_round,
)


def test_swap_probability_examples():
    assert swap_probability(1.0, 0.5, -10.0, -8.0) == 1.0
    assert swap_probability(0.7, 0.7, -1.0, -500.0) == 1.0
    assert swap_probability(1.0, 0.5, -8.0, -10.0) == pytest.approx(math.exp(-1.0))
    assert swap_probability(1.0, 0.5, -8.0, -10.0) == pytest.approx(0.3679, abs=1e-4)


def test_ladder_validation_and_geometry():
    lad = Ladder.geometric(4)
    assert lad.betas == pytest.approx([1, 0.6, 0.36, 0.216])
    before = lad.betas.copy()
    assert lad.rebuild().betas == pytest.approx(before, abs=1e-14)
    for bad in ([0.9, 0.5], [1.0, 1.0], [1.0, 0.5, 0.7], [1.0, 0.0]):
        with pytest.raises(ValueError):
            Ladder(bad)
    with pytest.raises(ValueError):
        Ladder.geometric(0)


def test_adaptation_direction():
    lad = Ladder.geometric(4)
    same = adapt_ladder(Ladder.geometric(4), SwapRecord(0, [0, 2], [0.234, 0.234], [True, False]), 1)
    assert same.betas == pytest.approx(lad.betas, abs=1e-14)
    grow = Ladder.geometric(4)
    for t in range(1, 50):
        adapt_ladder(grow, SwapRecord(t, [0, 1, 2], [1.0, 1.0, 1.0], [True] * 3), t)
    assert np.all(grow.betas[1:] < lad.betas[1:])
    assert np.all(np.diff(grow.betas) < 0) and grow.betas[0] == 1.0


class _Fake:
    def __init__(self, tag, ll):
        self.rows = self.cols = tag
        self.counts = tag
        self.log_lik = ll
        self.beta = None
        self.rng = tag


def test_round_pairs_and_slot_bookkeeping():
    lad = Ladder.geometric(5)
    chains = [_Fake(k, float(k)) for k in range(5)]
    for c, b in zip(chains, lad.betas):
        c.beta = b
    rng = np.random.default_rng(0)
    even = swap_round(chains, lad, 0, rng)
    assert even.pairs == [0, 2]
    # hotter slots start with higher likelihood, so every first attempt accepts
    assert even.probs == [1.0, 1.0] and even.accepted == [True, True]
    assert [c.rows for c in chains] == [1, 0, 3, 2, 4]
    odd = swap_round(chains, lad, 1, rng)
    assert odd.pairs == [1, 3]
    assert [c.beta for c in chains] == list(lad.betas)
    assert [c.rng for c in chains] == list(range(5))
    assert all(c.rows == c.counts for c in chains)


def test_exchange_moves_states_not_temperatures(rng):
    net = random_network(rng, n=6, m=2)
    model = Model(net, None, Hyperparameters(a_theta=np.ones(4)))
    a = ChainState.from_prior(model, beta=1.0, rng=1)
    b = ChainState.from_prior(model, beta=0.5, rng=2)
    za, zb = a.rows.z.copy(), b.rows.z.copy()
    rng_a = a.rng
    exchange_states(a, b)
    assert np.array_equal(a.rows.z, zb) and np.array_equal(b.rows.z, za)
    assert a.beta == 1.0 and b.beta == 0.5 and a.rng is rng_a
    for _ in range(3):
        sweep(a)
        sweep(b)
    a.validate()
    b.validate()


def test_run_config_defaults_and_validation():
    cfg = RunConfig()
    assert (cfg.burn_in, cfg.kept_iterations, cfg.thin, cfg.chains) == (10000, 40000, 10, 4)
    assert cfg.n_kept == 4000
    with pytest.raises(ValueError):
        RunConfig(kept_iterations=45, thin=10)
    with pytest.raises(ValueError):
        RunConfig(chains=0)


def _small_net():
    return random_network(np.random.default_rng(4), n=6, m=2)


def test_single_chain_is_plain_gibbs():
    net = _small_net()
    hyper = Hyperparameters(a_theta=np.ones(4))
    opts = SamplerOptions(supervised=False)
    cfg = RunConfig(burn_in=5, kept_iterations=20, thin=2, seed=13, chains=1)
    out = run(net, None, hyper, cfg, options=opts)
    assert out.S == 10
    assert out.metadata["swap_acceptance"]["sampling"] == []
    seeds = np.random.SeedSequence(13).spawn(2)
    chain = ChainState.from_prior(Model(net, None, hyper, opts), 1.0, np.random.default_rng(seeds[0]))
    expect = []
    for it in range(25):
        sweep(chain)
        if it >= 5 and (it - 5 + 1) % 2 == 0:
            expect.append(chain.snapshot()["z1"])
    assert np.array_equal(out.z1, np.stack(expect))


def test_run_is_deterministic():
    net = _small_net()
    cfg = RunConfig(burn_in=20, kept_iterations=40, thin=4, seed=3, chains=3)
    a = run(net, config=cfg)
    b = run(net, config=cfg)
    assert a == b
    assert a.metadata["ladder_final"] != a.metadata["ladder_initial"]
    c = run(net, config=RunConfig(burn_in=20, kept_iterations=40, thin=4, seed=3, chains=3, threads=3))
    assert np.array_equal(a.z1, c.z1) and np.array_equal(a.z2, c.z2)


def test_ladder_frozen_after_burn_in():
    net = _small_net()
    out = run(net, config=RunConfig(burn_in=0, kept_iterations=10, thin=1, seed=1, chains=3))
    assert out.metadata["ladder_final"] == pytest.approx(out.metadata["ladder_initial"])
    with pytest.raises(ValueError):
        run(net, config=RunConfig(chains=2, kept_iterations=10, thin=1), ladder=Ladder.geometric(3))
