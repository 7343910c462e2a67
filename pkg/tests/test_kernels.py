import numpy as np
import pytest
from conftest import random_network

from depsbm import kernels
from depsbm.core import Covariates, Hyperparameters
from depsbm.gibbs import ChainState, Model, SamplerOptions, label_probabilities, sweep

compiled = pytest.importorskip("depsbm._kernels")


def _pair(net, covariates=None, **opts):
    models = [Model(net, covariates, Hyperparameters(a_theta=np.ones(net.n_categories)),
                    SamplerOptions(backend=b, **opts)) for b in ("python", "cython")]
    return [ChainState.from_prior(md, beta=0.7, rng=42) for md in models]


def test_backend_selection():
    assert kernels.get_backend("python").BACKEND == "python"
    assert kernels.get_backend("cython").BACKEND == "cython"
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("directed", [True, False])
@pytest.mark.parametrize("supervised", [True, False])
def test_backends_realise_the_same_chain(rng, directed, supervised):
    net = random_network(rng, n=9, m=3, directed=directed, include_diagonal=directed)
    cov = Covariates(rng.integers(0, 3, size=9), 3)
    py, cy = _pair(net, cov, supervised=supervised)
    for _ in range(30):
        sweep(py)
        sweep(cy)
        for a, b in zip(py.sides, cy.sides):
            assert np.array_equal(a.z, b.z)
            assert np.array_equal(a.gamma, b.gamma)
            assert a.eta == b.eta
            assert np.allclose(a.alpha[1:], b.alpha[1:], rtol=0, atol=0)
        assert np.array_equal(py.counts, cy.counts)
        assert py.log_lik == pytest.approx(cy.log_lik, abs=1e-9)
    py.validate()
    cy.validate()


def test_label_probabilities_agree(rng):
    net = random_network(rng, n=8, m=2)
    py, cy = _pair(net)
    for seq in ("rows", "cols"):
        for x in range(2):
            for i in range(8):
                p_py, _ = label_probabilities(py, seq, x, i)
                p_cy, _ = label_probabilities(cy, seq, x, i)
                assert np.asarray(p_py) == pytest.approx(np.asarray(p_cy), abs=1e-12)
                assert float(np.sum(p_py)) == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(py.counts, cy.counts)
