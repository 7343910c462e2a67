"""Collapsed Gibbs sweeps over both partition sequences at a given inverse temperature."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import (
    BlockSuffStats,
    Covariates,
    Hyperparameters,
    NetworkSequence,
    build_suff_stats,
    canonicalize_sequence,
)
from .likelihood import LogGammaTable, log_marginal_likelihood
from .prior import CrpwParams, check_compatibility, drpmw_sample, eta_log_factor, eta_log_factor_from, eta_sufficient


@dataclass
class SamplerOptions:
    """Switches for the sweep kernel.

    ``fixed_alpha`` / ``fixed_eta`` freeze the corresponding hyperparameters
    (both sequences) at the given value; ``eta_step`` is the random-walk scale
    of the Metropolis update on ``log eta``.
    """

    supervised: bool = True
    fixed_alpha: float | None = None
    fixed_eta: float | None = None
    eta_step: float = 0.5
    eta_init: float | None = None
    backend: str | None = None


class Model:
    """Data, hyperparameters and precomputed tables shared by all chains."""

    def __init__(self, net: NetworkSequence, covariates: Covariates | None = None,
                 hyper: Hyperparameters | None = None, options: SamplerOptions | None = None):
        self.net = net
        self.covariates = covariates or Covariates.absent(net.n)
        if self.covariates.w.size != net.n:
            raise ValueError("covariates do not match the number of nodes")
        self.hyper = hyper or Hyperparameters(a_theta=np.ones(net.n_categories))
        if self.hyper.a_theta.size != net.n_categories:
            raise ValueError(
                f"a_theta has {self.hyper.a_theta.size} entries for {net.n_categories} categories"
            )
        self.options = options or SamplerOptions()
        self.supervised = bool(self.options.supervised and self.covariates.present)
        self.a_w = self.hyper.cohesion(self.covariates.L)
        self.impl = (
            kernels.get_backend(self.options.backend) if self.options.backend else kernels.impl
        )
        self.table = LogGammaTable(self.hyper.a_theta, net.n * net.n + 1)
        self.y_rows = np.ascontiguousarray(net.y - 1, dtype=np.int32)
        self.y_cols = np.ascontiguousarray(self.y_rows.transpose(0, 2, 1))

    @property
    def directed(self) -> bool:
        return self.net.directed

    def crpw_params(self, eta) -> CrpwParams:
        return CrpwParams(eta, self.a_w, self.supervised)


@dataclass
class SideState:
    """One partition sequence with its persistence indicators and hyperparameters."""

    z: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    eta: float
    sizes: np.ndarray = field(repr=False)
    H: np.ndarray
    wcnt: np.ndarray = field(repr=False)
    kernel: object = field(default=None, repr=False)

    def canonical(self) -> np.ndarray:
        return canonicalize_sequence(self.z)


def _side_arrays(model, z, gamma, alpha, eta):
    m, n = z.shape
    z = np.ascontiguousarray(z, dtype=np.int32)
    sizes = np.zeros((m, n), dtype=np.int64)
    wcnt = np.zeros((m, n, model.covariates.L), dtype=np.int64)
    for x in range(m):
        sizes[x] = np.bincount(z[x], minlength=n)
        np.add.at(wcnt[x], (z[x], model.covariates.w), 1)
    H = (z.max(axis=1) + 1).astype(np.int64)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size == m - 1:
        alpha = np.concatenate([[np.nan], alpha])
    return SideState(
        z=z,
        gamma=np.ascontiguousarray(gamma, dtype=np.int32),
        alpha=np.ascontiguousarray(alpha, dtype=float),
        eta=float(eta),
        sizes=sizes,
        H=H,
        wcnt=wcnt,
    )


class ChainState:
    """State of one tempered chain.

    In undirected mode ``cols`` is the same object as ``rows``.
    """

    def __init__(self, model: Model, rows: SideState, cols: SideState | None,
                 beta: float = 1.0, rng=None):
        self.model = model
        self.rows = rows
        self.cols = rows if (cols is None or not model.directed) else cols
        self.beta = float(beta)
        self.rng = np.random.default_rng(rng)
        stats = build_suff_stats(model.net, self.rows.z, self.cols.z)
        self.counts = stats.counts
        self._bind()
        self.refresh_log_lik()

    # -- construction -----------------------------------------------------

    @classmethod
    def from_partitions(cls, model, z1, z2=None, gamma1=None, gamma2=None, alpha1=None,
                        alpha2=None, eta1=1.0, eta2=None, beta=1.0, rng=None):
        m, n = model.net.m, model.net.n
        z1 = canonicalize_sequence(np.atleast_2d(z1))
        gamma1 = np.zeros((m, n), np.int32) if gamma1 is None else gamma1
        alpha1 = np.full(m - 1, 0.5) if alpha1 is None else alpha1
        rows = _side_arrays(model, z1, gamma1, alpha1, eta1)
        cols = None
        if model.directed:
            z2 = z1 if z2 is None else canonicalize_sequence(np.atleast_2d(z2))
            gamma2 = np.zeros((m, n), np.int32) if gamma2 is None else gamma2
            alpha2 = np.full(m - 1, 0.5) if alpha2 is None else alpha2
            cols = _side_arrays(model, z2, gamma2, alpha2, eta1 if eta2 is None else eta2)
        return cls(model, rows, cols, beta, rng)

    @classmethod
    def from_prior(cls, model, beta=1.0, rng=None):
        """Start from a draw of the dependent partition prior.

        ``alpha`` is drawn from its Beta prior; ``eta`` starts at
        ``options.eta_init`` (default: the Gamma prior mean) because draws from
        very diffuse Gamma priors are numerically degenerate.
        """
        rng = np.random.default_rng(rng)
        opts, hyper = model.options, model.hyper
        m, n = model.net.m, model.net.n
        w = model.covariates.w if model.supervised else None
        drawn = []
        for _ in range(2 if model.directed else 1):
            if opts.fixed_alpha is not None:
                alpha = np.full(m - 1, float(opts.fixed_alpha))
            else:
                alpha = rng.beta(hyper.a_alpha, hyper.b_alpha, size=m - 1)
            if opts.fixed_eta is not None:
                eta = float(opts.fixed_eta)
            elif opts.eta_init is not None:
                eta = float(opts.eta_init)
            else:
                eta = hyper.a_eta / hyper.b_eta
            z, gamma = drpmw_sample(n, m, model.crpw_params(eta), w, alpha, rng)
            drawn.append((z, gamma, alpha, eta))
        (z1, g1, a1, e1) = drawn[0]
        (z2, g2, a2, e2) = drawn[-1]
        return cls.from_partitions(model, z1, z2, g1, g2, a1, a2, e1, e2, beta, rng)

    def _bind(self):
        model = self.model
        impl = model.impl
        common = dict(
            w=model.covariates.w,
            aw=np.ascontiguousarray(model.a_w, dtype=float),
            supervised=model.supervised,
            undirected=not model.directed,
            include_diagonal=model.net.include_diagonal,
            lgc=model.table.c,
            lgdot=model.table.dot,
        )
        r, c = self.rows, self.cols
        r.kernel = impl.SideKernel(
            model.y_rows, self.counts, r.z, c.z, r.sizes, r.H, c.H, r.gamma, r.wcnt, **common
        )
        if model.directed:
            c.kernel = impl.SideKernel(
                model.y_cols, self.counts.transpose(0, 2, 1, 3), c.z, r.z, c.sizes, c.H, r.H,
                c.gamma, c.wcnt, **common
            )

    # -- views --------------------------------------------------------------

    @property
    def sides(self):
        return (self.rows, self.cols) if self.model.directed else (self.rows,)

    def side(self, which: str) -> SideState:
        if which in ("rows", "row", 0):
            return self.rows
        if which in ("cols", "col", 1):
            return self.cols
        raise ValueError(f"unknown sequence {which!r}")

    @property
    def stats(self) -> BlockSuffStats:
        return BlockSuffStats(
            self.counts, self.rows.H, self.cols.H, self.model.directed, self.model.net.include_diagonal
        )

    def compute_log_lik(self) -> float:
        model = self.model
        return float(
            model.impl.log_likelihood(
                self.counts, self.rows.H, self.cols.H, not model.directed, model.table.c, model.table.dot
            )
        )

    def refresh_log_lik(self):
        self.log_lik = self.compute_log_lik()
        return self.log_lik

    def validate(self):
        """Recheck every invariant from scratch; raises AssertionError on failure."""
        net = self.model.net
        fresh = build_suff_stats(net, canonicalize_sequence(self.rows.z), canonicalize_sequence(self.cols.z))
        ref = build_suff_stats(net, self.rows.z, self.cols.z)
        assert np.array_equal(ref.counts, self.counts), "block counts out of sync"
        exact = log_marginal_likelihood(fresh, self.model.hyper.a_theta)
        assert abs(self.compute_log_lik() - exact) < 1e-8, "log likelihood mismatch"
        assert abs(self.log_lik - exact) < 1e-8, "stale log_lik"
        for side in self.sides:
            for x in range(net.m):
                assert np.array_equal(side.sizes[x], np.bincount(side.z[x], minlength=net.n))
                assert side.H[x] == side.z[x].max() + 1
                if x > 0:
                    assert check_compatibility(side.z[x - 1], side.z[x], side.gamma[x].astype(bool)), (
                        f"incompatible partitions at index {x}"
                    )
        return True

    def snapshot(self) -> dict:
        """Canonical copy of the sampled quantities."""
        out = {
            "z1": self.rows.canonical(),
            "alpha1": self.rows.alpha[1:].copy(),
            "eta1": self.rows.eta,
            "gamma1": self.rows.gamma.copy(),
            "log_lik": self.log_lik,
        }
        if self.model.directed:
            out.update(
                z2=self.cols.canonical(),
                alpha2=self.cols.alpha[1:].copy(),
                eta2=self.cols.eta,
                gamma2=self.cols.gamma.copy(),
            )
        return out


# -- single-site updates ------------------------------------------------------


def label_probabilities(chain: ChainState, sequence, x, i):
    """Full-conditional seat probabilities for node ``i`` of ``sequence`` at index ``x``."""
    side = chain.side(sequence)
    return side.kernel.label_probs(x, i, chain.beta, side.eta)


def gamma_probability(chain: ChainState, sequence, x, i) -> float:
    side = chain.side(sequence)
    return float(side.kernel.gamma_prob(x, i, side.alpha[x], side.eta))


def update_label(chain: ChainState, sequence, x, i):
    side = chain.side(sequence)
    if x > 0 and side.gamma[x, i]:
        return int(side.z[x, i])
    return side.kernel.update_label(x, i, chain.beta, side.eta, chain.rng)


def update_gamma(chain: ChainState, sequence, x, i):
    if x < 1:
        raise ValueError("persistence indicators start at the second index")
    side = chain.side(sequence)
    return side.kernel.update_gamma(x, i, side.alpha[x], side.eta, chain.rng)


def update_alpha(chain: ChainState, sequence, x):
    side = chain.side(sequence)
    if chain.model.options.fixed_alpha is not None:
        return side.alpha[x]
    hyper = chain.model.hyper
    kept = int(side.gamma[x].sum())
    n = side.z.shape[1]
    side.alpha[x] = chain.rng.beta(hyper.a_alpha + kept, hyper.b_alpha + n - kept)
    return side.alpha[x]


def eta_log_target(eta, side: SideState, hyper: Hyperparameters) -> float:
    return (hyper.a_eta - 1.0) * np.log(eta) - hyper.b_eta * eta + eta_log_factor(eta, side.z, side.gamma)


def update_eta(chain: ChainState, sequence, step=None):
    """Random-walk Metropolis step on ``log eta``."""
    side = chain.side(sequence)
    opts = chain.model.options
    if opts.fixed_eta is not None:
        return side.eta
    step = opts.eta_step if step is None else step
    hyper = chain.model.hyper
    cur = np.log(side.eta)
    prop = cur + step * chain.rng.standard_normal()
    log_u = np.log(chain.rng.random())
    new_eta = float(np.exp(prop))
    if new_eta > 0 and np.isfinite(new_eta):
        k, g = eta_sufficient(side.z, side.gamma)
        n = side.z.shape[1]

        def target(eta, log_eta):
            # Gamma prior on eta, written on the log scale (Jacobian included)
            return hyper.a_eta * log_eta - hyper.b_eta * eta + eta_log_factor_from(eta, k, g, n)

        if log_u < target(new_eta, prop) - target(side.eta, cur):
            side.eta = new_eta
    return side.eta


def sweep(chain: ChainState) -> ChainState:
    """One systematic scan: labels, persistence, alpha, eta; rows then columns."""
    m = chain.model.net.m
    for side in chain.sides:
        which = "rows" if side is chain.rows else "cols"
        side.kernel.label_pass(chain.beta, side.eta, chain.rng)
        side.kernel.gamma_pass(side.alpha, side.eta, chain.rng)
        for x in range(1, m):
            update_alpha(chain, which, x)
        update_eta(chain, which)
    chain.refresh_log_lik()
    return chain
