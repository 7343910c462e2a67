"""Adaptive parallel tempering with deterministic even/odd swaps."""

from __future__ import annotations

import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import Covariates, Hyperparameters, NetworkSequence
from .gibbs import ChainState, Model, SamplerOptions, sweep
from .samples import SampleSet


@dataclass
class Ladder:
    """Inverse temperatures ``1 = betas[0] > betas[1] > ... > 0``.

    ``rho[l]`` parametrises the gap between slots ``l`` and ``l + 1`` through
    ``betas[l + 1] = betas[l] / (1 + exp(rho[l]))``.
    """

    betas: np.ndarray
    rho: np.ndarray = None
    target_acc: float = 0.234
    adapt_rate: float = 0.6
    swap_period: int = 1

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=float)
        if self.betas.ndim != 1 or self.betas.size < 1:
            raise ValueError("ladder needs at least one inverse temperature")
        if self.betas[0] != 1.0:
            raise ValueError("the first inverse temperature must be 1")
        if np.any(np.diff(self.betas) >= 0) or np.any(self.betas <= 0):
            raise ValueError("inverse temperatures must be positive and strictly decreasing")
        if self.rho is None:
            self.rho = np.log(self.betas[:-1] / self.betas[1:] - 1.0)
        self.rho = np.asarray(self.rho, dtype=float)
        if self.swap_period < 1:
            raise ValueError("swap_period must be at least 1")

    @classmethod
    def geometric(cls, T: int = 4, ratio: float = 0.6, **kw) -> Ladder:
        if T < 1:
            raise ValueError("need at least one chain")
        if not 0 < ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        return cls(ratio ** np.arange(T, dtype=float), **kw)

    @property
    def T(self) -> int:
        return int(self.betas.size)

    def rebuild(self):
        betas = np.empty(self.T)
        betas[0] = 1.0
        for l, r in enumerate(self.rho):
            betas[l + 1] = betas[l] / (1.0 + np.exp(r))
        self.betas = betas
        return self


@dataclass
class RunConfig:
    burn_in: int = 10000
    kept_iterations: int = 40000
    thin: int = 10
    seed: int = 0
    chains: int = 4
    threads: int = 1
    progress: int = 0

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if self.kept_iterations < 1 or self.thin < 1 or self.chains < 1 or self.threads < 1:
            raise ValueError("kept_iterations, thin, chains and threads must be positive")
        if self.kept_iterations % self.thin:
            raise ValueError("kept_iterations must be divisible by thin")
        if self.progress < 0:
            raise ValueError("progress interval must be non-negative")

    @property
    def n_kept(self) -> int:
        return self.kept_iterations // self.thin


def swap_log_ratio(beta_a, beta_b, ll_a, ll_b) -> float:
    """Log acceptance ratio for exchanging the states at ``beta_a`` and ``beta_b``."""
    return (beta_a - beta_b) * (ll_b - ll_a)


def swap_probability(beta_a, beta_b, ll_a, ll_b) -> float:
    return float(np.exp(min(0.0, swap_log_ratio(beta_a, beta_b, ll_a, ll_b))))


def exchange_states(a: ChainState, b: ChainState):
    """Swap the sampled states of two slots; temperatures and RNGs stay put."""
    a.rows, b.rows = b.rows, a.rows
    a.cols, b.cols = b.cols, a.cols
    a.counts, b.counts = b.counts, a.counts
    a.log_lik, b.log_lik = b.log_lik, a.log_lik


@dataclass
class SwapRecord:
    round_index: int
    pairs: list = field(default_factory=list)
    probs: list = field(default_factory=list)
    accepted: list = field(default_factory=list)


def swap_round(chains, ladder: Ladder, round_index: int, rng) -> SwapRecord:
    """One even/odd round: pairs (0,1),(2,3),... on even rounds, (1,2),... on odd."""
    rec = SwapRecord(round_index)
    for l in range(round_index % 2, len(chains) - 1, 2):
        a, b = chains[l], chains[l + 1]
        p = swap_probability(ladder.betas[l], ladder.betas[l + 1], a.log_lik, b.log_lik)
        ok = bool(rng.random() < p)
        if ok:
            exchange_states(a, b)
        rec.pairs.append(l)
        rec.probs.append(p)
        rec.accepted.append(ok)
    return rec


def adapt_ladder(ladder: Ladder, record: SwapRecord, t: int) -> Ladder:
    """Robbins-Monro step on the attempted gaps with gain ``t ** -adapt_rate``."""
    gain = float(t) ** (-ladder.adapt_rate)
    for l, p in zip(record.pairs, record.probs):
        ladder.rho[l] += gain * (p - ladder.target_acc)
    return ladder.rebuild()


def _ladder_for(config: RunConfig, ladder: Ladder | None) -> Ladder:
    if ladder is None:
        return Ladder.geometric(config.chains)
    if ladder.T != config.chains:
        raise ValueError(f"ladder has {ladder.T} slots but {config.chains} chains were requested")
    return Ladder(ladder.betas.copy(), ladder.rho.copy(), ladder.target_acc, ladder.adapt_rate,
                  ladder.swap_period)


def run(net: NetworkSequence, covariates: Covariates | None = None, hyper: Hyperparameters | None = None,
        config: RunConfig | None = None, ladder: Ladder | None = None,
        options: SamplerOptions | None = None, sink=None, stream=None) -> SampleSet:
    """Run the tempered sampler and return the thinned cold-chain draws.

    ``sink`` (optional) receives ``write_header(metadata)``, one
    ``write_record(dict)`` per kept draw and finally ``close(count, extra)``
    where ``extra`` holds the metadata only known at the end of the run.
    """
    config = config or RunConfig()
    ladder = _ladder_for(config, ladder)
    model = Model(net, covariates, hyper, options)
    seeds = np.random.SeedSequence(config.seed).spawn(config.chains + 1)
    swap_rng = np.random.default_rng(seeds[-1])
    chains = []
    for l in range(config.chains):
        rng = np.random.default_rng(seeds[l])
        chains.append(ChainState.from_prior(model, beta=ladder.betas[l], rng=rng))

    stream = sys.stderr if stream is None else stream
    T = config.chains
    total = config.burn_in + config.kept_iterations
    traj_every = max(1, config.burn_in // 100)
    trajectory = [ladder.betas.tolist()]
    acc_sum = {"burn_in": np.zeros(max(T - 1, 0)), "sampling": np.zeros(max(T - 1, 0))}
    acc_cnt = {"burn_in": np.zeros(max(T - 1, 0)), "sampling": np.zeros(max(T - 1, 0))}
    metadata = {
        "seed": int(config.seed),
        "config": asdict(config),
        "ladder_initial": ladder.betas.tolist(),
        "target_acc": ladder.target_acc,
        "adapt_rate": ladder.adapt_rate,
        "swap_period": ladder.swap_period,
        "backend": model.impl.BACKEND,
        "supervised": model.supervised,
        "directed": net.directed,
        "include_diagonal": net.include_diagonal,
        "n": net.n,
        "m": net.m,
        "categories": net.n_categories,
        "hyper": {
            "a_theta": model.hyper.a_theta.tolist(),
            "a_w": model.a_w.tolist(),
            "a_alpha": model.hyper.a_alpha,
            "b_alpha": model.hyper.b_alpha,
            "a_eta": model.hyper.a_eta,
            "b_eta": model.hyper.b_eta,
        },
    }
    if sink is not None:
        sink.write_header(metadata)

    records = []
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 and T > 1 else None
    round_index = 0
    adapt_step = 0
    try:
        for it in range(total):
            if pool is None:
                for ch in chains:
                    sweep(ch)
            else:
                list(pool.map(sweep, chains))
            burning = it < config.burn_in
            if T > 1 and (it + 1) % ladder.swap_period == 0:
                rec = swap_round(chains, ladder, round_index, swap_rng)
                phase = "burn_in" if burning else "sampling"
                for l, p in zip(rec.pairs, rec.probs):
                    acc_sum[phase][l] += p
                    acc_cnt[phase][l] += 1
                if burning:
                    adapt_step += 1
                    adapt_ladder(ladder, rec, adapt_step)
                    for l, ch in enumerate(chains):
                        ch.beta = float(ladder.betas[l])
                    if adapt_step % traj_every == 0:
                        trajectory.append(ladder.betas.tolist())
                round_index += 1
            if not burning and (it - config.burn_in + 1) % config.thin == 0:
                snap = chains[0].snapshot()
                snap["iteration"] = it + 1
                records.append(snap)
                if sink is not None:
                    sink.write_record(snap)
            if config.progress and (it + 1) % config.progress == 0:
                phase = "burn_in" if burning else "sampling"
                with np.errstate(invalid="ignore"):
                    rates = acc_sum[phase] / acc_cnt[phase]
                rate_txt = " ".join(f"{r:.3f}" for r in rates)
                print(
                    f"iter {it + 1}/{total} loglik {chains[0].log_lik:.3f} acc [{rate_txt}]",
                    file=stream,
                    flush=True,
                )
    finally:
        if pool is not None:
            pool.shutdown()

    with np.errstate(invalid="ignore"):
        final = {
            "swap_acceptance": {
                k: [None if not np.isfinite(v) else float(v) for v in acc_sum[k] / acc_cnt[k]]
                for k in acc_sum
            },
            "ladder_final": ladder.betas.tolist(),
            "ladder_trajectory": trajectory,
        }
    metadata.update(final)
    samples = SampleSet.from_records(records, metadata, net.directed)
    if sink is not None:
        sink.close(samples.S, final)
    return samples
