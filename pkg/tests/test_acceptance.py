"""End-to-end acceptance checks, one test per criterion.

Each check records a PASS/FAIL line that is echoed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from oracles import directed_log_lik, exact_two_index_posterior, undirected_log_lik
from scipy import stats as sps

from depsbm.cli import main
from depsbm.core import Covariates, Hyperparameters, NetworkSequence, canonicalize_sequence, build_suff_stats
from depsbm.gibbs import ChainState, Model, SamplerOptions, sweep
from depsbm.likelihood import column_move_log_ratio, row_move_log_ratio
from depsbm.prior import CrpwParams, crpw_sample, drpmw_sample
from depsbm.summaries import (
    adjusted_rand_index,
    meet_partition,
    minvi_estimate,
    normalized_mutual_info,
    rand_index,
    similarity_matrix,
    vi_distance,
)
from depsbm.synthetic import replicate_study, scenario
from depsbm.tempering import RunConfig, run

REPORT = []


def record(number, ok, detail):
    REPORT.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


TOY_Y = np.array([
    [[1, 1, 2, 2], [1, 1, 2, 1], [2, 2, 1, 1], [2, 1, 1, 2]],
    [[1, 2, 2, 2], [1, 1, 2, 2], [2, 2, 1, 1], [1, 2, 1, 1]],
])
TOY_OPTIONS = SamplerOptions(supervised=False, fixed_alpha=0.5, fixed_eta=1.0)
TOY_SWEEPS = 200_000


def _toy_net():
    return NetworkSequence(TOY_Y, 2, directed=True, include_diagonal=True)


def test_criterion_1_exact_posterior():
    t0 = time.perf_counter()
    exact_rows, exact_cols = exact_two_index_posterior(TOY_Y, 1.0, 0.5, [1.0, 1.0])
    model = Model(_toy_net(), None, Hyperparameters(a_theta=np.ones(2)), TOY_OPTIONS)
    chain = ChainState.from_prior(model, 1.0, rng=2024)
    acc_r = np.zeros((2, 4, 4))
    acc_c = np.zeros((2, 4, 4))
    for _ in range(TOY_SWEEPS):
        sweep(chain)
        zr, zc = chain.rows.z, chain.cols.z
        acc_r += zr[:, :, None] == zr[:, None, :]
        acc_c += zc[:, :, None] == zc[:, None, :]
    err = max(np.abs(acc_r / TOY_SWEEPS - exact_rows).max(), np.abs(acc_c / TOY_SWEEPS - exact_cols).max())
    secs = time.perf_counter() - t0
    record(1, err <= 0.02 and secs < 300, f"max |PSM - exact| = {err:.4f} (tol 0.02), {secs:.0f}s")


def test_criterion_2_move_ratio_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    worst = 0.0
    for case in range(1000):
        directed = case % 4 != 3
        n, m, C = int(rng.integers(2, 9)), int(rng.integers(1, 4)), int(rng.integers(2, 5))
        y = rng.integers(1, C + 1, size=(m, n, n))
        if not directed:
            y = np.triu(y, 1) + np.triu(y, 1).transpose(0, 2, 1) + np.eye(n, dtype=int)[None]
        diag = bool(directed and rng.random() < 0.5)
        net = NetworkSequence(y, C, directed, diag)
        a = rng.uniform(0.2, 3.0, size=C)
        z1 = canonicalize_sequence(rng.integers(0, 4, size=(m, n)))
        z2 = canonicalize_sequence(rng.integers(0, 4, size=(m, n))) if directed else z1
        stats = build_suff_stats(net, z1, z2)
        x, i = int(rng.integers(m)), int(rng.integers(n))
        side = "col" if (directed and rng.random() < 0.5) else "row"
        own = z1 if side == "row" else z2
        h = int(rng.integers(own[x].max() + 2))
        fn = row_move_log_ratio if side == "row" else column_move_log_ratio
        got = fn(stats, net, x, i, h, z1, z2, a)
        moved = own[x].copy()
        moved[i] = h
        if directed:
            zr, zc = (moved, z2[x]) if side == "row" else (z1[x], moved)
            full = directed_log_lik(y[x], zr.tolist(), zc.tolist(), a, diag)
            rest = directed_log_lik(y[x], z1[x].tolist(), z2[x].tolist(), a, diag,
                                    i if side == "row" else None, i if side == "col" else None)
        else:
            full = undirected_log_lik(y[x], moved.tolist(), a)
            rest = undirected_log_lik(y[x], z1[x].tolist(), a, drop=i)
        worst = max(worst, abs(got - (full - rest)))
    secs = time.perf_counter() - t0
    record(2, worst <= 1e-10 and secs < 10, f"max abs error {worst:.2e} over 1000 moves (tol 1e-10), {secs:.1f}s")


GEWEKE_HYPER = Hyperparameters(a_theta=np.ones(4), a_alpha=2.0, b_alpha=2.0, a_eta=2.0, b_eta=1.0)
GEWEKE_DRAWS = 100_000
GEWEKE_THIN = 100


def _prior_statistics(rng, n, m):
    # both sequences share one prior, so a single reference sample serves both
    h = GEWEKE_HYPER
    alphas = rng.beta(h.a_alpha, h.b_alpha, size=(GEWEKE_DRAWS, m - 1))
    etas = rng.gamma(h.a_eta, 1.0 / h.b_eta, size=GEWEKE_DRAWS)
    out = np.empty((GEWEKE_DRAWS, 2 * m - 1))
    for s in range(GEWEKE_DRAWS):
        z, g = drpmw_sample(n, m, CrpwParams(etas[s]), None, alphas[s], rng)
        out[s, :m] = z.max(axis=1) + 1
        out[s, m:] = g[1:].sum(axis=1)
    return out


def _chain_statistics(rng, n, m):
    y = rng.integers(1, 5, size=(m, n, n))
    model = Model(NetworkSequence(y, 4), None, GEWEKE_HYPER, SamplerOptions(supervised=False))
    chain = ChainState.from_prior(model, beta=0.0, rng=rng)
    kept = GEWEKE_DRAWS // GEWEKE_THIN
    out = np.empty((kept, 2, 2 * m - 1))
    for s in range(GEWEKE_DRAWS):
        sweep(chain)
        if (s + 1) % GEWEKE_THIN == 0:
            for side, st in enumerate((chain.rows, chain.cols)):
                out[s // GEWEKE_THIN, side, :m] = st.z.max(axis=1) + 1
                out[s // GEWEKE_THIN, side, m:] = st.gamma[1:].sum(axis=1)
    return out


def test_criterion_3_prior_invariance():
    t0 = time.perf_counter()
    n, m = 6, 3
    names = [f"H{x + 1}" for x in range(m)] + [f"kept{x + 2}" for x in range(m - 1)]
    worst = (1.0, "")
    for seed in (0, 1, 2):
        rng = np.random.default_rng(seed)
        prior = _prior_statistics(rng, n, m)
        chain = _chain_statistics(rng, n, m)
        for side in range(2):
            for k, name in enumerate(names):
                p = sps.ks_2samp(prior[:, k], chain[:, side, k]).pvalue
                if p < worst[0]:
                    worst = (p, f"seed {seed} {('rows', 'cols')[side]} {name}")
    secs = time.perf_counter() - t0
    record(3, worst[0] > 0.01 and secs < 120, f"min KS p = {worst[0]:.3f} ({worst[1]}), {secs:.0f}s")


DESK = RunConfig(burn_in=2000, kept_iterations=8000, thin=4, chains=4)


def _desk_study(number):
    spec = scenario(number, n=40, m=5)
    t0 = time.perf_counter()
    res = replicate_study(spec, 10, DESK, SamplerOptions(supervised=False), seed=number)
    secs = time.perf_counter() - t0
    ari = [r for r in res.summary if r["metric"] == "ari"]
    worst = min(ari, key=lambda r: r["median"])
    return ari, worst, secs


@pytest.mark.slow
def test_criterion_4_directed_recovery():
    ari, worst, secs = _desk_study(1)
    assert {r["sequence"] for r in ari} == {"rows", "cols"} and len(ari) == 10
    ok = all(r["median"] >= 0.90 for r in ari)
    record(4, ok and secs < 900,
           f"lowest median ARI {worst['median']:.3f} ({worst['sequence']} index {worst['index']}), {secs:.0f}s")


@pytest.mark.slow
def test_criterion_5_undirected_recovery():
    ari, worst, secs = _desk_study(2)
    assert {r["sequence"] for r in ari} == {"rows"} and len(ari) == 5
    ok = all(r["median"] >= 0.90 for r in ari)
    record(5, ok and secs < 900, f"lowest median ARI {worst['median']:.3f} (index {worst['index']}), {secs:.0f}s")


def _purity(z, w):
    return sum(np.bincount(w[z == h]).max() for h in np.unique(z)) / z.size


def test_criterion_6_crp_statistics():
    rng = np.random.default_rng(6)
    counts = np.array([crpw_sample(50, CrpwParams(1.0), rng=rng).max() + 1 for _ in range(10_000)])
    target = sum(1.0 / i for i in range(1, 51))
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    mean_ok = abs(counts.mean() - target) < 3 * se
    w = np.repeat(np.arange(5), 10)
    sup_params = CrpwParams(1.0, np.full(5, 0.05), supervised=True)
    sup = np.array([_purity(crpw_sample(50, sup_params, w, rng), w) for _ in range(2000)])
    plain = np.array([_purity(crpw_sample(50, CrpwParams(1.0), rng=rng), w) for _ in range(2000)])
    p = sps.wilcoxon(sup, plain, alternative="greater").pvalue
    record(6, mean_ok and p < 0.01 and sup.mean() > plain.mean(),
           f"mean clusters {counts.mean():.3f} vs {target:.3f} (3 se = {3 * se:.3f}); "
           f"purity {sup.mean():.3f} vs {plain.mean():.3f}, paired p = {p:.1e}")


def _toy_psms(chains):
    cfg = RunConfig(burn_in=1000, kept_iterations=TOY_SWEEPS, thin=10, seed=7, chains=chains)
    s = run(_toy_net(), None, Hyperparameters(a_theta=np.ones(2)), cfg, options=TOY_OPTIONS)
    return np.stack([similarity_matrix(s, side, x) for side in ("rows", "cols") for x in range(2)])


def test_criterion_7_tempering_consistency():
    diff = np.abs(_toy_psms(1) - _toy_psms(4)).max()
    record(7, diff <= 0.03, f"max |PSM(T=1) - PSM(T=4)| = {diff:.4f} (tol 0.03)")


def test_criterion_8_summary_toolchain():
    rng = np.random.default_rng(8)
    truth = np.repeat([0, 1, 2, 3], [3, 5, 2, 6])
    psm = (truth[:, None] == truth[None, :]).astype(float)
    draws = rng.integers(0, 4, size=(20, truth.size))
    est, bound = minvi_estimate(draws, psm)
    block_ok = np.array_equal(est, truth) and abs(bound) < 1e-12
    failures = 0
    for _ in range(10_000):
        n = int(rng.integers(2, 16))
        a, b, c = (rng.integers(0, int(rng.integers(1, 6)), size=n) for _ in range(3))
        perm = rng.permutation(8)
        checks = [
            vi_distance(a, a) == 0.0,
            rand_index(a, a) == adjusted_rand_index(a, a) == normalized_mutual_info(a, a) == 1.0,
            np.array_equal(meet_partition([a, a]), meet_partition([a])),
            np.array_equal(meet_partition([a, b]), meet_partition([b, a])),
            np.array_equal(meet_partition([meet_partition([a, b]), c]), meet_partition([a, meet_partition([b, c])])),
            vi_distance(a, c) <= vi_distance(a, b) + vi_distance(b, c) + 1e-12,
        ]
        for fn in (vi_distance, rand_index, adjusted_rand_index, normalized_mutual_info):
            ab = fn(a, b)
            checks.append(abs(ab - fn(b, a)) < 1e-12)
            checks.append(abs(ab - fn(perm[a], b)) < 1e-12 and abs(ab - fn(a, perm[b])) < 1e-12)
        failures += not all(checks)
    record(8, block_ok and failures == 0, f"block PSM recovered: {block_ok}; property failures {failures}/10000")


def _pipeline(root):
    sim = root / "sim"
    assert main(["simulate", "--scenario", "1", "--n", "16", "--m", "3", "--seed", "11", "--out-dir", str(sim)]) == 0
    assert main(["fit", "--network", "sim/network.csv", "--seed", "5", "--out", "samples.ndjson",
                 "--burn-in", "50", "--iterations", "100", "--thin", "5", "--chains", "3"]) == 0
    assert main(["summarize", "--samples", "samples.ndjson", "--network", "sim/network.csv",
                 "--out-dir", "summary", "--meet", "2,3"]) == 0
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_9_end_to_end_determinism(tmp_path, monkeypatch):
    outputs = []
    for name in ("first", "second"):
        root = tmp_path / name
        root.mkdir()
        monkeypatch.chdir(root)
        outputs.append(_pipeline(root))
    same = outputs[0].keys() == outputs[1].keys() and all(outputs[0][k] == outputs[1][k] for k in outputs[0])
    differing = sorted(k for k in outputs[0] if outputs[0][k] != outputs[1].get(k))
    record(9, same and len(outputs[0]) > 10, f"{len(outputs[0])} files compared, differing: {differing or 'none'}")


@pytest.mark.full_scale
def test_full_scale_recovery():
    spec = scenario(1)
    res = replicate_study(spec, 50, RunConfig(), SamplerOptions(supervised=False), seed=100)
    ari = [r["median"] for r in res.summary if r["metric"] == "ari"]
    assert min(ari) >= 0.95
