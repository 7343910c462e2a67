"""Posterior summaries: co-clustering matrices, point estimates and accuracy metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .core import NetworkSequence, build_suff_stats, canonicalize, canonicalize_sequence
from .samples import SampleSet


def coclustering(z) -> np.ndarray:
    z = np.asarray(z)
    return (z[:, None] == z[None, :]).astype(float)


def similarity_matrix(samples, sequence="rows", x: int = 0) -> np.ndarray:
    """Fraction of draws in which each pair of nodes shares a cluster.

    ``samples`` is a SampleSet or an array of label vectors with shape (S, n).
    """
    if isinstance(samples, SampleSet):
        draws = samples.labels(sequence)[:, x, :]
    else:
        draws = np.asarray(samples)
    S, n = draws.shape
    if S < 1:
        raise ValueError("need at least one draw")
    H = int(draws.max()) + 1
    onehot = np.zeros((n, S * H))
    cols = draws + H * np.arange(S)[:, None]
    onehot[np.tile(np.arange(n), S), cols.ravel()] = 1.0
    psm = onehot @ onehot.T / S
    np.fill_diagonal(psm, 1.0)
    return psm


def _entropy_bits(p) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def contingency(z_a, z_b) -> np.ndarray:
    a = canonicalize(z_a)
    b = canonicalize(z_b)
    if a.size != b.size:
        raise ValueError("partitions must have equal length")
    table = np.zeros((int(a.max(initial=-1)) + 1, int(b.max(initial=-1)) + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def vi_distance(z_a, z_b) -> float:
    """Variation of information in bits."""
    t = contingency(z_a, z_b)
    n = t.sum()
    if n == 0:
        return 0.0
    pab = t / n
    ha = _entropy_bits(pab.sum(axis=1))
    hb = _entropy_bits(pab.sum(axis=0))
    hab = _entropy_bits(pab.ravel())
    return max(0.0, 2.0 * hab - ha - hb)


def vi_lower_bound(z, psm) -> float:
    """Lower bound on the posterior expected VI of ``z`` given the similarity matrix."""
    z = np.asarray(z)
    psm = np.asarray(psm, dtype=float)
    same = z[:, None] == z[None, :]
    sizes = same.sum(axis=1)
    row = psm.sum(axis=1)
    inter = (same * psm).sum(axis=1)
    return float(np.mean(np.log2(sizes) + np.log2(row) - 2.0 * np.log2(inter)))


def hierarchical_candidates(psm, max_clusters: int | None = None) -> list[np.ndarray]:
    """All cuts of the average-linkage tree built on ``1 - psm``."""
    n = psm.shape[0]
    if n < 2:
        return [np.zeros(n, dtype=np.int64)]
    dist = np.clip(1.0 - psm, 0.0, None)
    dist = (dist + dist.T) / 2.0
    np.fill_diagonal(dist, 0.0)
    tree = linkage(squareform(dist, checks=False), method="average")
    kmax = n if max_clusters is None else min(n, max_clusters)
    return [canonicalize(fcluster(tree, k, criterion="maxclust")) for k in range(1, kmax + 1)]


def minvi_estimate(draws, psm=None, max_clusters: int | None = None, include_tree: bool = True):
    """Point estimate minimising the VI lower bound over draws plus tree cuts.

    ``draws`` has shape (S, n). Returns ``(labels, bound)`` with canonical
    0-based labels.
    """
    draws = np.atleast_2d(np.asarray(draws))
    if psm is None:
        psm = similarity_matrix(draws)
    cands = {}
    for z in draws:
        z = canonicalize(z)
        cands.setdefault(z.tobytes(), z)
    if include_tree:
        for z in hierarchical_candidates(psm, max_clusters):
            cands.setdefault(z.astype(np.int64).tobytes(), z.astype(np.int64))
    best, best_val = None, np.inf
    for z in cands.values():
        val = vi_lower_bound(z, psm)
        if val < best_val - 1e-12:
            best, best_val = z, val
    return canonicalize(best), float(best_val)


def meet_partition(partitions) -> np.ndarray:
    """Coarsest common refinement of the given label vectors."""
    parts = [np.asarray(p) for p in partitions]
    if not parts:
        raise ValueError("meet of an empty list of partitions")
    n = parts[0].size
    if any(p.size != n for p in parts):
        raise ValueError("partitions must have equal length")
    keys = np.stack([canonicalize(p) for p in parts], axis=1)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    return canonicalize(inverse.ravel())


def theta_plugin(net: NetworkSequence, zhat1, zhat2=None, a_theta=None) -> list[np.ndarray]:
    """Posterior-mean block probabilities under fixed point-estimate partitions.

    Returns one array of shape (H_x, K_x, C) per index. In undirected mode the
    array is symmetric in its first two axes.
    """
    a = np.ones(net.n_categories) if a_theta is None else np.asarray(a_theta, dtype=float)
    z1 = canonicalize_sequence(zhat1)
    z2 = z1 if (zhat2 is None or not net.directed) else canonicalize_sequence(zhat2)
    stats = build_suff_stats(net, z1, z2)
    out = []
    for x in range(net.m):
        blk = stats.block_counts(x).astype(float)
        if not net.directed:
            low = np.tril(np.ones(blk.shape[:2], dtype=bool), -1)
            blk = blk + np.where(low[..., None], blk, 0).transpose(1, 0, 2)
        out.append((a + blk) / (a.sum() + blk.sum(axis=-1, keepdims=True)))
    return out


def mcs(theta_x) -> tuple[np.ndarray, np.ndarray]:
    """Marginal connectivity scores (rows, columns) from one index's block probabilities.

    Uses the two highest of four ordinal levels.
    """
    theta_x = np.asarray(theta_x, dtype=float)
    if theta_x.shape[-1] != 4:
        raise ValueError(
            f"connectivity scores need the four-level coding, got {theta_x.shape[-1]} categories; "
            "re-discretise with three thresholds"
        )
    high = theta_x[..., 2] + theta_x[..., 3]
    return high.mean(axis=1), high.mean(axis=0)


class ClusteringScores(NamedTuple):
    rand: float
    adjusted_rand: float
    nmi: float


def _comb2(v):
    v = np.asarray(v, dtype=float)
    return v * (v - 1.0) / 2.0


def rand_index(z_a, z_b) -> float:
    t = contingency(z_a, z_b)
    n = t.sum()
    pairs = _comb2(n)
    if pairs == 0:
        return 1.0
    same_both = _comb2(t).sum()
    same_a = _comb2(t.sum(axis=1)).sum()
    same_b = _comb2(t.sum(axis=0)).sum()
    return float((pairs + 2.0 * same_both - same_a - same_b) / pairs)


def adjusted_rand_index(z_a, z_b) -> float:
    t = contingency(z_a, z_b)
    n = t.sum()
    pairs = _comb2(n)
    index = _comb2(t).sum()
    sa = _comb2(t.sum(axis=1)).sum()
    sb = _comb2(t.sum(axis=0)).sum()
    expected = sa * sb / pairs if pairs else 0.0
    top = 0.5 * (sa + sb)
    if top == expected:
        return 1.0
    return float((index - expected) / (top - expected))


def normalized_mutual_info(z_a, z_b) -> float:
    """Mutual information over the arithmetic mean of the two entropies."""
    t = contingency(z_a, z_b)
    n = t.sum()
    if t.shape[0] == t.shape[1] == 1 or n == 0:
        return 1.0
    p = t / n
    ha = _entropy_bits(p.sum(axis=1))
    hb = _entropy_bits(p.sum(axis=0))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    mi = ha + hb - _entropy_bits(p.ravel())
    return float(max(0.0, mi) / ((ha + hb) / 2.0))


def clustering_metrics(z_true, z_est) -> ClusteringScores:
    return ClusteringScores(
        rand_index(z_true, z_est), adjusted_rand_index(z_true, z_est), normalized_mutual_info(z_true, z_est)
    )


@dataclass
class PosteriorSummary:
    """Per-index summaries for the row and column sequences (0-based labels)."""

    psm1: np.ndarray
    zhat1: np.ndarray
    vi_bound1: np.ndarray
    theta_hat: list
    mcs1: list
    psm2: np.ndarray | None = None
    zhat2: np.ndarray | None = None
    vi_bound2: np.ndarray | None = None
    mcs2: list | None = None
    meet: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def directed(self) -> bool:
        return self.psm2 is not None


def summarize(samples: SampleSet, net: NetworkSequence, a_theta=None, meet_indices=None,
              max_clusters: int | None = None) -> PosteriorSummary:
    """Similarity matrices, min-VI estimates, block probabilities and scores.

    ``meet_indices`` (0-based) selects indices whose point estimates are
    intersected into meet partitions for each sequence.
    """
    if samples.m != net.m or samples.n != net.n:
        raise ValueError("samples do not match the network dimensions")
    sides = ("rows", "cols") if samples.directed else ("rows",)
    psm, zhat, bound = {}, {}, {}
    for side in sides:
        draws = samples.labels(side)
        psm[side] = np.stack([similarity_matrix(draws[:, x, :]) for x in range(net.m)])
        est = [minvi_estimate(draws[:, x, :], psm[side][x], max_clusters) for x in range(net.m)]
        zhat[side] = np.stack([e[0] for e in est]).astype(np.int32)
        bound[side] = np.array([e[1] for e in est])
    z2 = zhat["cols"] if samples.directed else None
    theta = theta_plugin(net, zhat["rows"], z2, a_theta)
    scores = [mcs(t) for t in theta] if net.n_categories == 4 else None
    meet = {}
    if meet_indices:
        idx = sorted(set(int(i) for i in meet_indices))
        for side in sides:
            meet[side] = meet_partition([zhat[side][x] for x in idx])
        meet["indices"] = idx
    return PosteriorSummary(
        psm1=psm["rows"],
        zhat1=zhat["rows"],
        vi_bound1=bound["rows"],
        theta_hat=theta,
        mcs1=[s[0] for s in scores] if scores else [],
        psm2=psm.get("cols"),
        zhat2=zhat.get("cols"),
        vi_bound2=bound.get("cols"),
        mcs2=[s[1] for s in scores] if (scores and samples.directed) else None,
        meet=meet,
        metadata={"nmi_normalization": "arithmetic", "information_unit": "bits", "S": samples.S},
    )
