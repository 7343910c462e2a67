"""Dirichlet-categorical collapsed likelihood and single-node move ratios."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .core import BlockSuffStats, NetworkSequence, node_profile


class LogGammaTable:
    """Cached ``log G(a_c + t)`` and ``log G(a_dot + t)`` for integer ``t``."""

    def __init__(self, a_theta, size: int = 64):
        self.a = np.asarray(a_theta, dtype=float)
        self.a_dot = float(self.a.sum())
        self.c = np.empty((self.a.size, 0))
        self.dot = np.empty(0)
        self.ensure(size)

    def ensure(self, size: int):
        if size <= self.dot.size:
            return
        t = np.arange(size, dtype=float)
        self.c = np.ascontiguousarray(gammaln(self.a[:, None] + t[None, :]))
        self.dot = np.ascontiguousarray(gammaln(self.a_dot + t))

    def block(self, counts) -> np.ndarray:
        """Per-block log marginal (last axis = categories), zero for empty blocks."""
        counts = np.asarray(counts)
        tot = counts.sum(axis=-1)
        self.ensure(int(tot.max(initial=0)) + 1)
        per_c = sum(self.c[c][counts[..., c]] - self.c[c][0] for c in range(self.a.size))
        return per_c - (self.dot[tot] - self.dot[0])


def block_log_marginal(counts, a_theta) -> np.ndarray:
    counts = np.asarray(counts)
    a = np.asarray(a_theta, dtype=float)
    a_dot = a.sum()
    return (
        gammaln(a_dot)
        - gammaln(a_dot + counts.sum(axis=-1))
        + np.sum(gammaln(a + counts) - gammaln(a), axis=-1)
    )


def log_marginal_likelihood(stats: BlockSuffStats, a_theta) -> float:
    total = 0.0
    for x in range(stats.counts.shape[0]):
        vals = block_log_marginal(stats.block_counts(x), a_theta)
        total += float(vals.sum())
    return total


def tempered_log_likelihood(stats: BlockSuffStats, a_theta, beta: float) -> float:
    if not beta > 0:
        raise ValueError("inverse temperature must be positive")
    return beta * log_marginal_likelihood(stats, a_theta)


def move_log_ratio(stats, net: NetworkSequence, x, i, h, z1, z2, a_theta, side="row") -> float:
    """Log likelihood gain of seating node ``i`` in cluster ``h`` at index ``x``.

    ``stats`` reflects the current seating of ``i`` (its row or column is
    subtracted internally). ``h`` may be any existing label or the number of
    clusters (a new cluster). The value equals the full log likelihood with
    ``i`` at ``h`` minus the log likelihood with node ``i``'s row (column)
    removed.
    """
    z1 = np.asarray(z1)
    z2 = z1 if z2 is None or not stats.directed else np.asarray(z2)
    own, other = (z1, z2) if side == "row" else (z2, z1)
    counts = stats.counts[x] if side == "row" else stats.counts[x].transpose(1, 0, 2)
    K = int(stats.K[x] if side == "row" else stats.H[x])
    cur = int(own[x, i])
    r = np.zeros((counts.shape[1], counts.shape[2]), dtype=np.int64)
    prof = node_profile(net, x, i, other[x], side)
    r[: prof.shape[0]] = prof
    r = r[:K]
    if h < counts.shape[0]:
        rest = counts[h, :K].copy()
    else:
        rest = np.zeros_like(r)
    if h == cur:
        rest -= r
    elif not stats.directed and h < K:
        # block (h, cur) holds the pairs between i and cluster h
        rest[cur] -= r[h]
    return float(np.sum(block_log_marginal(rest + r, a_theta) - block_log_marginal(rest, a_theta)))


def row_move_log_ratio(stats, net, x, i, h, z1, z2, a_theta) -> float:
    return move_log_ratio(stats, net, x, i, h, z1, z2, a_theta, "row")


def column_move_log_ratio(stats, net, x, i, h, z1, z2, a_theta) -> float:
    return move_log_ratio(stats, net, x, i, h, z1, z2, a_theta, "col")
