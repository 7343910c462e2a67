"""Domain types and block sufficient statistics.

Conventions used across the package:

* edge categories are ordinal levels ``1..C`` (``1`` = absent);
* partition labels and covariate codes are 0-based integers;
* a partition sequence is an ``(m, n)`` integer array, one label vector per index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def canonicalize(labels) -> np.ndarray:
    """Relabel a vector by order of first appearance (0, 1, 2, ...)."""
    labels = np.asarray(labels)
    out = np.empty(labels.shape, dtype=np.int32)
    mapping: dict = {}
    for pos, lab in enumerate(labels.tolist()):
        code = mapping.get(lab)
        if code is None:
            code = mapping[lab] = len(mapping)
        out[pos] = code
    return out


def canonicalize_sequence(z) -> np.ndarray:
    z = np.asarray(z)
    return np.stack([canonicalize(row) for row in z]) if z.size else z.astype(np.int32)


def is_canonical(labels) -> bool:
    labels = np.asarray(labels)
    return bool(np.array_equal(labels, canonicalize(labels)))


@dataclass
class NetworkSequence:
    """A sequence of ``m`` categorically weighted ``n x n`` adjacency matrices."""

    y: np.ndarray
    n_categories: int = 4
    directed: bool = True
    include_diagonal: bool = True
    node_names: list[str] | None = None
    index_labels: list[str] | None = None

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 3 or y.shape[1] != y.shape[2]:
            raise DataError(f"expected an (m, n, n) array, got shape {y.shape}")
        self.y = y.astype(np.int32, copy=False)
        m, n, _ = self.y.shape
        if n < 2 or m < 1 or self.n_categories < 2:
            raise DataError("need n >= 2, m >= 1 and at least 2 categories")
        if self.y.min() < 1 or self.y.max() > self.n_categories:
            raise DataError(f"categories must lie in 1..{self.n_categories}")
        if not self.directed:
            self.include_diagonal = False
            if not np.array_equal(self.y, self.y.transpose(0, 2, 1)):
                raise DataError("undirected networks must have symmetric matrices")
        if self.node_names is not None and len(self.node_names) != n:
            raise DataError("node_names length does not match n")
        if self.index_labels is not None and len(self.index_labels) != m:
            raise DataError("index_labels length does not match m")

    @property
    def m(self) -> int:
        return self.y.shape[0]

    @property
    def n(self) -> int:
        return self.y.shape[1]

    @property
    def names(self) -> list[str]:
        return self.node_names or [str(i + 1) for i in range(self.n)]

    @property
    def labels(self) -> list[str]:
        return self.index_labels or [str(x + 1) for x in range(self.m)]


@dataclass
class Covariates:
    """Macro-category code (``0..L-1``) for every node."""

    w: np.ndarray
    L: int
    present: bool = True
    category_names: list[str] | None = None

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.int32)
        if self.L < 1:
            raise DataError("L must be >= 1")
        if self.w.size and (self.w.min() < 0 or self.w.max() >= self.L):
            raise DataError(f"covariate codes must lie in 0..{self.L - 1}")

    @classmethod
    def absent(cls, n: int) -> Covariates:
        return cls(np.zeros(n, dtype=np.int32), 1, present=False)


@dataclass
class Hyperparameters:
    a_theta: np.ndarray = field(default_factory=lambda: np.ones(4))
    a_w: np.ndarray | None = None
    a_alpha: float = 1.0
    b_alpha: float = 1.0
    a_eta: float = 0.002
    b_eta: float = 0.001

    def __post_init__(self):
        self.a_theta = np.asarray(self.a_theta, dtype=float)
        if self.a_w is not None:
            self.a_w = np.asarray(self.a_w, dtype=float)
            if np.any(self.a_w <= 0):
                raise ValueError("a_w entries must be positive")
        if np.any(self.a_theta <= 0):
            raise ValueError("a_theta entries must be positive")
        if min(self.a_alpha, self.b_alpha, self.a_eta, self.b_eta) <= 0:
            raise ValueError("Beta and Gamma hyperparameters must be positive")

    def cohesion(self, L: int) -> np.ndarray:
        if self.a_w is None:
            return np.ones(L)
        if self.a_w.size != L:
            raise ValueError(f"a_w has {self.a_w.size} entries, expected {L}")
        return self.a_w


class PartitionSequence:
    """Per-index label vectors, stored canonically."""

    def __init__(self, z):
        z = np.atleast_2d(np.asarray(z))
        self.z = canonicalize_sequence(z)

    @property
    def m(self) -> int:
        return self.z.shape[0]

    @property
    def n(self) -> int:
        return self.z.shape[1]

    @property
    def H(self) -> np.ndarray:
        return self.z.max(axis=1) + 1

    def __getitem__(self, x):
        return self.z[x]

    def __eq__(self, other):
        return isinstance(other, PartitionSequence) and np.array_equal(self.z, other.z)

    def __repr__(self):
        return f"PartitionSequence(m={self.m}, n={self.n}, H={self.H.tolist()})"


def _pair_codes(y, z1, z2, cap, C, directed, include_diagonal):
    n = y.shape[0]
    if directed:
        hk = (z1[:, None].astype(np.int64) * cap + z2[None, :]) * C + (y - 1)
        if not include_diagonal:
            hk = hk[~np.eye(n, dtype=bool)]
        return hk.ravel()
    iu, ju = np.triu_indices(n, 1)
    hi = np.maximum(z1[iu], z1[ju]).astype(np.int64)
    lo = np.minimum(z1[iu], z1[ju])
    return (hi * cap + lo) * C + (y[iu, ju] - 1)


class BlockSuffStats:
    """Category counts per block ``(h, k)`` at every index.

    ``counts[x, h, k, c]`` holds the number of pairs with row label ``h``,
    column label ``k`` and category ``c + 1``. The label axes have capacity
    ``n`` so that clusters can be opened without reallocating. In undirected
    mode the array is kept symmetric in ``(h, k)``; each unordered pair is
    counted once and only blocks with ``h >= k`` enter the likelihood.
    """

    def __init__(self, counts, H, K, directed=True, include_diagonal=True):
        self.counts = counts
        self.H = H
        self.K = K
        self.directed = directed
        self.include_diagonal = include_diagonal if directed else False

    @property
    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=-1)

    @property
    def n_categories(self) -> int:
        return self.counts.shape[-1]

    def copy(self) -> BlockSuffStats:
        return BlockSuffStats(
            self.counts.copy(), self.H.copy(), self.K.copy(), self.directed, self.include_diagonal
        )

    def block_counts(self, x: int) -> np.ndarray:
        """``(H_x, K_x, C)`` counts; undirected blocks with ``h < k`` are zeroed."""
        out = self.counts[x, : self.H[x], : self.K[x]].copy()
        if not self.directed:
            out[np.triu_indices(self.H[x], 1)] = 0
        return out

    def __eq__(self, other):
        if not isinstance(other, BlockSuffStats):
            return NotImplemented
        return (
            np.array_equal(self.H, other.H)
            and np.array_equal(self.K, other.K)
            and np.array_equal(self.counts, other.counts)
        )


def build_suff_stats(net: NetworkSequence, z1, z2=None) -> BlockSuffStats:
    """Tally block category counts from scratch."""
    z1 = np.asarray(z1)
    z2 = z1 if z2 is None else np.asarray(z2)
    m, n = net.m, net.n
    if z1.shape != (m, n) or z2.shape != (m, n):
        raise DataError(f"partitions must have shape {(m, n)}, got {z1.shape} and {z2.shape}")
    if not net.directed and not np.array_equal(z1, z2):
        raise ValueError("undirected mode uses a single partition sequence")
    C = net.n_categories
    counts = np.zeros((m, n, n, C), dtype=np.int64)
    for x in range(m):
        codes = _pair_codes(net.y[x], z1[x], z2[x], n, C, net.directed, net.include_diagonal)
        counts[x] = np.bincount(codes, minlength=n * n * C).reshape(n, n, C)
        if not net.directed:
            lower = counts[x].copy()
            counts[x] = lower + lower.transpose(1, 0, 2)
            d = np.arange(n)
            counts[x, d, d] = lower[d, d]
    H = (z1.max(axis=1) + 1).astype(np.int64)
    K = (z2.max(axis=1) + 1).astype(np.int64)
    return BlockSuffStats(counts, H, K, net.directed, net.include_diagonal)


def node_profile(net: NetworkSequence, x: int, i: int, other, side: str = "row") -> np.ndarray:
    """Counts ``r[k, c]`` of node ``i``'s row (or column) by opposite-side cluster.

    ``other`` is the opposite partition at index ``x`` (the shared partition in
    undirected mode, where node ``i`` itself is skipped).
    """
    other = np.asarray(other)
    ys = net.y[x, i] if side == "row" else net.y[x, :, i]
    mask = np.ones(net.n, dtype=bool)
    if not net.include_diagonal:
        mask[i] = False
    K = int(other.max()) + 1
    r = np.zeros((K, net.n_categories), dtype=np.int64)
    np.add.at(r, (other[mask], ys[mask] - 1), 1)
    return r


def _apply_profile(stats, x, own, r, sign, side):
    counts = stats.counts[x] if side == "row" else stats.counts[x].transpose(1, 0, 2)
    K = r.shape[0]
    counts[own, :K] += sign * r
    if not stats.directed:
        idx = np.arange(K) != own
        counts[:K][idx, own] += sign * r[idx]


def _relabel_axis(stats, x, perm, side):
    """Apply old->new label permutation ``perm`` on one label axis at index ``x``."""
    counts = stats.counts[x]
    size = perm.size
    if side == "row" or not stats.directed:
        block = counts[:size].copy()
        counts[:size] = 0
        counts[perm] = block
    if side == "col" or not stats.directed:
        block = counts[:, :size].copy()
        counts[:, :size] = 0
        counts[:, perm] = block


def update_label(stats: BlockSuffStats, net: NetworkSequence, z1, z2, x, i, to, side="row"):
    """Move node ``i`` at index ``x`` to cluster ``to`` and re-canonicalize.

    ``to`` may equal the current number of clusters to open a new one. The
    label arrays ``z1``/``z2`` are modified in place; ``stats`` is updated
    incrementally and agrees exactly with :func:`build_suff_stats`.
    """
    if not stats.directed:
        z2 = z1
        side = "row"
    own = z1 if side == "row" else z2
    other = z2 if side == "row" else z1
    Hs = stats.H if side == "row" else stats.K
    frm = int(own[x, i])
    if not np.any(own[x] == frm):
        raise ValueError(f"cluster {frm} has no members")
    if not 0 <= to <= Hs[x]:
        raise ValueError(f"target cluster {to} out of range 0..{Hs[x]}")
    if to == Hs[x] and np.count_nonzero(own[x] == frm) == 1:
        # a singleton opening a fresh cluster leaves the partition unchanged
        to = frm
    r = np.zeros((net.n, net.n_categories), dtype=np.int64)
    r_small = node_profile(net, x, i, other[x], side)
    r[: r_small.shape[0]] = r_small
    _apply_profile(stats, x, frm, r, -1, side)
    own[x, i] = to
    _apply_profile(stats, x, to, r, +1, side)

    new = canonicalize(own[x])
    used = min(int(Hs[x]) + 1, stats.counts.shape[1])
    perm = np.full(used, -1)
    for old_lab, new_lab in zip(own[x].tolist(), new.tolist()):
        perm[old_lab] = new_lab
    empty = perm < 0
    if empty.any():
        # vacated labels must carry zero counts; park them past the used range
        perm[empty] = np.arange(new.max() + 1, new.max() + 1 + empty.sum())
    _relabel_axis(stats, x, perm, side)
    own[x] = new
    Hs[x] = int(new.max()) + 1
    if not stats.directed:
        stats.K[x] = stats.H[x]
    return stats
