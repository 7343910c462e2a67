"""Covariate-supervised Chinese restaurant process and its dependent extension.

The supervised process reweights the usual CRP seating probabilities with a
Dirichlet-multinomial cohesion over each cluster's macro-category counts. The
dependent version links consecutive partitions through Bernoulli persistence
indicators: persisting nodes keep their co-clustering relations from the
previous index and the remaining nodes are re-seated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import canonicalize


@dataclass
class CrpwParams:
    eta: float
    a_w: np.ndarray | None = None
    supervised: bool = False

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.supervised and self.a_w is None:
            raise ValueError("supervised prior needs cohesion parameters a_w")
        if self.a_w is not None:
            self.a_w = np.asarray(self.a_w, dtype=float)


def cohesion_log(w_h, a_w) -> float:
    """Log Dirichlet-multinomial cohesion of the macro-categories ``w_h``."""
    a_w = np.asarray(a_w, dtype=float)
    w_h = np.asarray(w_h, dtype=int)
    if w_h.size == 0:
        return 0.0
    counts = np.bincount(w_h, minlength=a_w.size)
    a_sum = a_w.sum()
    return float(
        gammaln(a_sum) - gammaln(a_sum + w_h.size) + np.sum(gammaln(a_w + counts) - gammaln(a_w))
    )


def crpw_log_mass(z, params: CrpwParams, w=None) -> float:
    """Log of the (unnormalized-over-partitions) CRP-w mass of ``z``.

    ``z`` and ``w`` may describe any subset of nodes; the mass is evaluated as
    if those were the only nodes.
    """
    z = np.asarray(z)
    n = z.size
    if n == 0:
        return 0.0
    eta = params.eta
    sizes = np.bincount(canonicalize(z))
    out = sizes.size * np.log(eta) + gammaln(eta) - gammaln(eta + n) + gammaln(sizes).sum()
    if params.supervised:
        w = np.asarray(w)
        for lab in np.unique(z):
            out += cohesion_log(w[z == lab], params.a_w)
    return float(out)


def crpw_weights(z_rest, params: CrpwParams, w_rest=None, w_i=None) -> np.ndarray:
    """Unnormalized seating weights for one node: existing clusters then a new one.

    ``z_rest`` must use labels ``0..H-1``.
    """
    z_rest = np.asarray(z_rest, dtype=int)
    H = int(z_rest.max()) + 1 if z_rest.size else 0
    sizes = np.bincount(z_rest, minlength=H).astype(float)
    weights = np.empty(H + 1)
    weights[:H] = sizes
    weights[H] = params.eta
    if params.supervised:
        a_w = params.a_w
        same = np.bincount(z_rest[np.asarray(w_rest) == w_i], minlength=H)
        weights[:H] *= (same + a_w[w_i]) / (sizes + a_w.sum())
        weights[H] *= a_w[w_i] / a_w.sum()
    return weights


def crpw_predictive(z_rest, params: CrpwParams, w_rest=None, w_i=None) -> np.ndarray:
    """Seating probabilities for a node given the others' labels ``z_rest``."""
    weights = crpw_weights(z_rest, params, w_rest, w_i)
    return weights / weights.sum()


def check_compatibility(z_a, z_b, keep) -> bool:
    """True when ``z_a`` and ``z_b`` induce the same partition on ``keep``."""
    keep = np.asarray(keep)
    if keep.dtype == bool:
        keep = np.flatnonzero(keep)
    if keep.size == 0:
        return True
    a = np.asarray(z_a)[keep]
    b = np.asarray(z_b)[keep]
    return bool(np.array_equal(canonicalize(a), canonicalize(b)))


def _seat(order, z, seated, params, w, rng):
    """Sequentially seat ``order`` given the nodes already ``seated`` (in place)."""
    order = list(order)
    supervised = params.supervised
    zl = z.tolist()
    wl = np.asarray(w).tolist() if supervised else None
    if supervised:
        a_w = params.a_w.tolist()
        a_sum = float(sum(a_w))
    sizes, same = {}, {}
    for j in np.flatnonzero(seated).tolist():
        h = zl[j]
        sizes[h] = sizes.get(h, 0) + 1
        if supervised:
            same[h, wl[j]] = same.get((h, wl[j]), 0) + 1
    fresh = max(zl) + 1 if sizes else 0
    eta = float(params.eta)
    for i, u in zip(order, rng.random(len(order)).tolist()):
        labels = list(sizes)
        if supervised:
            wi = wl[i]
            weights = [sizes[h] * (same.get((h, wi), 0) + a_w[wi]) / (sizes[h] + a_sum) for h in labels]
            wt_new = eta * a_w[wi] / a_sum
        else:
            weights = [float(sizes[h]) for h in labels]
            wt_new = eta
        u *= sum(weights) + wt_new
        h = fresh
        acc = 0.0
        for lab, wt in zip(labels, weights):
            acc += wt
            if u < acc:
                h = lab
                break
        if h == fresh:
            fresh += 1
        zl[i] = h
        sizes[h] = sizes.get(h, 0) + 1
        if supervised:
            same[h, wi] = same.get((h, wi), 0) + 1
    z[:] = zl
    seated[order] = True


def crpw_sample(n: int, params: CrpwParams, w=None, rng=None) -> np.ndarray:
    """Draw one partition by sequential seating in node order."""
    rng = np.random.default_rng(rng)
    z = np.full(n, -1, dtype=np.int64)
    _seat(range(n), z, np.zeros(n, dtype=bool), params, w, rng)
    return canonicalize(z)


def drpmw_sample(n: int, m: int, params: CrpwParams, w=None, alpha=None, rng=None):
    """Draw a partition sequence and persistence indicators from the dependent prior.

    ``alpha`` holds the ``m - 1`` transition probabilities. Returns ``(z, gamma)``
    with ``z`` of shape ``(m, n)`` and ``gamma`` of shape ``(m, n)``; the first row
    of ``gamma`` is unused and zero. Non-persisting nodes are re-seated in
    ascending node order.
    """
    rng = np.random.default_rng(rng)
    alpha = np.zeros(max(m - 1, 0)) if alpha is None else np.asarray(alpha, dtype=float)
    if alpha.size != m - 1:
        raise ValueError(f"expected {m - 1} transition probabilities, got {alpha.size}")
    if np.any((alpha < 0) | (alpha > 1)):
        raise ValueError("transition probabilities must lie in [0, 1]")
    z = np.zeros((m, n), dtype=np.int32)
    gamma = np.zeros((m, n), dtype=np.int32)
    z[0] = crpw_sample(n, params, w, rng)
    for x in range(1, m):
        gamma[x] = rng.random(n) < alpha[x - 1]
        seated = gamma[x].astype(bool)
        zx = np.where(seated, z[x - 1], -1).astype(np.int64)
        _seat(np.flatnonzero(~seated), zx, seated, params, w, rng)
        z[x] = canonicalize(zx)
    return z, gamma


def eta_sufficient(z, gamma):
    """Per-index ``(k, g)``: clusters without persisting members, persisting node count."""
    z = np.asarray(z)
    gamma = np.asarray(gamma).astype(bool)
    m, n = z.shape
    k = [0] * m
    g = [0] * m
    for x in range(m):
        zx = z[x].tolist()
        H = len(set(zx))
        if x == 0:
            k[x] = H
            continue
        kept = [h for h, flag in zip(zx, gamma[x].tolist()) if flag]
        k[x] = H - len(set(kept))
        g[x] = len(kept)
    return k, g


def eta_log_factor_from(eta, k, g, n) -> float:
    log_eta = math.log(eta)
    tail = math.lgamma(eta + n)
    return sum(kx * log_eta + math.lgamma(eta + gx) - tail for kx, gx in zip(k, g))


def eta_log_factor(eta, z, gamma) -> float:
    """Log of the eta-dependent part of the dependent prior for one sequence.

    At index 1 this is the CRP factor ``eta^H G(eta) / G(eta + n)``; at later
    indices the re-seating of non-persisting nodes contributes
    ``eta^k G(eta + g) / G(eta + n)`` where ``g`` is the number of persisting
    nodes and ``k`` the number of clusters with no persisting member.
    """
    k, g = eta_sufficient(z, gamma)
    return eta_log_factor_from(eta, k, g, np.asarray(z).shape[1])
