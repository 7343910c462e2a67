"""Pure-Python (numpy) implementation of the single-site sampler kernels.

Mirrors ``_kernels.pyx`` step for step, including the order in which uniforms
are drawn from the generator, so both backends realise the same Markov chain.

Labels inside the kernel are compact but not canonical: when a cluster
empties, the highest label is moved into the vacated slot.
"""

import numpy as np

BACKEND = "python"


def log_likelihood(counts, H, K, undirected, lgc, lgdot):
    C = counts.shape[-1]
    g0 = float(lgc[:, 0].sum() - lgdot[0])
    total = 0.0
    for x in range(counts.shape[0]):
        blk = counts[x, : H[x], : K[x]]
        vals = sum(lgc[c][blk[..., c]] for c in range(C)) - lgdot[blk.sum(axis=-1)] - g0
        if undirected:
            vals = np.tril(vals)
        total += float(vals.sum())
    return total


class SideKernel:
    """Label and persistence updates for one partition sequence.

    ``y`` and ``counts`` are oriented own-axis first: row kernels see the data
    as stored, column kernels see transposed views.
    """

    def __init__(self, y, counts, z, zo, sizes, H, Ho, gamma, wcnt, w, aw,
                 supervised, undirected, include_diagonal, lgc, lgdot):
        self.y = y
        self.counts = counts
        self.z = z
        self.zo = zo
        self.sizes = sizes
        self.H = H
        self.Ho = Ho
        self.gamma = gamma
        self.wcnt = wcnt
        self.w = w
        self.aw = aw
        self.aw_sum = float(np.sum(aw))
        self.supervised = bool(supervised)
        self.undirected = bool(undirected)
        self.diag = bool(include_diagonal) and not undirected
        self.lgc = lgc
        self.lgdot = lgdot
        self.m, self.n = z.shape
        self.C = counts.shape[-1]
        self.cap = counts.shape[1]

    # -- bookkeeping -------------------------------------------------------

    def _profile(self, x, i):
        mask = np.ones(self.n, dtype=bool)
        if not self.diag:
            mask[i] = False
        codes = self.zo[x][mask].astype(np.int64) * self.C + self.y[x, i][mask]
        return np.bincount(codes, minlength=self.cap * self.C).reshape(self.cap, self.C)

    def _remove(self, x, i, r):
        a = int(self.z[x, i])
        K = int(self.Ho[x])
        cx = self.counts[x]
        cx[a, :K] -= r[:K]
        if self.undirected:
            cx[:K, a] -= r[:K]
            cx[a, a] += r[a]
        self.sizes[x, a] -= 1
        self.wcnt[x, a, self.w[i]] -= 1
        self.z[x, i] = -1
        if self.sizes[x, a] == 0:
            self._compact(x, a, r)
            return a, True
        return a, False

    def _compact(self, x, a, r):
        last = int(self.H[x]) - 1
        cx = self.counts[x]
        if a != last:
            cx[a] = cx[last]
            cx[last] = 0
            if self.undirected:
                cx[:, a] = cx[:, last]
                cx[:, last] = 0
                r[a] = r[last]
                r[last] = 0
            self.sizes[x, a] = self.sizes[x, last]
            self.sizes[x, last] = 0
            self.wcnt[x, a] = self.wcnt[x, last]
            self.wcnt[x, last] = 0
            zx = self.z[x]
            zx[zx == last] = a
        self.H[x] = last

    def _seat(self, x, i, h, r):
        K = int(self.Ho[x])
        if h == self.H[x]:
            self.H[x] += 1
            if self.undirected:
                K += 1
        cx = self.counts[x]
        cx[h, :K] += r[:K]
        if self.undirected:
            cx[:K, h] += r[:K]
            cx[h, h] -= r[h]
        self.sizes[x, h] += 1
        self.wcnt[x, h, self.w[i]] += 1
        self.z[x, i] = h

    def _allowed(self, x, i, Hc):
        allowed = np.ones(Hc + 1, dtype=bool)
        if x + 1 >= self.m or not self.gamma[x + 1, i]:
            return allowed
        g = self.gamma[x + 1].astype(bool).copy()
        g[i] = False
        mates = np.flatnonzero(g & (self.z[x + 1] == self.z[x + 1, i]))
        if mates.size:
            allowed[:] = False
            allowed[self.z[x, mates[0]]] = True
        else:
            allowed[self.z[x][g]] = False
        return allowed

    def _log_weights(self, x, i, r, beta, eta):
        Hc = int(self.H[x])
        K = int(self.Ho[x])
        sizes = self.sizes[x, :Hc].astype(float)
        logw = np.empty(Hc + 1)
        with np.errstate(divide="ignore"):
            logw[:Hc] = np.log(sizes)
        logw[Hc] = np.log(eta)
        if self.supervised:
            wi = self.w[i]
            logw[:Hc] += np.log(self.wcnt[x, :Hc, wi] + self.aw[wi]) - np.log(sizes + self.aw_sum)
            logw[Hc] += np.log(self.aw[wi]) - np.log(self.aw_sum)
        if beta != 0.0:
            active = np.flatnonzero(r[:K].sum(axis=1) > 0)
            if active.size:
                rows = self.counts[x, : Hc + 1][:, active]
                rr = r[active][None, :, :]
                new = rows + rr
                lr = np.zeros(Hc + 1)
                for c in range(self.C):
                    lr += (self.lgc[c][new[..., c]] - self.lgc[c][rows[..., c]]).sum(axis=1)
                lr -= (self.lgdot[new.sum(axis=-1)] - self.lgdot[rows.sum(axis=-1)]).sum(axis=1)
                logw += beta * lr
        return logw

    # -- public single-site moves -----------------------------------------

    def label_probs(self, x, i, beta, eta):
        """Full-conditional seat probabilities for node ``i`` at index ``x``.

        Returns ``(probs, labels)`` where ``labels[h]`` is the compact label of
        candidate ``h`` after ``i`` is removed (last entry: a fresh cluster).
        Node ``i`` is re-seated in its original cluster afterwards.
        """
        r = self._profile(x, i)
        a, vanished = self._remove(x, i, r)
        logw = self._log_weights(x, i, r, beta, eta)
        allowed = self._allowed(x, i, int(self.H[x]))
        logw[~allowed] = -np.inf
        p = np.exp(logw - logw.max())
        p /= p.sum()
        back = int(self.H[x]) if vanished else a
        self._seat(x, i, back, r)
        return p, np.arange(p.size)

    def update_label(self, x, i, beta, eta, rng):
        r = self._profile(x, i)
        self._remove(x, i, r)
        Hc = int(self.H[x])
        logw = self._log_weights(x, i, r, beta, eta)
        allowed = self._allowed(x, i, Hc)
        logw[~allowed] = -np.inf
        p = np.exp(logw - logw.max())
        cum = np.cumsum(p)
        u = rng.random() * cum[-1]
        h = int(np.searchsorted(cum, u, side="right"))
        if h > Hc or not allowed[h]:
            h = int(np.flatnonzero(allowed)[-1])
        self._seat(x, i, h, r)
        return h

    def gamma_prob(self, x, i, alpha, eta):
        g = self.gamma[x].astype(bool).copy()
        g[i] = False
        zx, zp = self.z[x], self.z[x - 1]
        in_a = zx[g] == zx[i]
        in_b = zp[g] == zp[i]
        if not np.array_equal(in_a, in_b):
            return 0.0
        Hc = int(self.H[x])
        cnt = np.bincount(zx[g], minlength=Hc).astype(float)
        wi = self.w[i]
        if self.supervised:
            same = np.bincount(zx[g & (self.w == wi)], minlength=Hc)
            f = (same + self.aw[wi]) / (cnt + self.aw_sum)
            f_new = self.aw[wi] / self.aw_sum
        else:
            f = np.ones(Hc)
            f_new = 1.0
        norm = float(np.sum(cnt * f)) + eta * f_new
        a = zx[i]
        num = cnt[a] * f[a] if cnt[a] > 0 else eta * f_new
        R = num / norm
        return alpha / (alpha + (1.0 - alpha) * R)

    def update_gamma(self, x, i, alpha, eta, rng):
        p1 = self.gamma_prob(x, i, alpha, eta)
        if p1 == 0.0:
            self.gamma[x, i] = 0
            return 0
        val = int(rng.random() < p1)
        self.gamma[x, i] = val
        return val

    def label_pass(self, beta, eta, rng):
        for x in range(self.m):
            for i in range(self.n):
                if x > 0 and self.gamma[x, i]:
                    continue
                self.update_label(x, i, beta, eta, rng)

    def gamma_pass(self, alpha, eta, rng):
        for x in range(1, self.m):
            for i in range(self.n):
                self.update_gamma(x, i, alpha[x], eta, rng)
