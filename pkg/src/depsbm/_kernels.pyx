# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled single-site sampler kernels (see ``_kernels_py`` for the reference)."""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, log, INFINITY
from libc.stdint cimport int32_t, int64_t
from numpy.random cimport bitgen_t

import numpy as np

BACKEND = "cython"


cdef inline bitgen_t* _bitgen(object rng) except NULL:
    return <bitgen_t*>PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")


def log_likelihood(int64_t[:, :, :, :] counts, int64_t[::1] H, int64_t[::1] K,
                   bint undirected, double[:, ::1] lgc, double[::1] lgdot):
    cdef Py_ssize_t m = counts.shape[0], C = counts.shape[3]
    cdef Py_ssize_t x, h, k, c, kmax
    cdef int64_t tot, v
    cdef double g0 = -lgdot[0], total = 0.0, blk
    for c in range(C):
        g0 += lgc[c, 0]
    with nogil:
        for x in range(m):
            for h in range(H[x]):
                kmax = h + 1 if undirected else K[x]
                for k in range(kmax):
                    tot = 0
                    blk = 0.0
                    for c in range(C):
                        v = counts[x, h, k, c]
                        tot += v
                        blk += lgc[c, v]
                    total += blk - lgdot[tot] - g0
    return total


cdef class SideKernel:
    cdef int32_t[:, :, :] y
    cdef int64_t[:, :, :, :] counts
    cdef int32_t[:, ::1] z
    cdef int32_t[:, ::1] zo
    cdef int64_t[:, ::1] sizes
    cdef int64_t[::1] H
    cdef int64_t[::1] Ho
    cdef int32_t[:, ::1] gamma
    cdef int64_t[:, :, ::1] wcnt
    cdef int32_t[::1] w
    cdef double[::1] aw
    cdef double aw_sum
    cdef bint supervised, undirected, diag
    cdef double[:, ::1] lgc
    cdef double[::1] lgdot
    cdef Py_ssize_t m, n, C, cap
    cdef int64_t[:, ::1] r
    cdef int64_t[::1] rdot
    cdef double[::1] logw
    cdef char[::1] allowed
    cdef double[::1] cnt
    cdef double[::1] same

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
        self.supervised = supervised
        self.undirected = undirected
        self.diag = include_diagonal and not undirected
        self.lgc = lgc
        self.lgdot = lgdot
        self.m = z.shape[0]
        self.n = z.shape[1]
        self.C = counts.shape[3]
        self.cap = counts.shape[1]
        self.r = np.zeros((self.cap + 1, self.C), dtype=np.int64)
        self.rdot = np.zeros(self.cap + 1, dtype=np.int64)
        self.logw = np.zeros(self.cap + 1)
        self.allowed = np.zeros(self.cap + 1, dtype=np.int8)
        self.cnt = np.zeros(self.cap + 1)
        self.same = np.zeros(self.cap + 1)

    # -- bookkeeping -------------------------------------------------------

    cdef void _profile(self, Py_ssize_t x, Py_ssize_t i) noexcept nogil:
        cdef Py_ssize_t j, k, c
        cdef Py_ssize_t K = self.Ho[x] + 1
        for k in range(K):
            self.rdot[k] = 0
            for c in range(self.C):
                self.r[k, c] = 0
        for j in range(self.n):
            if j == i and not self.diag:
                continue
            k = self.zo[x, j]
            self.r[k, self.y[x, i, j]] += 1
            self.rdot[k] += 1

    cdef bint _remove(self, Py_ssize_t x, Py_ssize_t i) noexcept nogil:
        cdef Py_ssize_t a = self.z[x, i], k, c
        cdef Py_ssize_t K = self.Ho[x]
        for k in range(K):
            for c in range(self.C):
                self.counts[x, a, k, c] -= self.r[k, c]
        if self.undirected:
            for k in range(K):
                if k != a:
                    for c in range(self.C):
                        self.counts[x, k, a, c] -= self.r[k, c]
        self.sizes[x, a] -= 1
        self.wcnt[x, a, self.w[i]] -= 1
        self.z[x, i] = -1
        if self.sizes[x, a] == 0:
            self._compact(x, a)
            return True
        return False

    cdef void _compact(self, Py_ssize_t x, Py_ssize_t a) noexcept nogil:
        cdef Py_ssize_t last = self.H[x] - 1, k, c, j, l
        cdef Py_ssize_t K = self.Ho[x]
        if a != last:
            for k in range(K):
                for c in range(self.C):
                    self.counts[x, a, k, c] = self.counts[x, last, k, c]
                    self.counts[x, last, k, c] = 0
            if self.undirected:
                for k in range(K):
                    for c in range(self.C):
                        self.counts[x, k, a, c] = self.counts[x, k, last, c]
                        self.counts[x, k, last, c] = 0
                for c in range(self.C):
                    self.r[a, c] = self.r[last, c]
                    self.r[last, c] = 0
                self.rdot[a] = self.rdot[last]
                self.rdot[last] = 0
            self.sizes[x, a] = self.sizes[x, last]
            self.sizes[x, last] = 0
            for l in range(self.wcnt.shape[2]):
                self.wcnt[x, a, l] = self.wcnt[x, last, l]
                self.wcnt[x, last, l] = 0
            for j in range(self.n):
                if self.z[x, j] == last:
                    self.z[x, j] = a
        self.H[x] = last

    cdef void _seat(self, Py_ssize_t x, Py_ssize_t i, Py_ssize_t h) noexcept nogil:
        cdef Py_ssize_t k, c
        cdef Py_ssize_t K = self.Ho[x]
        if h == self.H[x]:
            self.H[x] += 1
            if self.undirected:
                K += 1
        for k in range(K):
            for c in range(self.C):
                self.counts[x, h, k, c] += self.r[k, c]
        if self.undirected:
            for k in range(K):
                if k != h:
                    for c in range(self.C):
                        self.counts[x, k, h, c] += self.r[k, c]
        self.sizes[x, h] += 1
        self.wcnt[x, h, self.w[i]] += 1
        self.z[x, i] = h

    cdef void _allowed(self, Py_ssize_t x, Py_ssize_t i, Py_ssize_t Hc) noexcept nogil:
        cdef Py_ssize_t h, j, mate = -1
        for h in range(Hc + 1):
            self.allowed[h] = 1
        if x + 1 >= self.m or not self.gamma[x + 1, i]:
            return
        for j in range(self.n):
            if j != i and self.gamma[x + 1, j] and self.z[x + 1, j] == self.z[x + 1, i]:
                mate = j
                break
        if mate >= 0:
            for h in range(Hc + 1):
                self.allowed[h] = 0
            self.allowed[self.z[x, mate]] = 1
        else:
            for j in range(self.n):
                if j != i and self.gamma[x + 1, j]:
                    self.allowed[self.z[x, j]] = 0

    cdef void _log_weights(self, Py_ssize_t x, Py_ssize_t i, double beta, double eta) noexcept nogil:
        cdef Py_ssize_t Hc = self.H[x], K = self.Ho[x], h, k, c
        cdef Py_ssize_t wi = self.w[i]
        cdef int64_t v, rv, tot
        cdef double s, lr
        for h in range(Hc):
            s = <double>self.sizes[x, h]
            self.logw[h] = log(s)
            if self.supervised:
                self.logw[h] += log(self.wcnt[x, h, wi] + self.aw[wi]) - log(s + self.aw_sum)
        self.logw[Hc] = log(eta)
        if self.supervised:
            self.logw[Hc] += log(self.aw[wi]) - log(self.aw_sum)
        if beta == 0.0:
            return
        for h in range(Hc + 1):
            lr = 0.0
            for k in range(K):
                if self.rdot[k] == 0:
                    continue
                tot = 0
                for c in range(self.C):
                    v = self.counts[x, h, k, c]
                    rv = self.r[k, c]
                    tot += v
                    lr += self.lgc[c, v + rv] - self.lgc[c, v]
                lr -= self.lgdot[tot + self.rdot[k]] - self.lgdot[tot]
            self.logw[h] += beta * lr

    cdef Py_ssize_t _sample_label(self, Py_ssize_t x, Py_ssize_t i, double beta, double eta,
                                  bitgen_t* bg) noexcept nogil:
        cdef Py_ssize_t Hc, h, pick = -1, last_ok = -1
        cdef double mx = -INFINITY, total = 0.0, u, cum
        self._profile(x, i)
        self._remove(x, i)
        Hc = self.H[x]
        self._log_weights(x, i, beta, eta)
        self._allowed(x, i, Hc)
        for h in range(Hc + 1):
            if self.allowed[h] and self.logw[h] > mx:
                mx = self.logw[h]
        for h in range(Hc + 1):
            if self.allowed[h]:
                self.logw[h] = exp(self.logw[h] - mx)
                last_ok = h
            else:
                self.logw[h] = 0.0
            total += self.logw[h]
        u = bg.next_double(bg.state) * total
        cum = 0.0
        for h in range(Hc + 1):
            cum += self.logw[h]
            if cum > u:
                pick = h
                break
        if pick < 0 or not self.allowed[pick]:
            pick = last_ok
        self._seat(x, i, pick)
        return pick

    cdef double _gamma_prob(self, Py_ssize_t x, Py_ssize_t i, double alpha, double eta) noexcept nogil:
        cdef Py_ssize_t j, h, Hc = self.H[x], wi = self.w[i], a = self.z[x, i]
        cdef bint in_a, in_b
        cdef double norm, num, f_new, R
        for h in range(Hc):
            self.cnt[h] = 0.0
            self.same[h] = 0.0
        for j in range(self.n):
            if j == i or not self.gamma[x, j]:
                continue
            in_a = self.z[x, j] == a
            in_b = self.z[x - 1, j] == self.z[x - 1, i]
            if in_a != in_b:
                return 0.0
            h = self.z[x, j]
            self.cnt[h] += 1.0
            if self.w[j] == wi:
                self.same[h] += 1.0
        if self.supervised:
            f_new = self.aw[wi] / self.aw_sum
        else:
            f_new = 1.0
        norm = eta * f_new
        for h in range(Hc):
            if self.supervised:
                norm += self.cnt[h] * (self.same[h] + self.aw[wi]) / (self.cnt[h] + self.aw_sum)
            else:
                norm += self.cnt[h]
        if self.cnt[a] > 0:
            if self.supervised:
                num = self.cnt[a] * (self.same[a] + self.aw[wi]) / (self.cnt[a] + self.aw_sum)
            else:
                num = self.cnt[a]
        else:
            num = eta * f_new
        R = num / norm
        return alpha / (alpha + (1.0 - alpha) * R)

    cdef int _sample_gamma(self, Py_ssize_t x, Py_ssize_t i, double alpha, double eta,
                           bitgen_t* bg) noexcept nogil:
        cdef double p1 = self._gamma_prob(x, i, alpha, eta)
        cdef int val
        if p1 == 0.0:
            self.gamma[x, i] = 0
            return 0
        val = 1 if bg.next_double(bg.state) < p1 else 0
        self.gamma[x, i] = val
        return val

    # -- public API --------------------------------------------------------

    def label_probs(self, Py_ssize_t x, Py_ssize_t i, double beta, double eta):
        cdef Py_ssize_t h, Hc, back, a = self.z[x, i]
        cdef bint vanished
        self._profile(x, i)
        vanished = self._remove(x, i)
        Hc = self.H[x]
        self._log_weights(x, i, beta, eta)
        self._allowed(x, i, Hc)
        logw = np.array([self.logw[h] if self.allowed[h] else -np.inf for h in range(Hc + 1)])
        p = np.exp(logw - logw.max())
        p /= p.sum()
        back = Hc if vanished else a
        self._seat(x, i, back)
        return p, np.arange(p.size)

    def update_label(self, Py_ssize_t x, Py_ssize_t i, double beta, double eta, rng):
        return self._sample_label(x, i, beta, eta, _bitgen(rng))

    def gamma_prob(self, Py_ssize_t x, Py_ssize_t i, double alpha, double eta):
        return self._gamma_prob(x, i, alpha, eta)

    def update_gamma(self, Py_ssize_t x, Py_ssize_t i, double alpha, double eta, rng):
        return self._sample_gamma(x, i, alpha, eta, _bitgen(rng))

    def label_pass(self, double beta, double eta, rng):
        cdef bitgen_t* bg = _bitgen(rng)
        cdef Py_ssize_t x, i
        with nogil:
            for x in range(self.m):
                for i in range(self.n):
                    if x > 0 and self.gamma[x, i]:
                        continue
                    self._sample_label(x, i, beta, eta, bg)

    def gamma_pass(self, double[::1] alpha, double eta, rng):
        cdef bitgen_t* bg = _bitgen(rng)
        cdef Py_ssize_t x, i
        with nogil:
            for x in range(1, self.m):
                for i in range(self.n):
                    self._sample_gamma(x, i, alpha[x], eta, bg)
