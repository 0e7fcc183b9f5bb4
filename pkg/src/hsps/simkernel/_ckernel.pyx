# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled block kernel; draw-for-draw twin of ``_pykernel``."""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport cos, exp, expm1, floor, log1p, sqrt, INFINITY
from libc.stdint cimport int64_t, uint8_t
from numpy.random cimport bitgen_t

import numpy as np

from . import _params as P
from ._params import APD1, APD2, SSPD

BACKEND = "compiled"

cdef enum:
    MAX_PHOTONS = 32
    MAX_COUNT = 100000

cdef Py_ssize_t C_HERALDS = P.C_HERALDS, C_S1 = P.C_S1, C_S2 = P.C_S2
cdef Py_ssize_t C_SSPD_BLOCKED = P.C_SSPD_BLOCKED, C_OVERFLOW = P.C_OVERFLOW
cdef Py_ssize_t C_APD1_GATES = P.C_APD1_GATES, C_APD2_GATES = P.C_APD2_GATES
cdef Py_ssize_t C_APD1_CLICKS = P.C_APD1_CLICKS, C_APD2_CLICKS = P.C_APD2_CLICKS
cdef Py_ssize_t N_COUNTERS = P.N_COUNTERS
cdef int64_t MAX_GAP = (<int64_t>1) << 62
cdef double TWO_PI = 6.283185307179586
cdef int _NEGBIN = P.LAW_NEGBIN
cdef int _CORR = P.CORRELATED
cdef int _UNCORR = P.UNCORRELATED
cdef int _DARK = P.DARK


cdef tuple _coefficients(int law, int64_t shape, double mean_per_mode):
    cdef double lam
    if law == _NEGBIN:
        return (1.0 + mean_per_mode) ** (-<double>shape), <double>shape, mean_per_mode / (1.0 + mean_per_mode)
    lam = shape * mean_per_mode
    return exp(-lam), lam, 0.0


cdef inline int64_t _gap(double u, double log_q) nogil:
    cdef double g
    if log_q == -INFINITY:
        return 1
    g = log1p(-u) / log_q
    if g >= <double>MAX_GAP:
        return MAX_GAP
    return 1 + <int64_t>floor(g)


cdef inline int64_t _draw_count(double u, int law, double p0, double a, double b) nogil:
    cdef double p = p0, cum = p0
    cdef int64_t n = 0
    while not u < cum:
        if law == _NEGBIN:
            p *= (n + a) / (n + 1) * b
        else:
            p *= a / (n + 1)
        n += 1
        cum += p
        if p == 0.0 or n >= MAX_COUNT:
            break
    return n


cdef inline int64_t _draw_clicked(double u, int law, double p0, double a, double b,
                                  double q, double p_click) nogil:
    cdef double target = u * p_click, p = p0, qn = 1.0, cum = 0.0
    cdef int64_t n = 0
    while True:
        if law == _NEGBIN:
            p *= (n + a) / (n + 1) * b
        else:
            p *= a / (n + 1)
        n += 1
        qn *= q
        cum += p * (1.0 - qn)
        if cum > target or p == 0.0 or n >= MAX_COUNT:
            return n


def geometric_gap(double u, double log_q):
    return _gap(u, log_q)


def draw_count(double u, int law, double p0, double a, double b):
    return _draw_count(u, law, p0, a, b)


def draw_clicked(double u, int law, double p0, double a, double b, double q, double p_click):
    return _draw_clicked(u, law, p0, a, b, q, p_click)


def dead_time_filter(double[:] times, double dead):
    """Mask of events kept by a non-paralyzable detector; ``times`` ascending."""
    cdef Py_ssize_t i, n = times.shape[0]
    keep = np.zeros(n, dtype=bool)
    cdef uint8_t[:] kv = keep.view(np.uint8)
    cdef double last = -INFINITY
    for i in range(n):
        if times[i] >= last + dead:
            kv[i] = 1
            last = times[i]
    return keep


cdef class _Block:
    cdef bitgen_t *bg
    cdef object bit_generator

    cdef double tp, mu, q_herald, p_h, p_fire, log_q_fire
    cdef int law
    cdef double cl_p0, cl_a, cl_b, nc_p0, nc_a, nc_b, nz_p0, nz_a, nz_b
    cdef bint noise_on
    cdef double a1, a12, sig_s, sig1, sig2, cut
    cdef int64_t start, kgen, half_cache, mask, n_counters
    cdef bint exhausted

    # fire FIFO (ring)
    cdef int64_t[:] f_k
    cdef uint8_t[:] f_photon
    cdef int64_t[:] f_c
    cdef double[:] f_ts
    cdef int64_t f_head, f_len, f_mask

    # pulse cache (ring keyed by pulse index)
    cdef int64_t[:] tag
    cdef int64_t[:] cval
    cdef uint8_t[:] sampled
    cdef int[:] n1
    cdef int[:] n2
    cdef double[:] t1
    cdef double[:] t2
    cdef uint8_t[:] corr1
    cdef uint8_t[:] corr2

    cdef int64_t[:] counters

    # gate result
    cdef double g_t, g_arrival
    cdef int64_t g_pulse
    cdef int g_origin

    def __init__(self, prm, rng, int64_t start, int64_t warmup):
        cdef double x
        cdef int64_t size = prm.cache_size
        self.bit_generator = rng.bit_generator
        self.bg = <bitgen_t *> PyCapsule_GetPointer(self.bit_generator.capsule, "BitGenerator")
        self.tp = prm.period_ps
        self.law = prm.law
        self.mu = prm.mu
        self.q_herald = 1.0 - prm.eta_herald
        if self.law == _NEGBIN:
            self.p_h = self.mu * prm.eta_herald / (1.0 + self.mu * prm.eta_herald)
        else:
            self.p_h = -expm1(-self.mu * prm.eta_herald)
        p_d = prm.sspd_dark_per_pulse
        self.p_fire = self.p_h + p_d - self.p_h * p_d
        self.log_q_fire = log1p(-self.p_fire) if self.p_fire < 1.0 else -INFINITY

        self.cl_p0, self.cl_a, self.cl_b = _coefficients(self.law, 1, self.mu)
        if self.law == _NEGBIN:
            x = self.mu / (1.0 + self.mu) * self.q_herald
            self.nc_p0, self.nc_a, self.nc_b = _coefficients(self.law, 1, x / (1.0 - x))
        else:
            self.nc_p0, self.nc_a, self.nc_b = _coefficients(self.law, 1, self.mu * self.q_herald)
        self.noise_on = prm.noise_modes > 0 and prm.noise_mu > 0.0
        self.nz_p0, self.nz_a, self.nz_b = _coefficients(self.law, prm.noise_modes, prm.noise_mu)

        self.a1 = prm.t_idler * 0.5 * prm.apd1_eff
        self.a12 = self.a1 + prm.t_idler * 0.5 * prm.apd2_eff
        self.sig_s = prm.sspd_sigma_ps
        self.sig1 = prm.apd1_sigma_ps
        self.sig2 = prm.apd2_sigma_ps
        self.cut = prm.sigma_cut

        self.start = start
        self.kgen = start - warmup - 1
        self.exhausted = self.p_fire <= 0.0

        self.half_cache = size // 2
        self.mask = size - 1
        self.f_mask = size - 1
        self.f_head = 0
        self.f_len = 0
        self.f_k = np.zeros(size, dtype=np.int64)
        self.f_photon = np.zeros(size, dtype=np.uint8)
        self.f_c = np.zeros(size, dtype=np.int64)
        self.f_ts = np.zeros(size, dtype=np.float64)

        self.tag = np.full(size, -(1 << 62), dtype=np.int64)
        self.cval = np.zeros(size, dtype=np.int64)
        self.sampled = np.zeros(size, dtype=np.uint8)
        self.n1 = np.zeros(size, dtype=np.intc)
        self.n2 = np.zeros(size, dtype=np.intc)
        self.t1 = np.zeros(size * MAX_PHOTONS, dtype=np.float64)
        self.t2 = np.zeros(size * MAX_PHOTONS, dtype=np.float64)
        self.corr1 = np.zeros(size * MAX_PHOTONS, dtype=np.uint8)
        self.corr2 = np.zeros(size * MAX_PHOTONS, dtype=np.uint8)
        self.counters = np.zeros(N_COUNTERS, dtype=np.int64)

    cdef inline double rand(self) nogil:
        return self.bg.next_double(self.bg.state)

    cdef inline double normal(self) nogil:
        cdef double u1 = self.rand()
        cdef double u2 = self.rand()
        return sqrt(-2.0 * log1p(-u1)) * cos(TWO_PI * u2)

    cdef int generate(self) except -1:
        cdef int64_t k = self.kgen + _gap(self.rand(), self.log_q_fire)
        cdef int64_t pos
        cdef double base
        self.kgen = k
        if k >= MAX_GAP // 2:
            self.exhausted = True
            return 0
        if self.f_len > self.f_mask:
            raise RuntimeError("fire queue overflow; increase cache_size")
        pos = (self.f_head + self.f_len) & self.f_mask
        self.f_len += 1
        base = (k - self.start) * self.tp
        self.f_k[pos] = k
        if self.rand() * self.p_fire < self.p_h:
            self.f_photon[pos] = 1
            self.f_c[pos] = _draw_clicked(self.rand(), self.law, self.cl_p0, self.cl_a, self.cl_b,
                                          self.q_herald, self.p_h)
            self.f_ts[pos] = base + (self.sig_s * self.normal() if self.sig_s > 0.0 else 0.0)
        else:
            self.f_photon[pos] = 0
            self.f_c[pos] = -1
            self.f_ts[pos] = base + (self.rand() - 0.5) * self.tp
        return 0

    cdef inline int ensure_generated(self, int64_t j) except -1:
        while not self.exhausted and self.kgen < j:
            self.generate()
        return 0

    cdef void fill(self, int64_t j, int64_t slot):
        cdef int64_t c = self.cval[slot], total, i
        cdef double v, t, base
        cdef int64_t off = slot * MAX_PHOTONS
        if c < 0:
            c = _draw_count(self.rand(), self.law, self.nc_p0, self.nc_a, self.nc_b) if self.mu > 0.0 else 0
            self.cval[slot] = c
        total = c
        if self.noise_on:
            total += _draw_count(self.rand(), self.law, self.nz_p0, self.nz_a, self.nz_b)
        if self.a12 > 0.0:
            base = (j - self.start) * self.tp
            for i in range(total):
                v = self.rand()
                if v < self.a1:
                    t = base + (self.sig1 * self.normal() if self.sig1 > 0.0 else 0.0)
                    if self.n1[slot] < MAX_PHOTONS:
                        self.t1[off + self.n1[slot]] = t
                        self.corr1[off + self.n1[slot]] = i < c
                        self.n1[slot] += 1
                    else:
                        self.counters[C_OVERFLOW] += 1
                elif v < self.a12:
                    t = base + (self.sig2 * self.normal() if self.sig2 > 0.0 else 0.0)
                    if self.n2[slot] < MAX_PHOTONS:
                        self.t2[off + self.n2[slot]] = t
                        self.corr2[off + self.n2[slot]] = i < c
                        self.n2[slot] += 1
                    else:
                        self.counters[C_OVERFLOW] += 1
        self.sampled[slot] = 1

    cdef inline void reset_slot(self, int64_t slot, int64_t j, int64_t c):
        self.tag[slot] = j
        self.cval[slot] = c
        self.sampled[slot] = 0
        self.n1[slot] = 0
        self.n2[slot] = 0

    cdef int64_t lookup(self, int64_t j) except -1:
        cdef int64_t slot = j & self.mask, c, i, pos
        if self.tag[slot] != j:
            self.ensure_generated(j)
            c = -1
            for i in range(self.f_len):
                pos = (self.f_head + i) & self.f_mask
                if self.f_k[pos] >= j:
                    if self.f_k[pos] == j and self.f_photon[pos]:
                        c = self.f_c[pos]
                    break
            self.reset_slot(slot, j, c)
        if not self.sampled[slot]:
            self.fill(j, slot)
        return slot

    cdef int gate(self, double w0, double w1, int which, double sigma, double dark_gate, int64_t k_h) except -1:
        cdef double best_t = INFINITY, t
        cdef bint found = False
        cdef int64_t jlo, jhi, j, slot, off, i, n
        cdef bint corr
        jlo = self.start + <int64_t>floor((w0 - self.cut * sigma) / self.tp)
        jhi = self.start + <int64_t>floor((w1 + self.cut * sigma) / self.tp)
        for j in range(jlo, jhi + 1):
            if j < k_h - self.half_cache or j > k_h + self.half_cache:
                self.counters[C_OVERFLOW] += 1
                continue
            slot = self.lookup(j)
            off = slot * MAX_PHOTONS
            n = self.n1[slot] if which == 1 else self.n2[slot]
            for i in range(n):
                if which == 1:
                    t = self.t1[off + i]
                    corr = self.corr1[off + i]
                else:
                    t = self.t2[off + i]
                    corr = self.corr2[off + i]
                if w0 <= t <= w1 and t < best_t:
                    best_t = t
                    found = True
                    self.g_t = t
                    self.g_arrival = (j - self.start) * self.tp
                    self.g_pulse = j
                    self.g_origin = _CORR if (corr and j == k_h) else _UNCORR
        if dark_gate > 0.0 and self.rand() < dark_gate:
            t = w0 + self.rand() * (w1 - w0)
            if t < best_t:
                found = True
                self.g_t = t
                self.g_arrival = t
                self.g_pulse = self.start + <int64_t>floor(t / self.tp + 0.5)
                self.g_origin = _DARK
        return found


def run_block(prm, rng, int64_t start, int64_t end, int64_t warmup, bint record=False):
    """Simulate pulses ``[start, end)`` after ``warmup`` unrecorded pulses."""
    cdef _Block b = _Block(prm, rng, start, warmup)
    cdef double tp = b.tp
    cdef double sspd_dead = prm.sspd_dead_ps
    cdef double d1 = prm.tac1_delay_ps, d2 = prm.tac2_delay_ps
    cdef double w1len = prm.tac1_window_ps, w2len = prm.tac2_window_ps
    cdef double dead1 = prm.apd1_dead_ps, dead2 = prm.apd2_dead_ps
    cdef double dark1 = prm.apd1_dark_gate, dark2 = prm.apd2_dark_gate
    cdef bint trig_jitter = prm.apd2_trigger_jitter
    cdef double sspd_last = -INFINITY, apd1_last = -INFINITY, apd2_last = -INFINITY
    cdef double ts, w0, t1, arrival1, t2, trig
    cdef int64_t k, c, pos, slot, j1, j2
    cdef bint photon, counted
    cdef int origin1, origin2
    cdef int64_t[:] counters = b.counters
    records = [] if record else None

    while True:
        if b.f_len == 0:
            if b.exhausted or b.kgen >= end:
                break
            b.generate()
            continue
        pos = b.f_head
        k = b.f_k[pos]
        if k >= end:
            break
        photon = b.f_photon[pos]
        c = b.f_c[pos]
        ts = b.f_ts[pos]
        b.f_head = (b.f_head + 1) & b.f_mask
        b.f_len -= 1
        if photon:
            slot = k & b.mask
            if b.tag[slot] != k:
                b.reset_slot(slot, k, c)

        counted = k >= start
        if ts < sspd_last + sspd_dead:
            if counted:
                counters[C_SSPD_BLOCKED] += 1
            continue
        sspd_last = ts
        if counted:
            counters[C_HERALDS + (_CORR if photon else _DARK)] += 1
            if record:
                records.append((SSPD, k, ts - (k - start) * tp, _CORR if photon else _DARK))

        w0 = ts + d1
        if w0 < apd1_last + dead1:
            continue
        if counted:
            counters[C_APD1_GATES] += 1
        if not b.gate(w0, w0 + w1len, 1, b.sig1, dark1, k):
            continue
        t1 = b.g_t
        arrival1 = b.g_arrival
        j1 = b.g_pulse
        origin1 = b.g_origin
        apd1_last = t1
        if counted:
            counters[C_S1 + origin1] += 1
            counters[C_APD1_CLICKS] += 1
            if record:
                records.append((APD1, j1, t1 - (j1 - start) * tp, origin1))

        trig = t1 if trig_jitter else arrival1
        w0 = trig + d2
        if w0 < apd2_last + dead2:
            continue
        if counted:
            counters[C_APD2_GATES] += 1
        if not b.gate(w0, w0 + w2len, 2, b.sig2, dark2, k):
            continue
        t2 = b.g_t
        j2 = b.g_pulse
        origin2 = b.g_origin
        apd2_last = t2
        if counted:
            counters[C_S2 + origin2] += 1
            counters[C_APD2_CLICKS] += 1
            if record:
                records.append((APD2, j2, t2 - (j2 - start) * tp, origin2))

    return [int(x) for x in b.counters], records
