"""Pure-Python block kernel.

This is the reference for ``_ckernel``: both consume the same uniform doubles
from the block's bit generator in the same order and apply the same
transforms, so a block produces identical counters on either backend.

Times inside a block are float ps relative to the block's first pulse.
"""

from __future__ import annotations

import math
from collections import deque

from ._params import (
    APD1, APD2, C_APD1_CLICKS, C_APD1_GATES, C_APD2_CLICKS, C_APD2_GATES, C_HERALDS,
    C_OVERFLOW, C_S1, C_S2, C_SSPD_BLOCKED, CORRELATED, DARK, LAW_NEGBIN, N_COUNTERS,
    SSPD, UNCORRELATED,
)

BACKEND = "python"

MAX_PHOTONS = 32
MAX_COUNT = 100_000
MAX_GAP = 1 << 62
TWO_PI = 6.283185307179586


def geometric_gap(u, log_q):
    """Trials up to and including the next success; ``log_q = log1p(-p)``."""
    if log_q == -math.inf:
        return 1
    g = math.log1p(-u) / log_q
    if g >= MAX_GAP:
        return MAX_GAP
    return 1 + int(math.floor(g))


def draw_count(u, law, p0, a, b):
    """Inverse-CDF draw from a negative binomial (shape a, ratio b) or Poisson (mean a)."""
    p = p0
    cum = p0
    n = 0
    while not u < cum:
        if law == LAW_NEGBIN:
            p *= (n + a) / (n + 1) * b
        else:
            p *= a / (n + 1)
        n += 1
        cum += p
        if p == 0.0 or n >= MAX_COUNT:
            break
    return n


def draw_clicked(u, law, p0, a, b, q, p_click):
    """Pair number given that at least one of them was detected (efficiency 1 - q)."""
    target = u * p_click
    p = p0
    qn = 1.0
    cum = 0.0
    n = 0
    while True:
        if law == LAW_NEGBIN:
            p *= (n + a) / (n + 1) * b
        else:
            p *= a / (n + 1)
        n += 1
        qn *= q
        cum += p * (1.0 - qn)
        if cum > target or p == 0.0 or n >= MAX_COUNT:
            return n


def law_coefficients(law, shape, mean_per_mode):
    """(p0, a, b) for ``draw_count``; thermal modes sum to a negative binomial."""
    if law == LAW_NEGBIN:
        return (1.0 + mean_per_mode) ** (-shape), float(shape), mean_per_mode / (1.0 + mean_per_mode)
    lam = shape * mean_per_mode
    return math.exp(-lam), lam, 0.0


def click_probability(law, mu, eta):
    """P(at least one of a mode's photons is detected) at efficiency ``eta``."""
    if law == LAW_NEGBIN:
        return mu * eta / (1.0 + mu * eta)
    return -math.expm1(-mu * eta)


def dead_time_filter(times, dead):
    """Mask of events kept by a non-paralyzable detector; ``times`` ascending."""
    keep = [False] * len(times)
    last = -math.inf
    for i, t in enumerate(times):
        if t >= last + dead:
            keep[i] = True
            last = t
    return keep


def run_block(prm, rng, start, end, warmup, record=False):
    """Simulate pulses ``[start, end)`` after ``warmup`` unrecorded pulses.

    Returns ``(counters, records)``; counters follow the ``C_*`` layout and
    records is a list of ``(detector, pulse, offset_ps, origin)`` or None.
    """
    rand = rng.random
    counters = [0] * N_COUNTERS
    records = [] if record else None

    tp = prm.period_ps
    law = prm.law
    mu = prm.mu
    q_herald = 1.0 - prm.eta_herald

    p_h = click_probability(law, mu, prm.eta_herald)
    p_d = prm.sspd_dark_per_pulse
    p_fire = p_h + p_d - p_h * p_d
    log_q_fire = math.log1p(-p_fire) if p_fire < 1.0 else -math.inf

    # correlated mode: prior (for clicked posterior) and no-click posterior
    cl_p0, cl_a, cl_b = law_coefficients(law, 1, mu)
    if law == LAW_NEGBIN:
        x = mu / (1.0 + mu) * q_herald
        nc_p0, nc_a, nc_b = law_coefficients(law, 1, x / (1.0 - x))
    else:
        nc_p0, nc_a, nc_b = law_coefficients(law, 1, mu * q_herald)
    noise_on = prm.noise_modes > 0 and prm.noise_mu > 0.0
    nz_p0, nz_a, nz_b = law_coefficients(law, prm.noise_modes, prm.noise_mu)

    a1 = prm.t_idler * 0.5 * prm.apd1_eff
    a12 = a1 + prm.t_idler * 0.5 * prm.apd2_eff
    sig_s, sig1, sig2 = prm.sspd_sigma_ps, prm.apd1_sigma_ps, prm.apd2_sigma_ps
    cut = prm.sigma_cut
    half_cache = prm.cache_size // 2

    def normal():
        u1 = rand()
        u2 = rand()
        return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(TWO_PI * u2)

    # fire = a pulse where the SSPD would register something: [pulse, is_photon, c, ts]
    fifo = deque()
    state = {"kgen": start - warmup - 1, "exhausted": p_fire <= 0.0}

    def generate():
        k = state["kgen"] + geometric_gap(rand(), log_q_fire)
        state["kgen"] = k
        if k >= MAX_GAP // 2:
            state["exhausted"] = True
            return
        base = (k - start) * tp
        if rand() * p_fire < p_h:
            c = draw_clicked(rand(), law, cl_p0, cl_a, cl_b, q_herald, p_h)
            ts = base + (sig_s * normal() if sig_s > 0.0 else 0.0)
            fifo.append((k, True, c, ts))
        else:
            fifo.append((k, False, -1, base + (rand() - 0.5) * tp))

    def ensure_generated(j):
        while not state["exhausted"] and state["kgen"] < j:
            generate()

    # pulse cache: j -> [c, sampled, apd1 photons, apd2 photons]; photon = (t, correlated)
    cache = {}

    def fill(j, entry):
        c = entry[0]
        if c < 0:
            c = draw_count(rand(), law, nc_p0, nc_a, nc_b) if mu > 0.0 else 0
            entry[0] = c
        total = c
        if noise_on:
            total += draw_count(rand(), law, nz_p0, nz_a, nz_b)
        det1 = entry[2]
        det2 = entry[3]
        if a12 > 0.0:
            base = (j - start) * tp
            for i in range(total):
                v = rand()
                if v < a1:
                    t = base + (sig1 * normal() if sig1 > 0.0 else 0.0)
                    if len(det1) < MAX_PHOTONS:
                        det1.append((t, i < c))
                    else:
                        counters[C_OVERFLOW] += 1
                elif v < a12:
                    t = base + (sig2 * normal() if sig2 > 0.0 else 0.0)
                    if len(det2) < MAX_PHOTONS:
                        det2.append((t, i < c))
                    else:
                        counters[C_OVERFLOW] += 1
        entry[1] = True

    def lookup(j):
        entry = cache.get(j)
        if entry is None:
            ensure_generated(j)
            c = -1
            for f in fifo:
                if f[0] >= j:
                    if f[0] == j and f[1]:
                        c = f[2]
                    break
            entry = [c, False, [], []]
            cache[j] = entry
        if not entry[1]:
            fill(j, entry)
        return entry

    def gate(w0, w1, slot, sigma, dark_gate, k_h):
        """Earliest click inside [w0, w1]: (time, arrival, pulse, origin) or None."""
        best_t = math.inf
        best = None
        jlo = start + int(math.floor((w0 - cut * sigma) / tp))
        jhi = start + int(math.floor((w1 + cut * sigma) / tp))
        for j in range(jlo, jhi + 1):
            if j < k_h - half_cache or j > k_h + half_cache:
                counters[C_OVERFLOW] += 1
                continue
            for t, corr in lookup(j)[slot]:
                if w0 <= t <= w1 and t < best_t:
                    best_t = t
                    best = (t, (j - start) * tp, j, CORRELATED if (corr and j == k_h) else UNCORRELATED)
        if dark_gate > 0.0 and rand() < dark_gate:
            t = w0 + rand() * (w1 - w0)
            if t < best_t:
                j = start + int(math.floor(t / tp + 0.5))
                best = (t, t, j, DARK)
        return best

    def emit(det, pulse, t, origin):
        records.append((det, pulse, t - (pulse - start) * tp, origin))

    sspd_last = apd1_last = apd2_last = -math.inf
    n_popped = 0
    while True:
        if not fifo:
            if state["exhausted"] or state["kgen"] >= end:
                break
            generate()
            continue
        k, photon, c, ts = fifo[0]
        if k >= end:
            break
        fifo.popleft()
        if photon and k not in cache:
            cache[k] = [c, False, [], []]
        n_popped += 1
        if n_popped % 4096 == 0 and len(cache) > 4 * prm.cache_size:
            floor_k = k - half_cache
            for key in [key for key in cache if key < floor_k]:
                del cache[key]

        counted = k >= start
        if ts < sspd_last + prm.sspd_dead_ps:
            if counted:
                counters[C_SSPD_BLOCKED] += 1
            continue
        sspd_last = ts
        if counted:
            counters[C_HERALDS + (CORRELATED if photon else DARK)] += 1
            if record:
                emit(SSPD, k, ts, CORRELATED if photon else DARK)

        w0 = ts + prm.tac1_delay_ps
        if w0 < apd1_last + prm.apd1_dead_ps:
            continue
        if counted:
            counters[C_APD1_GATES] += 1
        hit = gate(w0, w0 + prm.tac1_window_ps, 2, sig1, prm.apd1_dark_gate, k)
        if hit is None:
            continue
        t1, arrival1, j1, origin1 = hit
        apd1_last = t1
        if counted:
            counters[C_S1 + origin1] += 1
            counters[C_APD1_CLICKS] += 1
            if record:
                emit(APD1, j1, t1, origin1)

        trig = t1 if prm.apd2_trigger_jitter else arrival1
        w0 = trig + prm.tac2_delay_ps
        if w0 < apd2_last + prm.apd2_dead_ps:
            continue
        if counted:
            counters[C_APD2_GATES] += 1
        hit = gate(w0, w0 + prm.tac2_window_ps, 3, sig2, prm.apd2_dark_gate, k)
        if hit is None:
            continue
        t2, _, j2, origin2 = hit
        apd2_last = t2
        if counted:
            counters[C_S2 + origin2] += 1
            counters[C_APD2_CLICKS] += 1
            if record:
                emit(APD2, j2, t2, origin2)

    return counters, records
