"""Stand-alone sampling and detection steps of the source chain.

These operate on numpy generators and arrays and are what the fused block
kernel composes. They double as independent references for the kernel in the
test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import FREE_RUNNING, THERMAL, DetectorModel, DomainError, ModeStructure
from . import backend
from ._params import CORRELATED, DARK

ORIGINS = ("photon_correlated", "photon_uncorrelated", "dark")
DETECTORS = ("SSPD", "APD1", "APD2")


@dataclass(frozen=True)
class ClickRecord:
    detector_id: str
    pulse_index: int
    offset_ps: float
    origin: str


def _pair_counts(rng, mean, statistics, size):
    if mean == 0:
        return np.zeros(size, dtype=np.int64)
    if statistics == THERMAL:
        # Bose-Einstein: failures before the first success at p = 1/(1+mean)
        return rng.geometric(1.0 / (1.0 + mean), size=size) - 1
    return rng.poisson(mean, size=size)


def sample_pulse(rng, modes: ModeStructure, statistics=THERMAL):
    """Pair counts of one pump pulse.

    Returns ``(correlated, uncorrelated)``: the heralding-correlated mode's pair
    number and an array with one entry per uncorrelated idler-band mode.
    """
    correlated, noise = sample_pulses(rng, modes, statistics, 1)
    return int(correlated[0]), noise[0]


def sample_pulses(rng, modes: ModeStructure, statistics, n_pulses):
    """Vectorised :func:`sample_pulse`: arrays of shape (n,) and (n, n_spectral - 1)."""
    correlated = _pair_counts(rng, modes.mu_per_mode, statistics, n_pulses)
    noise = _pair_counts(rng, modes.noise_mu, statistics, (n_pulses, modes.n_spectral - 1))
    return correlated, noise


def skip_to_next_event(rng, p_any_event_per_pulse, size=None):
    """Pulses to advance to the next pulse holding an event (geometric, >= 1)."""
    p = p_any_event_per_pulse
    if not 0.0 < p <= 1.0:
        raise DomainError(f"event probability must lie in (0, 1], got {p!r}")
    return rng.geometric(p, size=size)


def transport(counts, transmissions, rng):
    """Thin photon counts through loss stages, one independent Bernoulli per photon per stage."""
    out = np.asarray(counts, dtype=np.int64)
    for t in transmissions:
        if not 0.0 <= t <= 1.0:
            raise DomainError(f"transmission must lie in [0, 1], got {t!r}")
        out = rng.binomial(out, t)
    return out


def tac_gate(click_time_ps, trigger_time_ps, window_ps):
    """True where ``0 <= click - trigger <= window``; works elementwise on arrays."""
    if np.any(np.asarray(window_ps) < 0):
        raise DomainError("window must be >= 0")
    delay = np.asarray(click_time_ps) - np.asarray(trigger_time_ps)
    accepted = (delay >= 0) & (delay <= window_ps)
    return bool(accepted) if np.ndim(accepted) == 0 else accepted


@dataclass
class ClickTrain:
    """Detector output: ascending click times (ps) with origin codes."""

    times_ps: np.ndarray
    origins: np.ndarray

    def __len__(self):
        return len(self.times_ps)

    def records(self, detector_id, period_ps):
        pulses = np.floor(self.times_ps / period_ps + 0.5).astype(np.int64)
        return [ClickRecord(detector_id, int(k), float(t - k * period_ps), ORIGINS[o])
                for k, t, o in zip(pulses, self.times_ps, self.origins)]


def detect(arrivals_ps, detector: DetectorModel, rng, span_ps=None, gates_ps=None, origins=None):
    """Turn photon arrival times into clicks.

    Each arrival clicks with probability ``detector.efficiency`` at its arrival
    time plus Gaussian jitter. A free-running detector adds Poisson darks over
    ``span_ps = (t0, t1)``; a triggered one only sees clicks inside
    ``[g, g + gate_window_ps]`` for each gate opening ``g`` and adds one
    Bernoulli dark per gate. Clicks inside the dead time of an earlier click are
    dropped without extending it.
    """
    arrivals = np.asarray(arrivals_ps, dtype=np.float64)
    if arrivals.size > 1 and np.any(np.diff(arrivals) < 0):
        raise ValueError("arrivals must be time-ordered")
    if origins is None:
        origins = np.full(arrivals.shape, CORRELATED, dtype=np.int8)
    origins = np.asarray(origins, dtype=np.int8)

    hit = rng.random(arrivals.size) < detector.efficiency
    times = arrivals[hit]
    tags = origins[hit]
    if detector.jitter_sigma_ps > 0:
        times = times + rng.normal(0.0, detector.jitter_sigma_ps, size=times.size)

    if detector.mode == FREE_RUNNING:
        if span_ps is not None and detector.dark_rate_hz > 0:
            t0, t1 = span_ps
            n_dark = rng.poisson(detector.dark_rate_hz * (t1 - t0) * 1e-12)
            dark = rng.uniform(t0, t1, size=n_dark)
            times = np.concatenate([times, dark])
            tags = np.concatenate([tags, np.full(n_dark, DARK, dtype=np.int8)])
    else:
        gates = np.sort(np.asarray(gates_ps if gates_ps is not None else [], dtype=np.float64))
        window = detector.gate_window_ps
        # a click is seen if it falls inside the latest gate opened before it
        idx = np.searchsorted(gates, times, side="right") - 1
        inside = (idx >= 0) & (times - gates[np.clip(idx, 0, None)] <= window) if gates.size else \
            np.zeros(times.size, dtype=bool)
        times, tags = times[inside], tags[inside]
        dark_hit = rng.random(gates.size) < detector.dark_prob_per_gate
        dark = gates[dark_hit] + rng.random(int(dark_hit.sum())) * window
        times = np.concatenate([times, dark])
        tags = np.concatenate([tags, np.full(dark.size, DARK, dtype=np.int8)])

    order = np.argsort(times, kind="stable")
    times, tags = times[order], tags[order]
    dead_ps = detector.dead_time_s * 1e12
    if dead_ps > 0 and times.size:
        keep = np.asarray(backend.kernel.dead_time_filter(times, dead_ps), dtype=bool)
        times, tags = times[keep], tags[keep]
    return ClickTrain(times, tags)
