"""Full-chain event-skipping simulation over a pulse train.

The train is cut into fixed blocks of ``block_size_pulses``. Each block gets
its own Philox stream keyed by ``(seed, block_index)`` and starts with an
unrecorded warm-up so that detector dead times and open windows are already in
a realistic state at its first recorded pulse. Totals are a plain sum over
blocks, so they do not depend on how many workers ran the blocks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .. import model
from ..model import DetectorModel, ModeStructure, SourceConfig
from . import _params as P
from . import backend
from .ops import DETECTORS, ORIGINS, ClickRecord

SIGMA_CUT = 6.0


class ScenarioError(ValueError):
    """A scenario failed validation before any sampling."""


class SimulationInvariantError(RuntimeError):
    """Merged counters broke a conservation rule."""


@dataclass(frozen=True)
class SimScenario:
    source: SourceConfig = field(default_factory=SourceConfig)
    sspd: DetectorModel = field(default_factory=model.default_sspd)
    apd1: DetectorModel = field(default_factory=lambda: model.default_apd(300.0))
    apd2: DetectorModel = field(default_factory=lambda: model.default_apd(400.0))
    modes: ModeStructure = field(default_factory=ModeStructure)
    tac1_window_ps: float = 300.0
    tac2_window_ps: float = 400.0
    duration_s: float = 10e-3
    seed: int = 1
    block_size_pulses: int = 100_000_000
    # None centres the window on the expected arrival of the triggering photon
    tac1_delay_ps: float | None = None
    tac2_delay_ps: float | None = None
    apd2_trigger_jitter: bool = True

    @property
    def n_pulses(self) -> int:
        return int(round(self.duration_s * self.source.rep_rate_hz))

    @property
    def delays_ps(self):
        d1 = -0.5 * self.tac1_window_ps if self.tac1_delay_ps is None else self.tac1_delay_ps
        d2 = -0.5 * self.tac2_window_ps if self.tac2_delay_ps is None else self.tac2_delay_ps
        return d1, d2

    def validate(self):
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise ScenarioError(f"duration_s must be > 0, got {self.duration_s!r}")
        if self.n_pulses < 1:
            raise ScenarioError("duration shorter than one pulse period")
        for name in ("tac1_window_ps", "tac2_window_ps"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ScenarioError(f"{name} must be >= 0, got {value!r}")
        if int(self.block_size_pulses) != self.block_size_pulses or self.block_size_pulses < 1:
            raise ScenarioError("block_size_pulses must be an integer >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ScenarioError("seed must fit in 64 unsigned bits")
        if self.sspd.mode != model.FREE_RUNNING:
            raise ScenarioError("the heralding detector must be free-running")
        for name in ("apd1", "apd2"):
            if getattr(self, name).mode != model.TRIGGERED:
                raise ScenarioError(f"{name} must be triggered")
        if self.modes.mu_per_mode > 50 or self.modes.noise_mu * max(1, self.modes.n_spectral - 1) > 50:
            raise ScenarioError("mean pair numbers above 50 per pulse are not supported")


@dataclass
class CountingTotals:
    heralds: int = 0
    s1_counts: int = 0
    s2_counts: int = 0
    duration_s: float = 0.0
    apd1_busy_s: float = 0.0
    apd2_busy_s: float = 0.0
    heralds_by_origin: dict = field(default_factory=lambda: dict.fromkeys(ORIGINS, 0))
    s1_by_origin: dict = field(default_factory=lambda: dict.fromkeys(ORIGINS, 0))
    s2_by_origin: dict = field(default_factory=lambda: dict.fromkeys(ORIGINS, 0))
    sspd_blocked: int = 0
    apd1_gates: int = 0
    apd2_gates: int = 0
    overflow: int = 0
    n_pulses: int = 0
    records: list | None = None

    def check(self):
        problems = []
        for name, by_origin in (("heralds", self.heralds_by_origin), ("s1_counts", self.s1_by_origin),
                                ("s2_counts", self.s2_by_origin)):
            if sum(by_origin.values()) != getattr(self, name):
                problems.append(f"{name} differs from its per-origin breakdown")
        if not self.s2_counts <= self.s1_counts <= self.heralds:
            problems.append("expected s2 <= s1 <= heralds")
        if not (self.apd2_gates <= self.s1_counts and self.apd1_gates <= self.heralds):
            problems.append("more gates than triggers")
        if self.apd1_busy_s > self.duration_s or self.apd2_busy_s > self.duration_s:
            problems.append("busy time exceeds duration")
        if problems:
            raise SimulationInvariantError("; ".join(problems))
        return self


def _next_pow2(n):
    return 1 << max(6, int(n - 1).bit_length())


def kernel_params(scenario: SimScenario) -> P.KernelParams:
    src = scenario.source
    tp = src.pulse_period_ps
    d1, d2 = scenario.delays_ps
    sig_s = scenario.sspd.jitter_sigma_ps
    sig1 = scenario.apd1.jitter_sigma_ps
    sig2 = scenario.apd2.jitter_sigma_ps
    reach_ps = (abs(d1) + scenario.tac1_window_ps + abs(d2) + scenario.tac2_window_ps
                + 2 * SIGMA_CUT * (sig_s + sig1 + sig2) + 2 * tp)
    span = int(math.ceil(reach_ps / tp)) + 4
    return P.KernelParams(
        period_ps=tp,
        law=P.LAW_NEGBIN if src.statistics == model.THERMAL else P.LAW_POISSON,
        mu=scenario.modes.mu_per_mode,
        noise_modes=scenario.modes.n_spectral - 1,
        noise_mu=scenario.modes.noise_mu,
        eta_herald=src.gamma * src.signal_transmission * scenario.sspd.efficiency,
        sspd_dark_per_pulse=-math.expm1(-scenario.sspd.dark_rate_hz / src.rep_rate_hz),
        sspd_sigma_ps=sig_s,
        sspd_dead_ps=scenario.sspd.dead_time_s * 1e12,
        t_idler=src.gamma * src.idler_transmission,
        apd1_eff=scenario.apd1.efficiency,
        apd1_sigma_ps=sig1,
        apd1_dead_ps=scenario.apd1.dead_time_s * 1e12,
        apd1_dark_gate=scenario.apd1.dark_prob_per_gate,
        apd2_eff=scenario.apd2.efficiency,
        apd2_sigma_ps=sig2,
        apd2_dead_ps=scenario.apd2.dead_time_s * 1e12,
        apd2_dark_gate=scenario.apd2.dark_prob_per_gate,
        tac1_window_ps=scenario.tac1_window_ps,
        tac1_delay_ps=d1,
        tac2_window_ps=scenario.tac2_window_ps,
        tac2_delay_ps=d2,
        apd2_trigger_jitter=scenario.apd2_trigger_jitter,
        cache_size=_next_pow2(4 * span),
        sigma_cut=SIGMA_CUT,
    )


def warmup_pulses(scenario: SimScenario) -> int:
    """Unrecorded pulses replayed before each block: two dead times plus both windows."""
    dead_ps = 1e12 * max(scenario.sspd.dead_time_s, scenario.apd1.dead_time_s, scenario.apd2.dead_time_s)
    margin_ps = 2 * dead_ps + scenario.tac1_window_ps + scenario.tac2_window_ps
    return int(math.ceil(margin_ps / scenario.source.pulse_period_ps)) + 1


def block_rng(seed: int, block_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block_index)])))


def block_schedule(scenario: SimScenario):
    n, size = scenario.n_pulses, int(scenario.block_size_pulses)
    return [(b, start, min(start + size, n)) for b, start in enumerate(range(0, n, size))]


def _run_one(args):
    backend_name, prm, seed, b, start, end, warmup, record = args
    kernel = backend.load(backend_name)
    return kernel.run_block(prm, block_rng(seed, b), start, end, warmup, record)


def default_workers() -> int:
    cap = os.environ.get("HSPS_SIM_THREADS")
    if cap:
        return max(1, int(cap))
    return os.cpu_count() or 1


def resolve_workers(requested: int | None, n_jobs: int) -> int:
    """Requested worker count, at most one per job and at most ``HSPS_SIM_THREADS``."""
    workers = min(requested or 1, max(n_jobs, 1))
    if os.environ.get("HSPS_SIM_THREADS"):
        workers = min(workers, default_workers())
    return workers


def run(scenario: SimScenario, workers: int | None = None, record: bool = False,
        backend_name: str | None = None) -> CountingTotals:
    """Simulate the scenario and return merged counters.

    ``workers`` > 1 spreads blocks over processes; the result is identical for
    any worker count. ``HSPS_SIM_THREADS`` caps the worker count.
    """
    scenario.validate()
    backend_name = backend_name or backend.DEFAULT
    prm = kernel_params(scenario)
    warmup = warmup_pulses(scenario)
    jobs = [(backend_name, prm, int(scenario.seed), b, start, end, warmup, record)
            for b, start, end in block_schedule(scenario)]
    workers = resolve_workers(workers, len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    return merge(scenario, results)


def merge(scenario: SimScenario, results) -> CountingTotals:
    c = np.zeros(P.N_COUNTERS, dtype=np.int64)
    records = [] if results and results[0][1] is not None else None
    for counters, recs in results:
        c += np.asarray(counters, dtype=np.int64)
        if records is not None:
            records.extend(recs)
    n_pulses = scenario.n_pulses
    duration = n_pulses / scenario.source.rep_rate_hz

    def by_origin(offset):
        return {name: int(c[offset + i]) for i, name in enumerate(ORIGINS)}

    totals = CountingTotals(
        heralds=int(c[P.C_HERALDS:P.C_HERALDS + 3].sum()),
        s1_counts=int(c[P.C_S1:P.C_S1 + 3].sum()),
        s2_counts=int(c[P.C_S2:P.C_S2 + 3].sum()),
        duration_s=duration,
        apd1_busy_s=min(duration, int(c[P.C_APD1_CLICKS]) * scenario.apd1.dead_time_s),
        apd2_busy_s=min(duration, int(c[P.C_APD2_CLICKS]) * scenario.apd2.dead_time_s),
        heralds_by_origin=by_origin(P.C_HERALDS),
        s1_by_origin=by_origin(P.C_S1),
        s2_by_origin=by_origin(P.C_S2),
        sspd_blocked=int(c[P.C_SSPD_BLOCKED]),
        apd1_gates=int(c[P.C_APD1_GATES]),
        apd2_gates=int(c[P.C_APD2_GATES]),
        overflow=int(c[P.C_OVERFLOW]),
        n_pulses=n_pulses,
    )
    if records is not None:
        totals.records = [ClickRecord(DETECTORS[d], int(k), float(off), ORIGINS[o])
                          for d, k, off, o in records]
    return totals.check()


def with_mu(scenario: SimScenario, mu: float) -> SimScenario:
    return replace(scenario, modes=replace(scenario.modes, mu_per_mode=mu))

