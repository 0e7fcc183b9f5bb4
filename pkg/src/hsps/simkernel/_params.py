"""Flat parameter record handed to the block kernels."""

from __future__ import annotations

from typing import NamedTuple

# origin codes shared by both kernels and ClickRecord
CORRELATED = 0
UNCORRELATED = 1
DARK = 2

# detector ids
SSPD = 0
APD1 = 1
APD2 = 2

# count laws
LAW_NEGBIN = 0
LAW_POISSON = 1

# layout of the int64 counter vector returned by a block
C_HERALDS = 0          # 3 slots, by origin
C_S1 = 3               # 3 slots
C_S2 = 6               # 3 slots
C_SSPD_BLOCKED = 9     # SSPD fires lost to dead time
C_APD1_GATES = 10      # gates opened while APD1 was live
C_APD2_GATES = 11
C_APD1_CLICKS = 12
C_APD2_CLICKS = 13
C_OVERFLOW = 14        # photons beyond per-pulse storage, or pulses outside the cache span
N_COUNTERS = 15


class KernelParams(NamedTuple):
    period_ps: float
    law: int               # LAW_NEGBIN (thermal) or LAW_POISSON
    mu: float              # correlated mode mean per pulse
    noise_modes: int       # uncorrelated idler modes per pulse
    noise_mu: float        # mean per uncorrelated mode
    eta_herald: float      # signal photon -> SSPD click probability
    sspd_dark_per_pulse: float
    sspd_sigma_ps: float
    sspd_dead_ps: float
    t_idler: float         # idler photon reaches the beam splitter
    apd1_eff: float
    apd1_sigma_ps: float
    apd1_dead_ps: float
    apd1_dark_gate: float
    apd2_eff: float
    apd2_sigma_ps: float
    apd2_dead_ps: float
    apd2_dark_gate: float
    tac1_window_ps: float
    tac1_delay_ps: float
    tac2_window_ps: float
    tac2_delay_ps: float
    apd2_trigger_jitter: bool
    cache_size: int        # power of two, pulses retained for window lookups
    sigma_cut: float       # jitter tails beyond this many sigma are not searched
