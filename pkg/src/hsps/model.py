"""Domain types and closed-form relations for a pulsed heralded single-photon source.

Everything here is a pure function of its arguments. Rates are in Hz, times in
seconds unless a suffix says otherwise (``_ps``), losses in power dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

THERMAL = "thermal"
POISSONIAN = "poissonian"
STATISTICS = (THERMAL, POISSONIAN)

FREE_RUNNING = "free_running"
TRIGGERED = "triggered"

#: FWHM of a Gaussian divided by its standard deviation.
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


class DomainError(ValueError):
    """An argument lies outside the domain of a formula."""


class SaturationError(DomainError):
    """A measured rate is at or beyond the dead-time saturation limit."""


def _check_fraction(name, value):
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")


def _check_nonneg(name, value):
    if not math.isfinite(value) or value < 0.0:
        raise DomainError(f"{name} must be finite and >= 0, got {value!r}")


def _check_statistics(statistics):
    if statistics not in STATISTICS:
        raise DomainError(f"statistics must be one of {STATISTICS}, got {statistics!r}")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceConfig:
    """Component-level parameters of the source, from laser to fiber outputs.

    The two ``*_excess_loss_db`` fields are calibration offsets added to the
    quoted insertion losses. The defaults make the closed-form predictions land on the
    measured operating point (2.1 MHz heralds at 0.005 pairs per pulse, 42%
    heralding efficiency). The idler offset is negative: the measured heralding
    efficiency implies less loss than quoted.
    """

    rep_rate_hz: float = 10e9
    laser_power_mw: float = 40.0
    shg_efficiency: float = 0.20
    shg_exponent: float = 1.0
    brightness: float = 2.5e5  # pairs / mW / s / GHz
    heralding_bw_ghz: float = 25.0
    heralded_bw_ghz: float = 200.0
    gamma: float = 0.60
    signal_loss_db: float = 2.5
    idler_loss_db: float = 1.9
    signal_excess_loss_db: float = 1.3534
    idler_excess_loss_db: float = -0.3510
    statistics: str = THERMAL

    def __post_init__(self):
        if not self.rep_rate_hz > 0:
            raise DomainError(f"rep_rate_hz must be > 0, got {self.rep_rate_hz!r}")
        for name in ("laser_power_mw", "brightness", "heralding_bw_ghz", "heralded_bw_ghz",
                     "signal_loss_db", "idler_loss_db", "signal_excess_loss_db"):
            _check_nonneg(name, getattr(self, name))
        _check_fraction("shg_efficiency", self.shg_efficiency)
        _check_fraction("gamma", self.gamma)
        if not self.shg_exponent > 0:
            raise DomainError("shg_exponent must be > 0")
        if not math.isfinite(self.idler_excess_loss_db):
            raise DomainError("idler_excess_loss_db must be finite")
        if self.idler_loss_db + self.idler_excess_loss_db < 0:
            raise DomainError("total idler loss must be >= 0 dB")
        _check_statistics(self.statistics)

    @property
    def pulse_period_ps(self) -> float:
        return 1e12 / self.rep_rate_hz

    @property
    def signal_transmission(self) -> float:
        """Collection fiber to heralding detector, calibrated (T_H)."""
        return db_to_transmission(self.signal_loss_db + self.signal_excess_loss_db)

    @property
    def idler_transmission(self) -> float:
        """Collection fiber to the beam splitter of the HBT setup, calibrated (T)."""
        return db_to_transmission(self.idler_loss_db + self.idler_excess_loss_db)

    @property
    def spdc_pump_mw(self) -> float:
        return shg_pump(self.laser_power_mw, self.shg_efficiency, self.shg_exponent)

    @property
    def n_mean(self) -> float:
        """Mean pairs per pulse in the heralding bandwidth implied by the pump chain."""
        return mean_pairs_from_pump(self.spdc_pump_mw, self.brightness,
                                    self.heralding_bw_ghz, self.rep_rate_hz)


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector.

    Free-running detectors draw darks from ``dark_rate_hz``; triggered ones
    from ``dark_prob_per_gate`` once per gate of ``gate_window_ps``.
    """

    efficiency: float
    dark_rate_hz: float = 0.0
    dark_prob_per_gate: float = 0.0
    jitter_fwhm_ps: float = 0.0
    dead_time_s: float = 0.0
    mode: str = FREE_RUNNING
    gate_window_ps: float = 0.0

    def __post_init__(self):
        _check_fraction("efficiency", self.efficiency)
        _check_fraction("dark_prob_per_gate", self.dark_prob_per_gate)
        for name in ("dark_rate_hz", "jitter_fwhm_ps", "dead_time_s", "gate_window_ps"):
            _check_nonneg(name, getattr(self, name))
        if self.mode not in (FREE_RUNNING, TRIGGERED):
            raise DomainError(f"unknown detector mode {self.mode!r}")
        if self.mode == FREE_RUNNING and self.dark_prob_per_gate:
            raise DomainError("free-running detectors use dark_rate_hz, not dark_prob_per_gate")
        if self.mode == TRIGGERED and self.dark_rate_hz:
            raise DomainError("triggered detectors use dark_prob_per_gate, not dark_rate_hz")

    @property
    def jitter_sigma_ps(self) -> float:
        return self.jitter_fwhm_ps / FWHM_PER_SIGMA


def default_sspd() -> DetectorModel:
    # dead time is not quoted; 1 ns keeps it negligible at 2.1 MHz
    return DetectorModel(efficiency=0.17, dark_rate_hz=100.0, jitter_fwhm_ps=57.0,
                         dead_time_s=1e-9, mode=FREE_RUNNING)


def default_apd(window_ps: float) -> DetectorModel:
    # per-gate dark probability is not quoted; 1e-5 is a placeholder default
    return DetectorModel(efficiency=0.25, dark_prob_per_gate=1e-5, jitter_fwhm_ps=120.0,
                         dead_time_s=10e-6, mode=TRIGGERED, gate_window_ps=window_ps)


@dataclass(frozen=True)
class ModeStructure:
    """Mode bookkeeping for the heralded arm.

    ``mu_per_mode`` is the mean pair number per pulse of every mode and equals
    the heralding-band mean: exactly one spectral mode per pulse is correlated
    with the heralding filter. ``noise_brightness`` scales the mean of the
    ``n_spectral - 1`` uncorrelated idler-band modes relative to ``mu_per_mode``.
    """

    n_spectral: int = 8
    n_temporal: int = 4
    mu_per_mode: float = 0.005
    noise_brightness: float = 0.0

    def __post_init__(self):
        for name in ("n_spectral", "n_temporal"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise DomainError(f"{name} must be an integer >= 1, got {value!r}")
        _check_nonneg("mu_per_mode", self.mu_per_mode)
        _check_nonneg("noise_brightness", self.noise_brightness)

    @property
    def noise_mu(self) -> float:
        return self.mu_per_mode * self.noise_brightness


@dataclass
class FiguresOfMerit:
    """Derived figures with 1-sigma statistical uncertainties.

    A figure that cannot be computed (a needed count is zero) is ``None`` and
    its reason is stored in ``undefined``.
    """

    r_h_hz: float | None = None
    r_h_err: float | None = None
    s1_hz: float | None = None
    s1_err: float | None = None
    s2_hz: float | None = None
    s2_err: float | None = None
    p1: float | None = None
    p1_err: float | None = None
    g2: float | None = None
    g2_err: float | None = None
    n_mean: float | None = None
    n_mean_err: float | None = None
    undefined: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def db_to_transmission(loss_db: float) -> float:
    """Power transmission for an insertion loss in dB."""
    _check_nonneg("loss_db", loss_db)
    return 10.0 ** (-loss_db / 10.0)


def transmission_to_db(transmission: float) -> float:
    if not 0.0 < transmission <= 1.0:
        raise DomainError(f"transmission must lie in (0, 1], got {transmission!r}")
    return -10.0 * math.log10(transmission)


def mean_pairs_from_pump(spdc_pump_mw, brightness, bandwidth_ghz, rep_rate_hz):
    """Mean pairs per pump pulse inside ``bandwidth_ghz``."""
    if not rep_rate_hz > 0:
        raise DomainError("rep_rate_hz must be > 0")
    for name, value in (("spdc_pump_mw", spdc_pump_mw), ("brightness", brightness),
                        ("bandwidth_ghz", bandwidth_ghz)):
        _check_nonneg(name, value)
    return brightness * spdc_pump_mw * bandwidth_ghz / rep_rate_hz


def shg_pump(laser_power_mw, shg_efficiency, exponent=1.0):
    """SPDC pump power after frequency doubling.

    Fixed-efficiency model; ``exponent`` other than 1 gives
    ``efficiency * P**exponent`` with P in mW.
    """
    _check_nonneg("laser_power_mw", laser_power_mw)
    _check_fraction("shg_efficiency", shg_efficiency)
    return shg_efficiency * laser_power_mw ** exponent


def heralding_rate(f, n_mean, gamma, t_h, eta_d):
    """Detected heralding rate ``f * <n> * gamma * T_H * eta_D``."""
    if not f > 0:
        raise DomainError("f must be > 0")
    _check_nonneg("n_mean", n_mean)
    for name, value in (("gamma", gamma), ("t_h", t_h), ("eta_d", eta_d)):
        _check_fraction(name, value)
    return f * n_mean * gamma * t_h * eta_d


def invert_heralding_rate(r_h_hz, f, gamma, t_h, eta_d):
    """Mean pairs per pulse that produce the heralding rate ``r_h_hz``."""
    denom = f * gamma * t_h * eta_d
    if not denom > 0:
        raise DomainError("f * gamma * t_h * eta_d must be > 0")
    _check_nonneg("r_h_hz", r_h_hz)
    return r_h_hz / denom


def heralding_efficiency(s1_hz, r_h_hz, eta_1):
    """P1 = 2 S1 / (R_H eta_1); the factor 2 undoes the 50/50 beam splitter."""
    if not (r_h_hz > 0 and eta_1 > 0):
        raise DomainError("r_h_hz and eta_1 must be > 0")
    return 2.0 * s1_hz / (r_h_hz * eta_1)


def autocorrelation(r_h_hz, s1_hz, s2_hz, eta_1, eta_2):
    """Heralded g2(0) = R_H S2 eta_1 / (S1^2 eta_2), valid for S2 << S1."""
    if not (s1_hz > 0 and eta_2 > 0):
        raise DomainError("s1_hz and eta_2 must be > 0")
    return r_h_hz * s2_hz * eta_1 / (s1_hz * s1_hz * eta_2)


def dead_time_correct(measured_rate_hz, dead_time_s):
    """True rate behind a non-paralyzable detector's measured rate."""
    _check_nonneg("measured_rate_hz", measured_rate_hz)
    _check_nonneg("dead_time_s", dead_time_s)
    load = measured_rate_hz * dead_time_s
    if load >= 1.0:
        raise SaturationError(
            f"measured rate {measured_rate_hz:g} Hz saturates dead time {dead_time_s:g} s")
    return measured_rate_hz / (1.0 - load)


def dead_time_apply(true_rate_hz, dead_time_s):
    """Measured rate of a non-paralyzable detector driven at ``true_rate_hz``."""
    _check_nonneg("true_rate_hz", true_rate_hz)
    _check_nonneg("dead_time_s", dead_time_s)
    return true_rate_hz / (1.0 + true_rate_hz * dead_time_s)


def live_fraction(measured_rate_hz, dead_time_s):
    """Fraction of time a non-paralyzable detector is able to click."""
    _check_nonneg("measured_rate_hz", measured_rate_hz)
    _check_nonneg("dead_time_s", dead_time_s)
    load = measured_rate_hz * dead_time_s
    if load >= 1.0:
        raise SaturationError(
            f"measured rate {measured_rate_hz:g} Hz saturates dead time {dead_time_s:g} s")
    return 1.0 - load


def mode_counts(heralded_bw_ghz, heralding_bw_ghz, window_ps, pulse_period_ps):
    """Spurious spectral and temporal mode counts ``(n_f, n_t)``."""
    for name, value in (("heralded_bw_ghz", heralded_bw_ghz), ("heralding_bw_ghz", heralding_bw_ghz),
                        ("window_ps", window_ps), ("pulse_period_ps", pulse_period_ps)):
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be > 0, got {value!r}")
    n_f = max(1, round(heralded_bw_ghz / heralding_bw_ghz))
    n_t = max(1, round(window_ps / pulse_period_ps))
    return n_f, n_t


def multimode_heralding_limit(n_f, n_t, multi_photon_cap=0.1):
    """Largest heralding-band mean that keeps the heralded-arm mean under the cap."""
    if n_f < 1 or n_t < 1:
        raise DomainError("n_f and n_t must be >= 1")
    if not 0.0 < multi_photon_cap < 1.0:
        raise DomainError("multi_photon_cap must lie in (0, 1)")
    return multi_photon_cap / (n_f * n_t)


def pair_number_pmf(mu, statistics, n_max):
    """Single-mode pair-number probabilities P(0..n_max)."""
    _check_statistics(statistics)
    probs = [0.0] * (n_max + 1)
    if statistics == THERMAL:
        ratio = mu / (1.0 + mu)
        p = 1.0 / (1.0 + mu)
        for n in range(n_max + 1):
            probs[n] = p
            p *= ratio
    else:
        p = math.exp(-mu)
        for n in range(n_max + 1):
            probs[n] = p
            p *= mu / (n + 1)
    return probs


def _size_biased_g2(mu, statistics, n_max):
    probs = pair_number_pmf(mu, statistics, n_max)
    first = math.fsum(n * n * p for n, p in enumerate(probs))            # sum n * (n P(n))
    second = math.fsum(n * n * (n - 1) * p for n, p in enumerate(probs))  # sum n(n-1) * (n P(n))
    return second * (sum(n * p for n, p in enumerate(probs))) / (first * first)


def single_mode_g2_theory(mu, statistics=THERMAL, n_max=40):
    """Heralded g2(0) of one mode under a weak, lossless herald.

    The herald size-biases the pair-number law, Q(n) ~ n P(n), and
    g2 = sum n(n-1) Q / (sum n Q)^2. The sum is enumerated up to ``n_max`` and
    extended in steps of 5 until another step moves the result by < 1e-12.
    """
    _check_statistics(statistics)
    if not math.isfinite(mu) or mu < 0:
        raise DomainError(f"mu must be finite and >= 0, got {mu!r}")
    if mu == 0:
        return 0.0
    g2 = _size_biased_g2(mu, statistics, n_max)
    while True:
        n_max += 5
        nxt = _size_biased_g2(mu, statistics, n_max)
        if abs(nxt - g2) <= 1e-12 * abs(nxt) or n_max > 100_000:
            return nxt
        g2 = nxt
