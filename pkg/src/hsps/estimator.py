"""Counts to figures of merit: dead-time correction, P1, g2(0), <n>, and 1-sigma errors."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from . import model
from .model import DomainError, FiguresOfMerit, ModeStructure

#: S2/S1 above this is flagged: the g2 estimator assumes S2 << S1.
S2_S1_WARN = 0.05


class EstimatorWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EstimationConfig:
    eta_1: float
    eta_2: float
    eta_d: float
    f: float
    gamma: float
    t_h: float
    dead_time_sspd_s: float = 0.0
    dead_time_apd1_s: float = 0.0
    dead_time_apd2_s: float = 0.0

    def __post_init__(self):
        for name in ("eta_1", "eta_2", "eta_d"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {value!r}")
        if not self.f > 0:
            raise DomainError("f must be > 0")

    @classmethod
    def from_scenario(cls, scenario) -> "EstimationConfig":
        src = scenario.source
        return cls(
            eta_1=scenario.apd1.efficiency,
            eta_2=scenario.apd2.efficiency,
            eta_d=scenario.sspd.efficiency,
            f=src.rep_rate_hz,
            gamma=src.gamma,
            t_h=src.signal_transmission,
            dead_time_sspd_s=scenario.sspd.dead_time_s,
            dead_time_apd1_s=scenario.apd1.dead_time_s,
            dead_time_apd2_s=scenario.apd2.dead_time_s,
        )


def corrected_rates(r_h, s1_measured, s2_measured, cfg: EstimationConfig):
    """Dead-time-corrected ``(S1, S2)``.

    APD2 is only gated by APD1 clicks, so the coincidence channel is blind
    whenever APD1 is dead: S2 is divided by APD1's live fraction, and by
    APD2's own live fraction for the part of its dead time that outlasts
    APD1's.
    """
    s1 = model.dead_time_correct(s1_measured, cfg.dead_time_apd1_s)
    live1 = model.live_fraction(s1_measured, cfg.dead_time_apd1_s)
    excess = max(cfg.dead_time_apd2_s - cfg.dead_time_apd1_s, 0.0)
    live2 = model.live_fraction(s2_measured / live1, excess)
    return s1, s2_measured / (live1 * live2)


def _figures(heralds, n1, n2, duration, cfg):
    r_h = heralds / duration
    s1, s2 = corrected_rates(r_h, n1 / duration, n2 / duration, cfg)
    out = {"r_h_hz": r_h, "s1_hz": s1, "s2_hz": s2}
    r_h_true = model.dead_time_correct(r_h, cfg.dead_time_sspd_s)
    out["n_mean"] = model.invert_heralding_rate(r_h_true, cfg.f, cfg.gamma, cfg.t_h, cfg.eta_d)
    if r_h > 0:
        out["p1"] = model.heralding_efficiency(s1, r_h, cfg.eta_1)
    if s1 > 0:
        out["g2"] = model.autocorrelation(r_h, s1, s2, cfg.eta_1, cfg.eta_2)
    return out


def estimate(totals, cfg: EstimationConfig) -> FiguresOfMerit:
    """Figures of merit from raw counts.

    Counts are treated as independent Poisson variables (variance
    ``max(N, 1)``, so a zero count still carries a one-count error) and
    propagated to first order.
    """
    duration = totals.duration_s
    if not duration > 0:
        raise DomainError("duration must be > 0")
    counts = [float(totals.heralds), float(totals.s1_counts), float(totals.s2_counts)]
    fig = FiguresOfMerit()
    try:
        central = _figures(*counts, duration, cfg)
    except model.SaturationError as exc:
        fig.undefined.update(dict.fromkeys(("s1_hz", "s2_hz", "p1", "g2"), f"saturated: {exc}"))
        central = {"r_h_hz": counts[0] / duration}
        central["n_mean"] = model.invert_heralding_rate(
            model.dead_time_correct(central["r_h_hz"], cfg.dead_time_sspd_s), cfg.f, cfg.gamma, cfg.t_h, cfg.eta_d)
    if "p1" not in central and "p1" not in fig.undefined:
        fig.undefined["p1"] = "no heralds recorded"
    if "g2" not in central and "g2" not in fig.undefined:
        fig.undefined["g2"] = "no APD1 clicks recorded"

    variances = [max(c, 1.0) for c in counts]
    errors = dict.fromkeys(central, 0.0)
    for i, var in enumerate(variances):
        h = 1e-6 * max(counts[i], 1.0)
        up, down = list(counts), list(counts)
        up[i] += h
        down[i] = max(down[i] - h, 0.0)
        try:
            f_up = _figures(*up, duration, cfg)
            f_down = _figures(*down, duration, cfg)
        except model.SaturationError:
            continue
        for key in central:
            if key in f_up and key in f_down:
                deriv = (f_up[key] - f_down[key]) / (up[i] - down[i])
                errors[key] += deriv * deriv * var

    for key, value in central.items():
        setattr(fig, key, value)
        setattr(fig, key.replace("_hz", "") + "_err" if key.endswith("_hz") else key + "_err",
                math.sqrt(errors[key]))

    if counts[1] > 0 and counts[2] / counts[1] > S2_S1_WARN:
        msg = f"S2/S1 = {counts[2] / counts[1]:.3f} > {S2_S1_WARN}; g2 estimate outside its validity regime"
        fig.warnings.append(msg)
        warnings.warn(msg, EstimatorWarning, stacklevel=2)
    return fig


def theory_overlay(figures: FiguresOfMerit, modes: ModeStructure | None = None,
                   statistics=model.THERMAL):
    """Single-mode g2 at the inferred <n>, and the measured-minus-theory residual.

    Returns ``(theory, residual, residual_err)``; the error combines the g2
    error with the theory's sensitivity to the <n> error. ``modes`` is only
    consulted when ``figures.n_mean`` is absent.
    """
    mu = figures.n_mean if figures.n_mean is not None else (modes.mu_per_mode if modes else None)
    if mu is None or not math.isfinite(mu):
        raise DomainError("figures.n_mean must be finite")
    theory = model.single_mode_g2_theory(mu, statistics)
    if figures.g2 is None:
        return theory, None, None
    residual = figures.g2 - theory
    dmu = max(1e-9, 1e-6 * mu)
    slope = (model.single_mode_g2_theory(mu + dmu, statistics)
             - model.single_mode_g2_theory(max(mu - dmu, 0.0), statistics)) / (mu + dmu - max(mu - dmu, 0.0))
    err = math.hypot(figures.g2_err or 0.0, slope * (figures.n_mean_err or 0.0))
    return theory, residual, err
