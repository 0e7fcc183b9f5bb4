"""Scenario files: sectioned INI with units in the key names.

Missing keys take the calibrated defaults. ``mu_per_mode = auto`` makes the
per-mode mean follow the pump chain, ``n_spectral``/``n_temporal = auto``
derive the mode counts from the filter bandwidths and the APD2 window.
Duration values accept ``ns``, ``us``, ``ms`` and ``s`` suffixes; a bare
number is read in the unit named by the key.
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import replace
from importlib import resources

from . import model
from .model import DetectorModel, DomainError, ModeStructure, SourceConfig
from .scenario import apply_point
from .simkernel.engine import ScenarioError, SimScenario

SECTIONS = ("laser", "shg", "spdc", "filters", "losses", "sspd", "apd1", "apd2", "tac", "modes", "run")
# divisors rather than factors: 10 / 1e6 is exactly 1e-05, 10 * 1e-6 is not
_PER_SECOND = {"ns": 1e9, "us": 1e6, "µs": 1e6, "ms": 1e3, "s": 1.0}
_DURATION = re.compile(r"^\s*([-+0-9.eE]+)\s*(ns|us|µs|ms|s)?\s*$")

# recognised keys per section
_KNOWN = {
    "laser": ("rep_rate_ghz", "power_mw"),
    "shg": ("efficiency", "exponent"),
    "spdc": ("brightness_pairs_per_mw_s_ghz", "statistics"),
    "filters": ("heralding_bw_ghz", "heralded_bw_ghz"),
    "losses": ("gamma", "signal_loss_db", "idler_loss_db", "signal_excess_loss_db", "idler_excess_loss_db"),
    "sspd": ("efficiency", "dark_rate_hz", "jitter_fwhm_ps", "dead_time_ns"),
    "apd1": ("efficiency", "dark_prob_per_gate", "jitter_fwhm_ps", "dead_time_us"),
    "apd2": ("efficiency", "dark_prob_per_gate", "jitter_fwhm_ps", "dead_time_us"),
    "tac": ("apd1_window_ps", "apd2_window_ps", "apd1_delay_ps", "apd2_delay_ps", "apd2_trigger_jitter"),
    "modes": ("n_spectral", "n_temporal", "mu_per_mode", "noise_brightness"),
    "run": ("duration_ms", "seed", "block_size_pulses"),
}


class ConfigError(ValueError):
    """Unreadable or invalid scenario file; the message names the section and key."""


def parse_duration(text: str, unit: str) -> float:
    """Seconds for ``text``; ``unit`` applies when no suffix is given."""
    m = _DURATION.match(str(text))
    if not m:
        raise ValueError(f"not a duration: {text!r}")
    value = float(m.group(1))
    return value / _PER_SECOND[m.group(2) or unit]


def _unit_of(key):
    return key.rsplit("_", 1)[1]


class _Reader:
    def __init__(self, parser):
        self.p = parser

    def _raw(self, section, key):
        if self.p.has_option(section, key):
            return self.p.get(section, key).strip()
        return None

    def number(self, section, key, default):
        raw = self._raw(section, key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None

    def duration(self, section, key, default_s):
        raw = self._raw(section, key)
        if raw is None:
            return default_s
        try:
            return parse_duration(raw, _unit_of(key))
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected a duration such as 10us, got {raw!r}") from None

    def auto(self, section, key, default=None, cast=float):
        raw = self._raw(section, key)
        if raw is None or raw.lower() == "auto":
            return default
        try:
            return cast(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected a number or 'auto', got {raw!r}") from None

    def integer(self, section, key, default):
        raw = self._raw(section, key)
        if raw is None:
            return default
        try:
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None

    def flag(self, section, key, default):
        if self._raw(section, key) is None:
            return default
        try:
            return self.p.getboolean(section, key)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None

    def text(self, section, key, default):
        raw = self._raw(section, key)
        return default if raw is None else raw


def _parser():
    return configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))


def _check_known(parser):
    for section in parser.sections():
        if section not in _KNOWN:
            raise ConfigError(f"unknown section [{section}]; expected one of {', '.join(SECTIONS)}")
        for key in parser.options(section):
            if key not in _KNOWN[section]:
                raise ConfigError(f"[{section}] unknown key {key!r}; expected one of {', '.join(_KNOWN[section])}")


def loads(text: str, source_name: str = "<string>") -> SimScenario:
    parser = _parser()
    try:
        parser.read_string(text, source=source_name)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    _check_known(parser)
    return _build(_Reader(parser))


def load(path) -> SimScenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text, str(path))


def default_text() -> str:
    return resources.files("hsps").joinpath("data/default.ini").read_text(encoding="utf-8")


def _build(r: _Reader) -> SimScenario:
    d_src = SourceConfig()
    d_sspd = model.default_sspd()
    d_apd = model.default_apd(0.0)
    d_sc = SimScenario()
    try:
        source = SourceConfig(
            rep_rate_hz=r.number("laser", "rep_rate_ghz", d_src.rep_rate_hz / 1e9) * 1e9,
            laser_power_mw=r.number("laser", "power_mw", d_src.laser_power_mw),
            shg_efficiency=r.number("shg", "efficiency", d_src.shg_efficiency),
            shg_exponent=r.number("shg", "exponent", d_src.shg_exponent),
            brightness=r.number("spdc", "brightness_pairs_per_mw_s_ghz", d_src.brightness),
            statistics=r.text("spdc", "statistics", d_src.statistics),
            heralding_bw_ghz=r.number("filters", "heralding_bw_ghz", d_src.heralding_bw_ghz),
            heralded_bw_ghz=r.number("filters", "heralded_bw_ghz", d_src.heralded_bw_ghz),
            gamma=r.number("losses", "gamma", d_src.gamma),
            signal_loss_db=r.number("losses", "signal_loss_db", d_src.signal_loss_db),
            idler_loss_db=r.number("losses", "idler_loss_db", d_src.idler_loss_db),
            signal_excess_loss_db=r.number("losses", "signal_excess_loss_db", d_src.signal_excess_loss_db),
            idler_excess_loss_db=r.number("losses", "idler_excess_loss_db", d_src.idler_excess_loss_db),
        )
    except DomainError as exc:
        raise ConfigError(f"source settings: {exc}") from None
    try:
        sspd = DetectorModel(
            efficiency=r.number("sspd", "efficiency", d_sspd.efficiency),
            dark_rate_hz=r.number("sspd", "dark_rate_hz", d_sspd.dark_rate_hz),
            jitter_fwhm_ps=r.number("sspd", "jitter_fwhm_ps", d_sspd.jitter_fwhm_ps),
            dead_time_s=r.duration("sspd", "dead_time_ns", d_sspd.dead_time_s),
            mode=model.FREE_RUNNING,
        )
    except DomainError as exc:
        raise ConfigError(f"[sspd] {exc}") from None
    w1 = r.number("tac", "apd1_window_ps", d_sc.tac1_window_ps)
    w2 = r.number("tac", "apd2_window_ps", d_sc.tac2_window_ps)
    apds = []
    for name, window in (("apd1", w1), ("apd2", w2)):
        try:
            apds.append(DetectorModel(
                efficiency=r.number(name, "efficiency", d_apd.efficiency),
                dark_prob_per_gate=r.number(name, "dark_prob_per_gate", d_apd.dark_prob_per_gate),
                jitter_fwhm_ps=r.number(name, "jitter_fwhm_ps", d_apd.jitter_fwhm_ps),
                dead_time_s=r.duration(name, "dead_time_us", d_apd.dead_time_s),
                mode=model.TRIGGERED,
                gate_window_ps=window,
            ))
        except DomainError as exc:
            raise ConfigError(f"[{name}] {exc}") from None
    try:
        n_f, n_t = model.mode_counts(source.heralded_bw_ghz, source.heralding_bw_ghz,
                                     w2, source.pulse_period_ps)
        modes = ModeStructure(
            n_spectral=r.auto("modes", "n_spectral", n_f, int),
            n_temporal=r.auto("modes", "n_temporal", n_t, int),
            mu_per_mode=r.auto("modes", "mu_per_mode", source.n_mean),
            noise_brightness=r.number("modes", "noise_brightness", 0.0),
        )
        scenario = SimScenario(
            source=source, sspd=sspd, apd1=apds[0], apd2=apds[1], modes=modes,
            tac1_window_ps=w1, tac2_window_ps=w2,
            tac1_delay_ps=r.auto("tac", "apd1_delay_ps"),
            tac2_delay_ps=r.auto("tac", "apd2_delay_ps"),
            apd2_trigger_jitter=r.flag("tac", "apd2_trigger_jitter", True),
            duration_s=r.duration("run", "duration_ms", d_sc.duration_s),
            seed=r.integer("run", "seed", d_sc.seed),
            block_size_pulses=r.integer("run", "block_size_pulses", d_sc.block_size_pulses),
        )
        scenario.validate()
    except (DomainError, ScenarioError) as exc:
        raise ConfigError(str(exc)) from None
    return scenario


def to_parser(sc: SimScenario) -> configparser.ConfigParser:
    """Fully resolved snapshot; parsing it back gives an equal scenario."""
    src = sc.source

    def num(x):
        return repr(float(x))

    def opt(x):
        return "auto" if x is None else num(x)

    p = _parser()
    p["laser"] = {"rep_rate_ghz": num(src.rep_rate_hz / 1e9), "power_mw": num(src.laser_power_mw)}
    p["shg"] = {"efficiency": num(src.shg_efficiency), "exponent": num(src.shg_exponent)}
    p["spdc"] = {"brightness_pairs_per_mw_s_ghz": num(src.brightness), "statistics": src.statistics}
    p["filters"] = {"heralding_bw_ghz": num(src.heralding_bw_ghz), "heralded_bw_ghz": num(src.heralded_bw_ghz)}
    p["losses"] = {
        "gamma": num(src.gamma), "signal_loss_db": num(src.signal_loss_db),
        "idler_loss_db": num(src.idler_loss_db), "signal_excess_loss_db": num(src.signal_excess_loss_db),
        "idler_excess_loss_db": num(src.idler_excess_loss_db),
    }
    p["sspd"] = {
        "efficiency": num(sc.sspd.efficiency), "dark_rate_hz": num(sc.sspd.dark_rate_hz),
        "jitter_fwhm_ps": num(sc.sspd.jitter_fwhm_ps), "dead_time_ns": f"{sc.sspd.dead_time_s!r}s",
    }
    for name in ("apd1", "apd2"):
        det = getattr(sc, name)
        p[name] = {
            "efficiency": num(det.efficiency), "dark_prob_per_gate": num(det.dark_prob_per_gate),
            "jitter_fwhm_ps": num(det.jitter_fwhm_ps), "dead_time_us": f"{det.dead_time_s!r}s",
        }
    p["tac"] = {
        "apd1_window_ps": num(sc.tac1_window_ps), "apd2_window_ps": num(sc.tac2_window_ps),
        "apd1_delay_ps": opt(sc.tac1_delay_ps), "apd2_delay_ps": opt(sc.tac2_delay_ps),
        "apd2_trigger_jitter": "yes" if sc.apd2_trigger_jitter else "no",
    }
    p["modes"] = {
        "n_spectral": str(sc.modes.n_spectral), "n_temporal": str(sc.modes.n_temporal),
        "mu_per_mode": num(sc.modes.mu_per_mode), "noise_brightness": num(sc.modes.noise_brightness),
    }
    p["run"] = {"duration_ms": f"{sc.duration_s!r}s", "seed": str(int(sc.seed)),
                "block_size_pulses": str(int(sc.block_size_pulses))}
    return p


def dumps(sc: SimScenario) -> str:
    buf = io.StringIO()
    to_parser(sc).write(buf)
    return buf.getvalue()


def snapshot(sc: SimScenario) -> dict:
    p = to_parser(sc)
    return {s: dict(p[s]) for s in p.sections()}


def with_overrides(sc: SimScenario, n_mean=None, eta_d=None, gamma=None, duration_s=None, seed=None):
    """Apply command-line overrides; ``n_mean`` also moves the laser power to match."""
    if gamma is not None:
        sc = replace(sc, source=replace(sc.source, gamma=gamma))
    if eta_d is not None:
        sc = replace(sc, sspd=replace(sc.sspd, efficiency=eta_d))
    if n_mean is not None:
        sc = apply_point(sc, "n_mean", n_mean)
    if duration_s is not None:
        sc = replace(sc, duration_s=duration_s)
    if seed is not None:
        sc = replace(sc, seed=seed)
    return sc
