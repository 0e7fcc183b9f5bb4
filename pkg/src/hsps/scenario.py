"""Experiment campaigns: pump-power sweeps, detector-upgrade projections, comparison tables."""

from __future__ import annotations

import csv
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from . import model
from .estimator import EstimationConfig, estimate
from .model import DetectorModel, DomainError, FiguresOfMerit, ModeStructure, SourceConfig
from .simkernel import engine
from .simkernel.engine import SimScenario

SWEEP_VARIABLES = ("laser_power_mw", "n_mean")
TABLE_COLUMNS = ("", "P1", "eta_D", "R_H", "<n>", "g2(0)")
FOOTNOTES = {
    "a": "theoretically calculated",
    "b": "estimated from reported data and P1",
    "c": "expected values",
}


def synced(scenario: SimScenario) -> SimScenario:
    """Copy of ``scenario`` whose per-mode mean follows the pump chain."""
    return replace(scenario, modes=replace(scenario.modes, mu_per_mode=scenario.source.n_mean))


def reference_scenario(duration_s: float = 10e-3, seed: int = 1, **source_overrides) -> SimScenario:
    """Calibrated operating point: 2.1 MHz heralds at 0.005 pairs per pulse."""
    return synced(SimScenario(source=SourceConfig(**source_overrides), duration_s=duration_s, seed=seed))


def single_mode_scenario(mu: float, duration_s: float = 10e-3, seed: int = 1,
                         statistics: str = model.THERMAL, eta_d: float = 0.02) -> SimScenario:
    """One spectral and one temporal mode seen by ideal detectors.

    No darks, jitter or dead time; 100 ps windows hold a single pulse slot.
    A weak herald (``eta_d``) keeps the heralded law close to the size-biased
    one the single-mode theory assumes; the idler arm is lossless so the
    coincidence channel collects as much statistics as possible.
    """
    source = SourceConfig(gamma=1.0, signal_loss_db=0.0, signal_excess_loss_db=0.0,
                          idler_loss_db=0.0, idler_excess_loss_db=0.0, statistics=statistics)
    sspd = DetectorModel(efficiency=eta_d)
    apd1 = DetectorModel(efficiency=1.0, mode=model.TRIGGERED, gate_window_ps=100.0)
    apd2 = DetectorModel(efficiency=1.0, mode=model.TRIGGERED, gate_window_ps=100.0)
    modes = ModeStructure(n_spectral=1, n_temporal=1, mu_per_mode=mu)
    return SimScenario(source=source, sspd=sspd, apd1=apd1, apd2=apd2, modes=modes,
                       tac1_window_ps=100.0, tac2_window_ps=100.0,
                       duration_s=duration_s, seed=seed, apd2_trigger_jitter=False)


def laser_power_for_mu(source: SourceConfig, mu: float) -> float:
    """Laser power that puts ``mu`` pairs per pulse in the heralding band."""
    spdc = mu * source.rep_rate_hz / (source.brightness * source.heralding_bw_ghz)
    return (spdc / source.shg_efficiency) ** (1.0 / source.shg_exponent)


def mu_for_heralding_rate(scenario: SimScenario, r_h_hz: float) -> float:
    """Pairs per pulse giving ``r_h_hz`` measured heralds (SSPD dead time included)."""
    src = scenario.source
    true_rate = model.dead_time_correct(r_h_hz, scenario.sspd.dead_time_s)
    return model.invert_heralding_rate(true_rate, src.rep_rate_hz, src.gamma,
                                       src.signal_transmission, scenario.sspd.efficiency)


def apply_point(base: SimScenario, variable: str, value: float) -> SimScenario:
    if variable == "laser_power_mw":
        return synced(replace(base, source=replace(base.source, laser_power_mw=value)))
    if variable == "n_mean":
        source = replace(base.source, laser_power_mw=laser_power_for_mu(base.source, value))
        return replace(base, source=source, modes=replace(base.modes, mu_per_mode=value))
    raise DomainError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {variable!r}")


def default_grid(base: SimScenario, variable: str = "laser_power_mw", n_points: int = 8,
                 r_h_lo: float = 50e3, r_h_hi: float = 2.1e6) -> list[float]:
    """Log-spaced grid spanning the given heralding-rate equivalents."""
    rates = np.geomspace(r_h_lo, r_h_hi, n_points)
    mus = [mu_for_heralding_rate(base, r) for r in rates]
    if variable == "n_mean":
        return [float(m) for m in mus]
    if variable == "laser_power_mw":
        return [float(laser_power_for_mu(base.source, m)) for m in mus]
    raise DomainError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {variable!r}")


@dataclass(frozen=True)
class SweepSpec:
    base: SimScenario
    variable: str = "laser_power_mw"
    grid: tuple = ()
    duration_s: float = 10e-3
    seeds: tuple | None = None  # default: base seed + point index

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise DomainError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise DomainError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise DomainError("sweep grid must be strictly increasing")
        if self.seeds is not None and len(self.seeds) != len(grid):
            raise DomainError("one seed per grid point is required")
        object.__setattr__(self, "grid", grid)

    def seed_for(self, i: int) -> int:
        return int(self.seeds[i]) if self.seeds is not None else int(self.base.seed) + i

    def scenarios(self):
        return [replace(apply_point(self.base, self.variable, v), duration_s=self.duration_s,
                        seed=self.seed_for(i)) for i, v in enumerate(self.grid)]


@dataclass
class SweepRow:
    set_value: float
    figures: FiguresOfMerit | None = None
    g2_theory: float | None = None
    runtime_s: float = 0.0
    error: str | None = None
    totals: object = field(default=None, repr=False)


def run_point(scenario: SimScenario, set_value: float = math.nan, workers: int = 1) -> SweepRow:
    """Simulate and estimate one scenario; failures are captured in the row."""
    t0 = time.perf_counter()
    row = SweepRow(set_value=set_value)
    try:
        totals = engine.run(scenario, workers=workers)
        row.figures = estimate(totals, EstimationConfig.from_scenario(scenario))
        mu = row.figures.n_mean if row.figures.n_mean is not None else scenario.modes.mu_per_mode
        row.g2_theory = model.single_mode_g2_theory(mu, scenario.source.statistics)
        row.totals = totals
    except (DomainError, engine.ScenarioError, engine.SimulationInvariantError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    row.runtime_s = time.perf_counter() - t0
    return row


def _point_job(args):
    return run_point(*args)


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[SweepRow]:
    """One row per grid point, in grid order.

    Points are independent runs with their own seeds, so they may execute in
    any order on any number of processes without changing the rows.
    """
    jobs = [(sc, v) for sc, v in zip(spec.scenarios(), spec.grid)]
    workers = engine.resolve_workers(workers, len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_point_job, jobs))
    return [_point_job(job) for job in jobs]


def project_upgrade(base: FiguresOfMerit, old_eta_d: float, old_gamma: float,
                    new_eta_d: float, new_gamma: float) -> FiguresOfMerit:
    """Figures expected after swapping the heralding detector and the output coupling.

    The heralding rate is linear in both efficiencies and P1 in the coupling;
    g2 is carried over unchanged, which is a claim about the hardware rather
    than something derived here.
    """
    for name, value in (("old_eta_d", old_eta_d), ("old_gamma", old_gamma),
                        ("new_eta_d", new_eta_d), ("new_gamma", new_gamma)):
        if not 0.0 < value <= 1.0:
            raise DomainError(f"{name} must lie in (0, 1], got {value!r}")
    rate = (new_eta_d / old_eta_d) * (new_gamma / old_gamma)
    coupling = new_gamma / old_gamma
    out = replace(base, undefined=dict(base.undefined), warnings=list(base.warnings))
    if base.r_h_hz is not None:
        out.r_h_hz = base.r_h_hz * rate
        out.r_h_err = None if base.r_h_err is None else base.r_h_err * rate
    if base.s1_hz is not None:
        out.s1_hz = base.s1_hz * rate * coupling
    if base.p1 is not None:
        out.p1 = min(1.0, base.p1 * coupling)
        out.p1_err = None if base.p1_err is None else base.p1_err * coupling
    return out


# ---------------------------------------------------------------------------
# Comparison table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TableRow:
    """One line of the comparison table; cells are display strings, ``-`` when missing."""

    label: str
    p1: str = "-"
    eta_d: str = "-"
    r_h: str = "-"
    n_mean: str = "-"
    g2: str = "-"

    @property
    def cells(self):
        return (self.label, self.p1, self.eta_d, self.r_h, self.n_mean, self.g2)

    @property
    def footnotes(self) -> set:
        return {m for cell in self.cells for m in re.findall(r"\^([a-z])", cell)}


def format_rate(hz: float) -> str:
    for scale, unit in ((1e9, "GHz"), (1e6, "MHz"), (1e3, "kHz")):
        if abs(hz) >= scale:
            return f"{hz / scale:.3g} {unit}"
    return f"{hz:.3g} Hz"


def _fmt(value, digits=2):
    return "-" if value is None else f"{value:.{digits}g}"


def table_row(label: str, figures: FiguresOfMerit, eta_d: float | None = None) -> TableRow:
    return TableRow(
        label=label,
        p1=_fmt(figures.p1),
        eta_d=_fmt(eta_d),
        r_h="-" if figures.r_h_hz is None else format_rate(figures.r_h_hz),
        n_mean=_fmt(figures.n_mean, 1),
        g2=_fmt(figures.g2),
    )


def literature_rows() -> list[TableRow]:
    """Published results of other sources, cells kept verbatim with footnote tags."""
    text = resources.files("hsps").joinpath("data/literature.csv").read_text(encoding="utf-8")
    reader = csv.DictReader(text.splitlines())
    return [TableRow(**{k: (v or "-").strip() for k, v in row.items()}) for row in reader]


def comparison_table(rows) -> str:
    """Plain-text table, header first, with a footnote legend for tags in use."""
    rows = list(rows)
    lines = [TABLE_COLUMNS] + [r.cells for r in rows]
    widths = [max(len(line[i]) for line in lines) for i in range(len(TABLE_COLUMNS))]
    out = [" | ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in lines]
    out.insert(1, "-+-".join("-" * w for w in widths))
    tags = sorted(set().union(*(r.footnotes for r in rows))) if rows else []
    out.extend(f"^{t} {FOOTNOTES.get(t, '')}".rstrip() for t in tags)
    return "\n".join(out)
