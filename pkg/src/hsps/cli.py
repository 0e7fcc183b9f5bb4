"""Command-line front end: ``hsps analytic|simulate|sweep|table|project``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 a simulation
broke a conservation invariant.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, config, model, scenario
from .estimator import EstimationConfig, estimate
from .model import DomainError, FiguresOfMerit
from .simkernel import engine

log = logging.getLogger("hsps")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INVARIANT = 0, 2, 3, 4
CSV_COLUMNS = ("set_value", "r_h_hz", "r_h_err", "p1", "p1_err", "g2", "g2_err", "n_mean", "g2_theory")
EXTRA_COLUMNS = ("n_mean_err", "s1_hz", "s2_hz", "heralds", "s1_counts", "s2_counts", "error")
NA = "NA"


class OutputError(OSError):
    pass


# ---------------------------------------------------------------------------
# Closed-form evaluation
# ---------------------------------------------------------------------------


def analytic_figures(sc) -> FiguresOfMerit:
    """Rates and figures from the closed forms alone; no sampling."""
    src = sc.source
    mu = sc.modes.mu_per_mode
    r_h = model.heralding_rate(src.rep_rate_hz, mu, src.gamma, src.signal_transmission, sc.sspd.efficiency)
    p1 = src.gamma * src.idler_transmission
    s1 = r_h * p1 * sc.apd1.efficiency / 2.0
    g2 = model.single_mode_g2_theory(mu, src.statistics)
    s2 = g2 * s1 * s1 * sc.apd2.efficiency / (r_h * sc.apd1.efficiency) if r_h > 0 else 0.0
    return FiguresOfMerit(r_h_hz=r_h, s1_hz=s1, s2_hz=s2, p1=p1, g2=g2, n_mean=mu)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _cell(value):
    if value is None:
        return NA
    if isinstance(value, str):
        return value
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    value = float(value)
    return repr(value) if math.isfinite(value) else NA


def row_cells(row: scenario.SweepRow):
    fig = row.figures or FiguresOfMerit()
    tot = row.totals
    values = {
        "set_value": row.set_value, "r_h_hz": fig.r_h_hz, "r_h_err": fig.r_h_err, "p1": fig.p1,
        "p1_err": fig.p1_err, "g2": fig.g2, "g2_err": fig.g2_err, "n_mean": fig.n_mean,
        "g2_theory": row.g2_theory, "n_mean_err": fig.n_mean_err, "s1_hz": fig.s1_hz, "s2_hz": fig.s2_hz,
        "heralds": tot.heralds if tot else None, "s1_counts": tot.s1_counts if tot else None,
        "s2_counts": tot.s2_counts if tot else None, "error": row.error or "",
    }
    return [_cell(values[c]) for c in CSV_COLUMNS + EXTRA_COLUMNS]


def csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS + EXTRA_COLUMNS)
    for row in rows:
        writer.writerow(row_cells(row))
    return buf.getvalue()


def read_results(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir: Path, sc, started_at, outputs, **extra) -> Path:
    manifest = {
        "version": __version__,
        "seed": int(sc.seed),
        "config": config.snapshot(sc),
        "started_at": started_at,
        "finished_at": _now(),
        "outputs": [str(p) for p in outputs],
        **extra,
    }
    path = out_dir / "manifest.json"
    _write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def plot_sweep(rows, out_dir: Path):
    """SVG plots of P1 and g2 against the heralding rate; returns ``{path: x-limits}``."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping plots")
        return {}
    good = [r for r in rows if r.figures is not None and r.figures.r_h_hz]
    if not good:
        return {}
    x = [r.figures.r_h_hz for r in good]
    span = (min(x), max(x))
    written = {}
    panels = (("p1", "P1", None), ("g2", "g2(0)", "g2_theory"))
    for key, label, theory in panels:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ys = [getattr(r.figures, key) for r in good]
        es = [getattr(r.figures, key + "_err") or 0.0 for r in good]
        ax.errorbar(x, [y if y is not None else math.nan for y in ys], yerr=es, fmt="o", label="simulated")
        if theory:
            ax.plot(x, [r.g2_theory for r in good], "-", label="single-mode theory")
        ax.set_xscale("log")
        ax.set_xlim(*span)
        ax.set_xlabel("R_H (Hz)")
        ax.set_ylabel(label)
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{key}_vs_rh.svg"
        try:
            fig.savefig(path, format="svg")
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None
        finally:
            plt.close(fig)
        written[path] = ax.get_xlim()
    return written


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _duration(text):
    try:
        return config.parse_duration(text, "s")
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a duration: {text!r} (use e.g. 10ms)") from None


def _grid(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated numbers, got {text!r}") from None


def load_scenario(args):
    sc = config.load(args.config) if args.config else config.loads(config.default_text(), "default.ini")
    sc = config.with_overrides(sc, n_mean=getattr(args, "n_mean", None), eta_d=getattr(args, "eta_d", None),
                               gamma=getattr(args, "gamma", None), duration_s=getattr(args, "duration", None),
                               seed=getattr(args, "seed", None))
    if getattr(args, "modes", "multi") == "single":
        single = scenario.single_mode_scenario(sc.modes.mu_per_mode, sc.duration_s, sc.seed,
                                               sc.source.statistics)
        sc = replace(single, block_size_pulses=sc.block_size_pulses)
    try:
        sc.validate()
    except engine.ScenarioError as exc:
        raise config.ConfigError(str(exc)) from None
    return sc


def cmd_analytic(args) -> int:
    sc = load_scenario(args)
    fig = analytic_figures(sc)
    n_f, n_t = model.mode_counts(sc.source.heralded_bw_ghz, sc.source.heralding_bw_ghz,
                                 sc.tac2_window_ps, sc.source.pulse_period_ps)
    out = {k: v for k, v in fig.as_dict().items() if v is not None and k not in ("undefined", "warnings")}
    out.update(n_spectral=n_f, n_temporal=n_t, multimode_limit=model.multimode_heralding_limit(n_f, n_t))
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        for key, value in out.items():
            print(f"{key:16s} {value:.6g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = _now()
    sc = load_scenario(args)
    t0 = time.perf_counter()
    totals = engine.run(sc, workers=args.workers)
    fig = estimate(totals, EstimationConfig.from_scenario(sc))
    g2_theory = model.single_mode_g2_theory(fig.n_mean, sc.source.statistics)
    row = scenario.SweepRow(set_value=sc.source.laser_power_mw, figures=fig, g2_theory=g2_theory,
                            runtime_s=time.perf_counter() - t0, totals=totals)
    out_dir = Path(args.out)
    csv_path = out_dir / "results.csv"
    _write(csv_path, csv_text([row]))
    manifest = write_manifest(out_dir, sc, started, [csv_path], runtime_s=row.runtime_s,
                              backend=engine.backend.DEFAULT)
    _summary(row)
    for w in fig.warnings:
        log.warning(w)
    log.info("wrote %s and %s", csv_path, manifest)
    return EXIT_OK


def _summary(row):
    fig = row.figures
    if fig is None:
        print(f"set_value={row.set_value:.6g}  error: {row.error}")
        return

    def pm(v, e):
        return NA if v is None else f"{v:.4g} +/- {e or 0:.2g}"

    print(f"set_value={row.set_value:.6g}  R_H={pm(fig.r_h_hz, fig.r_h_err)} Hz  P1={pm(fig.p1, fig.p1_err)}  "
          f"g2={pm(fig.g2, fig.g2_err)}  <n>={pm(fig.n_mean, fig.n_mean_err)}  g2_theory={row.g2_theory:.4g}")


def cmd_sweep(args) -> int:
    started = _now()
    base = load_scenario(args)
    grid = args.grid or scenario.default_grid(base, args.variable, args.points)
    spec = scenario.SweepSpec(base=base, variable=args.variable, grid=tuple(grid), duration_s=base.duration_s)
    rows = scenario.run_sweep(spec, workers=args.workers)
    out_dir = Path(args.out)
    csv_path = out_dir / "sweep.csv"
    _write(csv_path, csv_text(rows))
    outputs = [csv_path]
    if args.plot:
        outputs.extend(plot_sweep(rows, out_dir))
    write_manifest(out_dir, base, started, outputs, variable=args.variable,
                   seeds=[spec.seed_for(i) for i in range(len(grid))],
                   runtime_s=[r.runtime_s for r in rows], backend=engine.backend.DEFAULT)
    for row in rows:
        _summary(row)
    return EXIT_OK


def _float_or_none(text):
    try:
        value = float(text)
    except (TypeError, ValueError):
        return None
    return value if math.isfinite(value) else None


def _figures_from_csv_row(rec) -> FiguresOfMerit:
    return FiguresOfMerit(**{k: _float_or_none(rec.get(k)) for k in
                             ("r_h_hz", "r_h_err", "p1", "p1_err", "g2", "g2_err", "n_mean")})


def cmd_table(args) -> int:
    rows = scenario.literature_rows()
    sc = load_scenario(args)
    for path in args.results or []:
        try:
            records = read_results(path)
        except OSError as exc:
            raise OutputError(f"cannot read {path}: {exc.strerror}") from None
        for rec in records:
            label = f"{Path(path).stem}@{rec['set_value']}"
            rows.append(scenario.table_row(label, _figures_from_csv_row(rec), sc.sspd.efficiency))
    print(scenario.comparison_table(rows))
    return EXIT_OK


def cmd_project(args) -> int:
    sc = load_scenario(args)
    if args.results:
        try:
            records = read_results(args.results)
        except OSError as exc:
            raise OutputError(f"cannot read {args.results}: {exc.strerror}") from None
        if not records:
            raise config.ConfigError(f"{args.results} holds no result rows")
        base = _figures_from_csv_row(records[-1])
    else:
        base = analytic_figures(sc)
    projected = scenario.project_upgrade(base, sc.sspd.efficiency, sc.source.gamma, args.to_eta_d, args.to_gamma)
    factor = (args.to_eta_d / sc.sspd.efficiency) * (args.to_gamma / sc.source.gamma)
    print(scenario.comparison_table([
        scenario.table_row("base", base, sc.sspd.efficiency),
        scenario.table_row("projected", projected, args.to_eta_d),
    ]))
    print(f"R_H factor {factor:.4g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsps", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", nargs="?", help="scenario INI file (default: calibrated reference point)")
        p.add_argument("--n-mean", type=float, help="pairs per pulse; moves the laser power to match")
        p.add_argument("--eta-d", type=float, help="heralding detector efficiency")
        p.add_argument("--gamma", type=float, help="waveguide-to-fiber coupling efficiency")
        return p

    def running(p):
        p.add_argument("--duration", type=_duration, help="simulated time, e.g. 10ms")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--modes", choices=("multi", "single"), default="multi",
                       help="single: one mode, ideal detectors (theory check)")
        return p

    p = common(sub.add_parser("analytic", help="closed-form figures of merit"))
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_analytic)

    p = running(common(sub.add_parser("simulate", help="full-chain Monte Carlo run")))
    p.set_defaults(func=cmd_simulate)

    p = running(common(sub.add_parser("sweep", help="pump-power sweep")))
    p.add_argument("--variable", choices=scenario.SWEEP_VARIABLES, default="laser_power_mw")
    p.add_argument("--grid", type=_grid, help="comma-separated, strictly increasing set values")
    p.add_argument("--points", type=int, default=8, help="default-grid size")
    p.add_argument("--plot", action="store_true", help="also write SVG plots")
    p.set_defaults(func=cmd_sweep)

    p = common(sub.add_parser("table", help="comparison with published sources"))
    p.add_argument("--results", nargs="*", help="results CSVs to add as rows")
    p.set_defaults(func=cmd_table)

    p = common(sub.add_parser("project", help="detector/coupling upgrade projection"))
    p.add_argument("--to-eta-d", type=float, default=0.90)
    p.add_argument("--to-gamma", type=float, default=0.80)
    p.add_argument("--results", help="results CSV whose last row is the base point")
    p.set_defaults(func=cmd_project)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, engine.ScenarioError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except engine.SimulationInvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
