import math

import pytest

from hsps import model, scenario
from hsps.estimator import EstimationConfig, estimate
from hsps.model import DomainError, FiguresOfMerit
from hsps.scenario import SweepSpec, reference_scenario, project_upgrade, run_sweep
from hsps.simkernel import run


class TestBuilders:
    def test_reference_scenario_synced(self):
        sc = reference_scenario()
        assert sc.modes.mu_per_mode == pytest.approx(0.005, rel=1e-12)
        sc = reference_scenario(laser_power_mw=20.0)
        assert sc.modes.mu_per_mode == pytest.approx(0.0025, rel=1e-12)

    def test_apply_point(self):
        base = reference_scenario()
        sc = scenario.apply_point(base, "n_mean", 0.002)
        assert sc.modes.mu_per_mode == 0.002
        assert sc.source.n_mean == pytest.approx(0.002, rel=1e-12)
        with pytest.raises(DomainError):
            scenario.apply_point(base, "temperature", 1.0)

    def test_default_grid(self):
        base = reference_scenario()
        grid = scenario.default_grid(base)
        assert len(grid) == 8 and grid == sorted(grid)
        mus = scenario.default_grid(base, "n_mean")
        src = base.source
        rates = [model.heralding_rate(src.rep_rate_hz, m, src.gamma, src.signal_transmission,
                                      base.sspd.efficiency) for m in (mus[0], mus[-1])]
        measured = [model.dead_time_apply(r, base.sspd.dead_time_s) for r in rates]
        assert measured[0] == pytest.approx(50e3, rel=1e-9)
        assert measured[1] == pytest.approx(2.1e6, rel=1e-9)


class TestSweepSpec:
    @pytest.mark.parametrize("grid", [(), (2.0, 1.0), (1.0, 1.0)])
    def test_invalid_grid(self, grid):
        with pytest.raises(DomainError):
            SweepSpec(reference_scenario(), grid=grid)

    def test_seed_schedule(self):
        spec = SweepSpec(reference_scenario(seed=5), grid=(1.0, 2.0, 3.0))
        assert [s.seed for s in spec.scenarios()] == [5, 6, 7]
        spec = SweepSpec(reference_scenario(), grid=(1.0, 2.0), seeds=(9, 3))
        assert [s.seed for s in spec.scenarios()] == [9, 3]
        with pytest.raises(DomainError):
            SweepSpec(reference_scenario(), grid=(1.0, 2.0), seeds=(1,))


class TestRunSweep:
    def test_single_point_equals_plain_run(self):
        base = reference_scenario(duration_s=2e-3, seed=4)
        rows = run_sweep(SweepSpec(base, grid=(40.0,), duration_s=2e-3))
        direct = estimate(run(base), EstimationConfig.from_scenario(base))
        assert len(rows) == 1
        assert rows[0].figures.as_dict() == direct.as_dict()

    def test_order_and_independence(self):
        base = reference_scenario(duration_s=2e-3)
        spec = SweepSpec(base, grid=(10.0, 20.0, 40.0), duration_s=2e-3)
        serial = run_sweep(spec)
        parallel = run_sweep(spec, workers=2)
        assert [r.set_value for r in serial] == [10.0, 20.0, 40.0]
        assert [r.figures.as_dict() for r in serial] == [r.figures.as_dict() for r in parallel]

    def test_failure_recorded_in_row(self):
        base = reference_scenario(duration_s=1e-3)
        # a pump this strong drives the per-mode mean past the supported range
        rows = run_sweep(SweepSpec(base, grid=(40.0, 1e6), duration_s=1e-3))
        assert rows[0].error is None and rows[0].figures is not None
        assert rows[1].error and rows[1].figures is None

    def test_reference_sweep_properties(self):
        base = reference_scenario()
        grid = scenario.default_grid(base)[-4:]
        rows = run_sweep(SweepSpec(base, grid=tuple(grid), duration_s=1.0))
        rates = [r.figures.r_h_hz for r in rows]
        assert rates == sorted(rates)
        p1 = [r.figures.p1 for r in rows]
        assert all(abs(p - 0.42) < 0.02 for p in p1)
        end = rows[-1].figures
        assert end.n_mean == pytest.approx(0.005, rel=0.02)
        g2 = [r.figures.g2 for r in rows]
        errs = [r.figures.g2_err for r in rows]
        assert g2[-1] - g2[0] > 3 * math.hypot(errs[-1], errs[0])
        assert end.g2 > rows[-1].g2_theory


class TestProjection:
    BASE = FiguresOfMerit(r_h_hz=2.1e6, r_h_err=1e4, p1=0.42, p1_err=0.01, g2=0.023, g2_err=0.002, n_mean=0.005)

    def test_identity(self):
        out = project_upgrade(self.BASE, 0.17, 0.6, 0.17, 0.6)
        assert out.as_dict() == self.BASE.as_dict()

    def test_full_upgrade(self):
        out = project_upgrade(self.BASE, 0.17, 0.6, 0.90, 0.80)
        assert out.r_h_hz == pytest.approx(2.1e6 * (0.90 / 0.17) * (0.80 / 0.60))
        assert out.r_h_hz == pytest.approx(14.8e6, rel=0.01)
        assert out.p1 == pytest.approx(0.56)
        assert out.g2 == 0.023 and out.n_mean == 0.005

    def test_detector_only(self):
        out = project_upgrade(self.BASE, 0.17, 0.6, 0.90, 0.6)
        assert out.r_h_hz / self.BASE.r_h_hz == pytest.approx(5.29, abs=0.01)
        assert out.p1 == self.BASE.p1

    def test_p1_capped(self):
        out = project_upgrade(FiguresOfMerit(p1=0.9), 0.17, 0.5, 0.17, 1.0)
        assert out.p1 == 1.0

    def test_rejects(self):
        with pytest.raises(DomainError):
            project_upgrade(self.BASE, 0.17, 0.6, 0.0, 0.8)


class TestTable:
    def test_literature_rows(self):
        rows = {r.label: r for r in scenario.literature_rows()}
        assert rows["Nice"].cells[1:] == ("0.42", "0.17", "2.1 MHz", "0.005", "0.023")
        assert rows["Geneva"].cells[1:] == ("0.45", "0.50", "4.4 MHz", "0.1", "0.18^a")
        assert rows["Geneva"].footnotes == {"a"}
        assert rows["Vienna"].n_mean == "-" and rows["Vienna"].g2 == "-"
        assert "Nice^c" in rows

    def test_header_only(self):
        text = scenario.comparison_table([])
        lines = text.splitlines()
        assert len(lines) == 2
        assert all(c.strip() in lines[0] for c in scenario.TABLE_COLUMNS)

    def test_render_with_footnotes(self):
        text = scenario.comparison_table(scenario.literature_rows())
        assert "^a theoretically calculated" in text
        assert "^c expected values" in text

    def test_simulated_row(self):
        fig = FiguresOfMerit(r_h_hz=2.1e6, p1=0.4213, g2=None, n_mean=0.00497)
        row = scenario.table_row("sim", fig, 0.17)
        assert row.cells == ("sim", "0.42", "0.17", "2.1 MHz", "0.005", "-")
