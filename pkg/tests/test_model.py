import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsps import model
from hsps.model import DetectorModel, DomainError, ModeStructure, SaturationError, SourceConfig

from oracles import (
    poisson_sampler, poisson_single_mode_g2, sampled_single_mode_g2, thermal_sampler, thermal_single_mode_g2,
)

unit = st.floats(0.01, 1.0)


class TestConversions:
    def test_db_values(self):
        assert model.db_to_transmission(0.0) == 1.0
        assert model.db_to_transmission(2.5) == pytest.approx(0.5623, abs=1e-4)
        assert model.db_to_transmission(1.9) == pytest.approx(0.6457, abs=1e-4)

    @pytest.mark.parametrize("bad", [-0.1, math.inf, math.nan])
    def test_db_rejects(self, bad):
        with pytest.raises(DomainError):
            model.db_to_transmission(bad)

    @given(st.floats(0.0, 60.0))
    def test_db_round_trip(self, db):
        assert model.transmission_to_db(model.db_to_transmission(db)) == pytest.approx(db, abs=1e-9)


class TestPumpChain:
    def test_mean_pairs(self):
        assert model.mean_pairs_from_pump(8.0, 2.5e5, 25.0, 1e10) == pytest.approx(5.0e-3, rel=1e-12)
        assert model.mean_pairs_from_pump(0.0, 2.5e5, 25.0, 1e10) == 0.0
        assert model.mean_pairs_from_pump(1.0, 2.5e5, 1.0, 1e10) == pytest.approx(2.5e-5, rel=1e-12)
        with pytest.raises(DomainError):
            model.mean_pairs_from_pump(8.0, 2.5e5, 25.0, 0.0)

    def test_shg(self):
        assert model.shg_pump(40.0, 0.20) == pytest.approx(8.0)
        assert model.shg_pump(17.0, 0.0) == 0.0
        assert model.shg_pump(17.0, 1.0) == 17.0
        assert model.shg_pump(4.0, 0.5, exponent=2) == pytest.approx(8.0)
        with pytest.raises(DomainError):
            model.shg_pump(40.0, 1.2)

    def test_calibrated_defaults(self):
        src = SourceConfig()
        assert src.spdc_pump_mw == pytest.approx(8.0)
        assert src.n_mean == pytest.approx(0.005, rel=1e-12)
        # T_H = 2.1e6 / (1e10 * 0.005 * 0.6 * 0.17); T = 0.42 / 0.6
        assert src.signal_transmission == pytest.approx(2.1e6 / (1e10 * 0.005 * 0.6 * 0.17), rel=1e-4)
        assert src.idler_transmission == pytest.approx(0.70, rel=1e-4)
        assert src.pulse_period_ps == pytest.approx(100.0)

    def test_source_validation(self):
        with pytest.raises(DomainError):
            SourceConfig(gamma=1.5)
        with pytest.raises(DomainError):
            SourceConfig(idler_loss_db=0.1, idler_excess_loss_db=-0.5)
        with pytest.raises(DomainError):
            SourceConfig(statistics="laser")
        # heralded narrower than heralding is allowed
        SourceConfig(heralded_bw_ghz=10.0)


class TestHeraldingRate:
    def test_reference_point(self):
        assert model.heralding_rate(1e10, 0.005, 0.60, 0.412, 0.17) == pytest.approx(2.10e6, rel=2e-3)
        assert model.heralding_rate(1e10, 0.00366, 0.60, 0.5623, 0.17) == pytest.approx(2.10e6, rel=2e-3)
        assert model.heralding_rate(5e9, 0.0, 0.6, 0.4, 0.17) == 0.0

    def test_inverse(self):
        assert model.invert_heralding_rate(2.10e6, 1e10, 0.60, 0.412, 0.17) == pytest.approx(0.005, rel=2e-3)
        assert model.invert_heralding_rate(0.0, 1e10, 0.6, 0.4, 0.17) == 0.0
        with pytest.raises(DomainError):
            model.invert_heralding_rate(1e6, 1e10, 0.0, 0.4, 0.17)

    @settings(max_examples=200)
    @given(st.floats(1e6, 1e11), st.floats(0.0, 1.0), unit, unit, unit, st.floats(0.1, 10.0))
    def test_multilinear_and_round_trip(self, f, n, g, t, e, c):
        r = model.heralding_rate(f, n, g, t, e)
        assert model.heralding_rate(c * f, n, g, t, e) == pytest.approx(c * r, rel=1e-12)
        assert model.heralding_rate(f, c * n, g, t, e) == pytest.approx(c * r, rel=1e-12)
        assert model.invert_heralding_rate(r, f, g, t, e) == pytest.approx(n, rel=1e-12, abs=1e-300)


class TestRatioEstimators:
    def test_p1(self):
        assert model.heralding_efficiency(110250.0, 2.1e6, 0.25) == pytest.approx(0.42)
        assert model.heralding_efficiency(0.0, 2.1e6, 0.25) == 0.0
        assert model.heralding_efficiency(52500.0, 1.0e6, 0.25) == pytest.approx(0.42)
        with pytest.raises(DomainError):
            model.heralding_efficiency(1.0, 0.0, 0.25)

    def test_g2(self):
        assert model.autocorrelation(2.1e6, 110250.0, 133.1, 0.25, 0.25) == pytest.approx(0.0230, abs=5e-5)
        assert model.autocorrelation(2.1e6, 110250.0, 0.0, 0.25, 0.25) == 0.0
        with pytest.raises(DomainError):
            model.autocorrelation(2.1e6, 0.0, 1.0, 0.25, 0.25)

    @given(st.floats(1e3, 1e8), st.floats(1.0, 1e6), st.floats(0.0, 1e4), unit)
    def test_g2_scaling(self, r, s1, s2, eta):
        g = model.autocorrelation(r, s1, s2, eta, eta)
        assert g == pytest.approx(r * s2 / (s1 * s1), rel=1e-12, abs=1e-300)
        assert model.autocorrelation(2 * r, s1, s2, eta, eta) == pytest.approx(2 * g, rel=1e-12, abs=1e-300)
        assert model.autocorrelation(r, s1, 2 * s2, eta, eta) == pytest.approx(2 * g, rel=1e-12, abs=1e-300)
        assert model.autocorrelation(r, 2 * s1, s2, eta, eta) == pytest.approx(g / 4, rel=1e-12, abs=1e-300)


class TestDeadTime:
    def test_values(self):
        assert model.dead_time_correct(33333.3, 1e-5) == pytest.approx(50000.0, rel=1e-5)
        assert model.dead_time_correct(1234.0, 0.0) == 1234.0
        assert model.dead_time_apply(50000.0, 1e-5) == pytest.approx(33333.33, rel=1e-6)
        assert model.live_fraction(50000.0, 1e-5) == pytest.approx(0.5)

    def test_saturation(self):
        with pytest.raises(SaturationError):
            model.dead_time_correct(1e5, 1e-5)
        with pytest.raises(SaturationError):
            model.live_fraction(2e5, 1e-5)

    @settings(max_examples=300)
    @given(st.floats(0.0, 0.5), st.floats(1e-9, 1e-3))
    def test_round_trip(self, load, tau):
        m = load / tau
        assert model.dead_time_apply(model.dead_time_correct(m, tau), tau) == pytest.approx(m, rel=1e-12, abs=1e-300)


class TestModes:
    def test_counts(self):
        assert model.mode_counts(200, 25, 400, 100) == (8, 4)
        assert model.mode_counts(25, 25, 50, 100) == (1, 1)
        assert model.mode_counts(200, 25, 300, 100) == (8, 3)
        with pytest.raises(DomainError):
            model.mode_counts(0, 25, 400, 100)

    @given(st.floats(0.1, 1e3), st.floats(1.0, 1e3), st.floats(0.01, 1.0))
    def test_matched_short_window(self, bw, period, frac):
        assert model.mode_counts(bw, bw, frac * period, period) == (1, 1)

    def test_limit(self):
        assert model.multimode_heralding_limit(8, 4, 0.1) == pytest.approx(0.003125)
        assert model.multimode_heralding_limit(1, 1, 0.1) == pytest.approx(0.1)
        assert model.multimode_heralding_limit(8, 3) == pytest.approx(0.004167, abs=1e-6)

    def test_structure(self):
        with pytest.raises(DomainError):
            ModeStructure(n_spectral=0)
        with pytest.raises(DomainError):
            ModeStructure(mu_per_mode=-1)
        assert ModeStructure(mu_per_mode=0.01, noise_brightness=0.5).noise_mu == pytest.approx(0.005)


class TestSingleModeTheory:
    def test_closed_forms(self):
        assert model.single_mode_g2_theory(0.0) == 0.0
        assert model.single_mode_g2_theory(0.005) == pytest.approx(0.019754, abs=2e-6)
        assert model.single_mode_g2_theory(0.005, model.POISSONIAN) == pytest.approx(0.009926, abs=1e-6)
        for mu in (1e-4, 0.01, 0.1, 1.0):
            assert model.single_mode_g2_theory(mu) == pytest.approx(thermal_single_mode_g2(mu), rel=1e-10)
            assert model.single_mode_g2_theory(mu, model.POISSONIAN) == pytest.approx(
                poisson_single_mode_g2(mu), rel=1e-10)

    def test_monte_carlo_oracle(self):
        rng = np.random.default_rng(7)
        mu = 0.2
        for sampler, stats in ((thermal_sampler, model.THERMAL), (poisson_sampler, model.POISSONIAN)):
            estimates = [sampled_single_mode_g2(mu, sampler, 200_000, rng) for _ in range(10)]
            mean, sem = np.mean(estimates), np.std(estimates, ddof=1) / math.sqrt(10)
            assert abs(mean - model.single_mode_g2_theory(mu, stats)) < 3.5 * sem + 1e-4

    def test_negative(self):
        with pytest.raises(DomainError):
            model.single_mode_g2_theory(-0.1)

    @given(st.floats(1e-4, 0.99), st.floats(1e-3, 0.01))
    def test_monotone_and_ordered(self, mu, step):
        for stats in model.STATISTICS:
            assert model.single_mode_g2_theory(mu + step, stats) > model.single_mode_g2_theory(mu, stats)
        assert model.single_mode_g2_theory(mu) >= model.single_mode_g2_theory(mu, model.POISSONIAN)

    def test_truncation_stable(self):
        for stats in model.STATISTICS:
            a = model.single_mode_g2_theory(0.5, stats, n_max=40)
            b = model.single_mode_g2_theory(0.5, stats, n_max=45)
            assert abs(a - b) <= 1e-10 * a

    def test_pmf(self):
        for stats in model.STATISTICS:
            assert sum(model.pair_number_pmf(0.3, stats, 80)) == pytest.approx(1.0, abs=1e-12)


class TestDetectorModel:
    def test_reference_detectors(self):
        assert model.default_apd(300.0).jitter_sigma_ps == pytest.approx(50.96, abs=0.01)
        assert model.default_sspd().mode == model.FREE_RUNNING

    def test_one_dark_mechanism(self):
        with pytest.raises(DomainError):
            DetectorModel(0.5, dark_prob_per_gate=1e-3)
        with pytest.raises(DomainError):
            DetectorModel(0.5, dark_rate_hz=10.0, mode=model.TRIGGERED)
        with pytest.raises(DomainError):
            DetectorModel(1.5)
        with pytest.raises(DomainError):
            DetectorModel(0.5, dead_time_s=-1.0)
