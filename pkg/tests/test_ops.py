import math

import numpy as np
import pytest

from hsps import model
from hsps.model import DetectorModel, DomainError, ModeStructure
from hsps.simkernel import ops
from hsps.simkernel._params import DARK

from oracles import nonparalyzable_measured


def z(observed, expected, sigma):
    return abs(observed - expected) / sigma


class TestSamplePulse:
    def test_vacuum(self):
        rng = np.random.default_rng(0)
        c, noise = ops.sample_pulse(rng, ModeStructure(mu_per_mode=0.0, noise_brightness=1.0))
        assert c == 0 and not noise.any()
        assert noise.shape == (7,)

    @pytest.mark.parametrize("stats, p_expected", [
        (model.THERMAL, 0.005 / 1.005),
        (model.POISSONIAN, -math.expm1(-0.005)),
    ])
    def test_occupation_tail(self, stats, p_expected):
        rng = np.random.default_rng(11)
        n = 10_000_000
        correlated, _ = ops.sample_pulses(rng, ModeStructure(n_spectral=1, mu_per_mode=0.005), stats, n)
        freq = np.count_nonzero(correlated) / n
        assert z(freq, p_expected, math.sqrt(p_expected * (1 - p_expected) / n)) < 3

    def test_noise_modes_follow_brightness(self):
        rng = np.random.default_rng(3)
        modes = ModeStructure(n_spectral=4, mu_per_mode=0.2, noise_brightness=0.5)
        _, noise = ops.sample_pulses(rng, modes, model.THERMAL, 200_000)
        assert noise.shape == (200_000, 3)
        assert noise.mean() == pytest.approx(0.1, rel=0.02)


class TestSkipping:
    def test_certain(self):
        rng = np.random.default_rng(1)
        assert (ops.skip_to_next_event(rng, 1.0, size=100) == 1).all()

    def test_mean_gap(self):
        rng = np.random.default_rng(2)
        gaps = ops.skip_to_next_event(rng, 0.04, size=1_000_000)
        assert z(gaps.mean(), 25.0, math.sqrt((1 - 0.04) / 0.04**2 / 1e6)) < 3

    def test_matches_bernoulli_loop(self):
        n, p = 1_000_000, 0.01
        rng = np.random.default_rng(4)
        events, pos = 0, 0
        while True:
            pos += int(ops.skip_to_next_event(rng, p))
            if pos > n:
                break
            events += 1
        direct = np.count_nonzero(np.random.default_rng(5).random(n) < p)
        sigma = math.sqrt(2 * n * p * (1 - p))
        assert z(events, direct, sigma) < 3

    @pytest.mark.parametrize("p", [0.0, -0.1, 1.5])
    def test_rejects(self, p):
        with pytest.raises(DomainError):
            ops.skip_to_next_event(np.random.default_rng(0), p)


class TestTransport:
    def test_extremes(self):
        rng = np.random.default_rng(0)
        counts = np.array([0, 1, 5, 100])
        assert (ops.transport(counts, [1.0], rng) == counts).all()
        assert not ops.transport(counts, [0.0], rng).any()

    def test_product_law(self):
        rng = np.random.default_rng(8)
        n = 10_000_000
        survived = int(ops.transport(np.array([n]), [0.60, 0.562], rng)[0])
        p = 0.60 * 0.562
        assert p == pytest.approx(0.3372, abs=1e-4)
        assert z(survived / n, p, math.sqrt(p * (1 - p) / n)) < 3

    def test_rejects(self):
        with pytest.raises(DomainError):
            ops.transport(np.array([1]), [1.2], np.random.default_rng(0))


class TestTacGate:
    def test_accept_reject(self):
        assert ops.tac_gate(150.0, 0.0, 300.0)
        assert not ops.tac_gate(450.0, 0.0, 400.0)
        assert not ops.tac_gate(-1.0, 0.0, 400.0)

    @pytest.mark.parametrize("window, slots", [(300.0, 3), (400.0, 4)])
    def test_consecutive_pulses(self, window, slots):
        # pulses at 0.5, 1.5, ... periods after the trigger
        arrivals = (np.arange(10) + 0.5) * 100.0
        assert ops.tac_gate(arrivals, 0.0, window).sum() == slots


class TestDetect:
    def test_identity(self):
        rng = np.random.default_rng(0)
        arrivals = np.sort(np.random.default_rng(1).uniform(0, 1e6, 1000))
        train = ops.detect(arrivals, DetectorModel(1.0), rng)
        np.testing.assert_array_equal(train.times_ps, arrivals)

    def test_unordered(self):
        with pytest.raises(ValueError):
            ops.detect([5.0, 1.0], DetectorModel(1.0), np.random.default_rng(0))

    def test_dead_time_rate(self):
        rng = np.random.default_rng(21)
        span_s = 20.0
        n = rng.poisson(50e3 * span_s)
        arrivals = np.sort(rng.uniform(0, span_s * 1e12, n))
        det = DetectorModel(1.0, dead_time_s=10e-6)
        measured = len(ops.detect(arrivals, det, rng)) / span_s
        assert measured == pytest.approx(nonparalyzable_measured(50e3, 10e-6), rel=0.01)
        assert measured == pytest.approx(33.3e3, rel=0.01)

    def test_jitter_width(self):
        rng = np.random.default_rng(5)
        arrivals = np.arange(1_000_000) * 1e6
        train = ops.detect(arrivals, DetectorModel(1.0, jitter_fwhm_ps=120.0), rng)
        sd = np.std(np.sort(train.times_ps) - arrivals)
        assert sd == pytest.approx(50.96, rel=0.02)

    def test_free_running_darks(self):
        rng = np.random.default_rng(6)
        det = DetectorModel(0.0, dark_rate_hz=1e5)
        train = ops.detect([], det, rng, span_ps=(0.0, 1e12))
        assert z(len(train), 1e5, math.sqrt(1e5)) < 4
        assert (train.origins == DARK).all()

    def test_triggered_gates(self):
        rng = np.random.default_rng(7)
        det = DetectorModel(1.0, mode=model.TRIGGERED, gate_window_ps=300.0)
        train = ops.detect([100.0, 1000.0, 2500.0], det, rng, gates_ps=[0.0, 2400.0])
        np.testing.assert_array_equal(train.times_ps, [100.0, 2500.0])
        dark = DetectorModel(0.0, dark_prob_per_gate=1.0, mode=model.TRIGGERED, gate_window_ps=300.0)
        train = ops.detect([], dark, rng, gates_ps=[0.0, 1000.0])
        assert len(train) == 2 and (train.origins == DARK).all()

    def test_records(self):
        train = ops.ClickTrain(np.array([105.0, 290.0]), np.array([0, 2], dtype=np.int8))
        recs = train.records("APD1", 100.0)
        assert recs[0] == ops.ClickRecord("APD1", 1, 5.0, "photon_correlated")
        assert recs[1].pulse_index == 3 and recs[1].origin == "dark"
