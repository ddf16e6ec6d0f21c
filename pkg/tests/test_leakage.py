import math

import numpy as np
import pytest
from scipy.linalg import expm

from fluxlat.dynamics import PulseSpec, envelope
from fluxlat.errors import ValidationError
from fluxlat.leakage import (
    LeakageChannel,
    bucket,
    calibrated_pulse,
    czz_resonance_margin,
    leakage_channel,
    leakage_map,
    leakage_rate,
    source_name,
)

GAP = 0.1
# frozen calibration of the k = 0 model at tau = 66 ns (checked against calibrated_pulse below)
PULSE = PulseSpec(0.027987878605355482, 66.0, -0.004026200474338469)


def two_level_transfer(p, k, delta, steps=4000):
    """Midpoint exponential integrator for |s> <-> |l> driven by k * envelope."""
    dt = p.duration / steps
    u = np.eye(2, dtype=complex)
    for i in range(steps):
        t = (i + 0.5) * dt
        c = 0.5 * k * envelope(p, t) * np.exp(-2j * math.pi * p.detuning * t)
        u = expm(-2j * math.pi * dt * np.array([[0, c], [np.conj(c), delta]])) @ u
    return abs(u[1, 0]) ** 2


@pytest.fixture(scope="module")
def pulse():
    return PULSE


class TestRate:
    @pytest.mark.parametrize("source", ["110", "111", "000"])
    @pytest.mark.parametrize("delta", [-0.1, 0.0, 0.07])
    def test_zero_coupling_is_exactly_zero(self, pulse, source, delta):
        assert leakage_rate(GAP, delta, 0.0, source, pulse) == 0.0

    @pytest.mark.parametrize("k", [1e-3, 1e-2, 1e-1])
    def test_idle_source_two_level_oracle(self, pulse, k):
        # |000> sees the k drive as a two-level problem; the coupler drive only adds a small Stark shift.
        # One of four computational states leaks, so the rate is a quarter of the transferred population.
        assert leakage_rate(GAP, 0.0, k, "000", pulse) == pytest.approx(two_level_transfer(pulse, k, 0.0) / 4, rel=0.05)

    def test_quadratic_in_k_at_small_k(self, pulse):
        ks = np.array([1e-4, 2e-4, 4e-4])
        rates = [leakage_rate(GAP, 0.0, k, "000", pulse) for k in ks]
        slope = np.polyfit(np.log(ks), np.log(rates), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.01)

    def test_resonant_coupling_leaks_strongly(self, pulse):
        assert leakage_rate(GAP, 0.0, 0.1, "000", pulse) > 1e-3

    def test_off_resonance_suppressed(self, pulse):
        on = leakage_rate(GAP, 0.0, 0.01, "000", pulse)
        for delta in (-0.05, 0.05):
            assert leakage_rate(GAP, delta, 0.01, "000", pulse) < 0.1 * on

    def test_negative_difference_is_flagged(self, pulse):
        # k perturbs the resonant |110> cycle and can lower the residual coupler population below its k = 0 value
        ch = leakage_channel(GAP, 0.0, 1e-3, "110", pulse)
        assert ch.negative and ch.rate < 0

    def test_explicit_baseline(self, pulse):
        ch = leakage_channel(GAP, 0.0, 0.01, "000", pulse, baseline=0.0)
        assert ch.rate > leakage_rate(GAP, 0.0, 0.01, "000", pulse)

    def test_validation(self, pulse):
        with pytest.raises(ValidationError):
            leakage_rate(GAP, 0.0, -1e-3, "000", pulse)
        with pytest.raises(ValidationError):
            LeakageChannel((0, 0, 0), 0.1, 0.0, -1e-6, negative=False)
        LeakageChannel((0, 0, 0), 0.1, 0.0, -1e-13, negative=False)


class TestBuckets:
    @pytest.mark.parametrize("rate,expected", [(0.0, 0), (9.9e-6, 0), (1e-5, 1), (5e-5, 1), (1e-4, 2),
                                               (1e-3, 3), (0.5, 3)])
    def test_edges(self, rate, expected):
        assert bucket(rate) == expected

    def test_nan(self):
        assert math.isnan(bucket(math.nan))


def test_source_names():
    assert source_name("|110>") == "110"
    assert source_name((1, 1, 1)) == "111"


def test_calibrated_pulse_matches_frozen():
    p = calibrated_pulse(GAP, 66.0)
    # equal to the optimizer's x tolerance, so other BLAS builds may differ in the last digits
    assert p.amplitude == pytest.approx(PULSE.amplitude, abs=1e-6)
    assert p.detuning == pytest.approx(PULSE.detuning, abs=1e-6)


class TestMap:
    def test_small_map(self, pulse):
        res = leakage_map(GAP, (0.0, 1e-2), (-0.05, 0.0), sources=("000", "110"), pulse=pulse, threads=1)
        assert res.shape == (2, 2)
        np.testing.assert_array_equal(res.values["rate_000"][0], [0.0, 0.0])
        assert res.values["rate_000"][1, 1] == pytest.approx(leakage_rate(GAP, 0.0, 1e-2, "000", pulse), rel=1e-12)
        assert res.values["bucket_000"][1, 1] == bucket(res.values["rate_000"][1, 1])
        assert res.metadata["sources"] == ["000", "110"]
        assert res.metadata["pulse"]["amplitude_ghz"] == pulse.amplitude

    def test_validation(self, pulse):
        with pytest.raises(ValidationError):
            leakage_map(GAP, (), (0.0,), pulse=pulse)
        with pytest.raises(ValidationError):
            leakage_map(GAP, (-1.0,), (0.0,), pulse=pulse)
        with pytest.raises(ValidationError):
            leakage_map(GAP, (0.1,), (0.0,), sources=(), pulse=pulse)


class TestResonanceMargin:
    def test_resonance_hit(self):
        assert czz_resonance_margin(7.0, 6.5, 3.0, 3.5) == pytest.approx(0.0)

    def test_margin_value(self):
        assert czz_resonance_margin(7.0, 6.2, 3.0, 3.5) == pytest.approx(0.3)

    def test_positive_frequencies(self):
        with pytest.raises(ValidationError, match="f_Q_12"):
            czz_resonance_margin(7.0, 6.2, 3.0, 0.0)
