import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehsas.errors import ConfigError
from ehsas.signals import (
    ChirpSpec,
    MultisineSpec,
    TestSignalSpec,
    chirp,
    excitation_band,
    multisine,
    multisine_frequencies,
    test_signal,
)


def zero_crossing_times(x, dt):
    """Linearly interpolated times of sign changes."""
    s = np.signbit(x)
    idx = np.flatnonzero(s[1:] != s[:-1])
    frac = x[idx] / (x[idx] - x[idx + 1])
    return dt * (idx + frac)


def local_frequency(times, t_at, count=6):
    """Frequency at ``t_at`` from a line through the half-period estimates of
    the ``count`` crossing intervals nearest to it."""
    mids = 0.5 * (times[1:] + times[:-1])
    freqs = 1.0 / (2.0 * np.diff(times))
    nearest = np.argsort(np.abs(mids - t_at))[:count]
    slope, intercept = np.polyfit(mids[nearest], freqs[nearest], 1)
    return slope * t_at + intercept


class TestBand:
    def test_scaling(self):
        assert excitation_band(10.0) == pytest.approx((1.0, 20.0))
        assert excitation_band(1.0) == pytest.approx((0.1, 2.0))

    @given(st.floats(1e-3, 1e4))
    def test_ratio(self, w):
        lo, hi = excitation_band(w)
        assert hi / lo == pytest.approx(20.0, rel=1e-12)

    def test_multisine_tones(self):
        assert multisine_frequencies(10.0) == pytest.approx([1.0, 5.0, 20.0])
        assert np.all(np.diff(multisine_frequencies(3.0)) > 0)

    @pytest.mark.parametrize("w", [0.0, -1.0])
    def test_invalid(self, w):
        with pytest.raises(ConfigError):
            excitation_band(w)
        with pytest.raises(ConfigError):
            multisine_frequencies(w)


class TestChirp:
    def test_starts_at_amplitude(self):
        x = chirp(ChirpSpec(9.0, 0.1, 2.0, 10.0, 1e-3))
        assert x.samples[0] == 9.0

    def test_sample_grid(self):
        x = chirp(ChirpSpec(1.0, 0.1, 1.0, 1.0, 0.3))
        np.testing.assert_allclose(x.times, [0.0, 0.3, 0.6, 0.9])

    def test_nyquist(self):
        with pytest.raises(ConfigError):
            ChirpSpec(1.0, 0.1, 20.0, 1.0, 0.05)

    def test_constant_frequency_is_sine(self):
        spec = ChirpSpec(2.0, 5.0, 5.0, 4.0, 1e-3)
        x = chirp(spec).samples[:-1]
        spectrum = np.abs(np.fft.rfft(x))
        freqs = np.fft.rfftfreq(x.size, 1e-3)
        assert freqs[np.argmax(spectrum)] == pytest.approx(5.0)
        # everything else is far below the peak
        assert np.sort(spectrum)[-2] < 1e-6 * spectrum.max()

    def test_endpoint_frequencies(self):
        f0, f1, T, dt = 0.5, 4.0, 20.0, 1e-4
        x = chirp(ChirpSpec(1.0, f0, f1, T, dt))
        z = zero_crossing_times(x.samples, dt)
        assert local_frequency(z, 0.0) == pytest.approx(f0, rel=0.02)
        assert local_frequency(z, T) == pytest.approx(f1, rel=0.02)

    def test_frequency_non_decreasing(self):
        x = chirp(ChirpSpec(1.0, 0.2, 3.0, 30.0, 1e-3))
        z = zero_crossing_times(x.samples, 1e-3)
        half_periods = np.diff(z)
        assert np.all(np.diff(half_periods) <= 1e-6)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.1, 10.0), st.floats(0.0, 2 * math.pi))
    def test_amplitude_bound(self, a, phase):
        x = chirp(ChirpSpec(a, 0.1, 2.0, 5.0, 0.01, phase))
        assert np.max(np.abs(x.samples)) <= a


class TestMultisine:
    def test_starts_at_zero(self):
        x = multisine(MultisineSpec(3.0, (1.0, 5.0, 20.0), 10.0, 1e-3))
        assert x.samples[0] == 0.0

    def test_single_tone(self):
        x = multisine(MultisineSpec(2.0, (3.0,), 5.0, 1e-3))
        np.testing.assert_allclose(x.samples, 2.0 * np.sin(3.0 * x.times), rtol=0, atol=1e-15)

    def test_three_peaks(self):
        w_bw = 2 * math.pi
        spec = MultisineSpec(1.0, tuple(multisine_frequencies(w_bw)), 100.0, 1e-3)
        x = multisine(spec).samples
        spectrum = np.abs(np.fft.rfft(x))
        freqs = 2 * math.pi * np.fft.rfftfreq(x.size, 1e-3)
        bin_width = freqs[1]
        top = np.sort(np.argsort(spectrum)[-3:])
        for found, target in zip(freqs[top], spec.frequencies):
            assert abs(found - target) <= bin_width
        # the fourth-largest bin is a leakage neighbour, not a separate peak
        peaks = [i for i in range(1, spectrum.size - 1)
                 if spectrum[i] > spectrum[i - 1] and spectrum[i] >= spectrum[i + 1]
                 and spectrum[i] > 0.05 * spectrum.max()]
        assert len(peaks) == 3

    def test_periodic_for_commensurate_tones(self):
        # tones 1, 2 and 3 rad/s repeat every 2 pi seconds
        dt = 2 * math.pi / 1000
        x = multisine(MultisineSpec(1.0, (1.0, 2.0, 3.0), 4 * math.pi, dt)).samples
        np.testing.assert_allclose(x[1000:2000], x[:1000], atol=1e-12)

    def test_amplitude_bound(self):
        x = multisine(MultisineSpec(3.0, (0.6, 3.1, 12.5), 50.0, 1e-3)).samples
        assert np.max(np.abs(x)) <= 9.0

    @pytest.mark.parametrize("freqs", [(), (1.0, 1.0), (-1.0,), (100.0,)])
    def test_invalid(self, freqs):
        with pytest.raises(ConfigError):
            MultisineSpec(1.0, freqs, 1.0, 0.05)


class TestTestSignals:
    def test_step(self):
        x = test_signal(TestSignalSpec("step", 1.0, 1.0, 0.1)).samples
        assert x[0] == 0.0
        assert np.all(x[1:] == 1.0)

    def test_square_blocks(self):
        f = 2.0
        x = test_signal(TestSignalSpec("square", 1.5, 2.0, 1 / (8 * f), frequency=f)).samples
        blocks = x[:32].reshape(-1, 4)
        assert np.all(blocks[0::2] == 1.5) and np.all(blocks[1::2] == -1.5)

    def test_triangular_zero_mean(self):
        x = test_signal(TestSignalSpec("triangular", 2.0, 4.0, 0.001, frequency=1.0)).samples
        assert abs(np.mean(x[:-1])) < 1e-12
        assert np.max(x) == pytest.approx(2.0) and np.min(x) == pytest.approx(-2.0)
        assert x[250] == pytest.approx(2.0)

    def test_sawtooth_ramp(self):
        x = test_signal(TestSignalSpec("sawtooth", 1.0, 1.0, 0.25, frequency=1.0)).samples
        np.testing.assert_allclose(x, [-1.0, -0.5, 0.0, 0.5, -1.0])

    def test_sine(self):
        x = test_signal(TestSignalSpec("sine", 3.0, 1.0, 0.01, frequency=2.0))
        np.testing.assert_allclose(x.samples, 3.0 * np.sin(4 * math.pi * x.times), atol=1e-14)

    def test_staircase(self):
        spec = TestSignalSpec("staircase", 2.0, 3.0, 0.5,
                              staircase_levels=((1.0, 0.5), (1.0, -2.0)))
        x = test_signal(spec).samples
        np.testing.assert_array_equal(x, [0.5, 0.5, -2.0, -2.0, -2.0, -2.0, -2.0])

    def test_staircase_needs_levels(self):
        with pytest.raises(ConfigError):
            TestSignalSpec("staircase", 1.0, 1.0, 0.1)

    @pytest.mark.parametrize("kind", ["sine", "square", "triangular", "sawtooth"])
    def test_periodic_needs_frequency(self, kind):
        with pytest.raises(ConfigError):
            TestSignalSpec(kind, 1.0, 1.0, 0.1)

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(["step", "sine", "square", "triangular", "sawtooth"]),
           st.floats(0.1, 10.0), st.floats(0.05, 5.0))
    def test_amplitude_bound(self, kind, a, f):
        x = test_signal(TestSignalSpec(kind, a, 2.0, 0.01, frequency=f)).samples
        assert np.all(np.isfinite(x))
        assert np.max(np.abs(x)) <= a * (1 + 1e-12)
