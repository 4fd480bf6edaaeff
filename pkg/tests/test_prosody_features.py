"""
Unit tests for prosody_features.py

Pitch tracking, energies, zero crossings, crest factor and BS.1770 loudness.
"""

import numpy as np
import pytest

from audio_core import EPSILON, Waveform
from feature_errors import InvalidParameter, NoVoicedFrames, SignalTooShort, TooShortForLoudness
from prosody_features import (
    F0Contour,
    crest_factor,
    f0_statistics,
    intensity,
    intensity_sd,
    log_energy,
    loudness,
    rms,
    sliding_log_energy,
    sliding_zcr,
    track_f0,
    voiced_runs,
    zero_crossings,
)
from tests.signals import SR, gaussian_pulses, sine, sine_wave, square_wave, white_noise


def _contour(values, voiced=None):
    values = np.asarray(values, dtype=np.float64)
    voiced = values > 0 if voiced is None else np.asarray(voiced)
    return F0Contour(values=values, voiced_mask=voiced, hop_length=160, frame_length=400, sample_rate=SR)


class TestTrackF0:
    """Test the NCCF + dynamic-programming pitch tracker"""

    @pytest.mark.parametrize("freq", [80.0, 120.0, 220.0, 330.0, 440.0])
    def test_pure_tone(self, freq):
        contour = track_f0(sine_wave(freq, 2.0))

        assert contour.voiced_count == contour.frame_count
        within = np.abs(contour.values - freq) <= 2.0
        assert np.mean(within) >= 0.95

    def test_unvoiced_frames_are_zero(self):
        x = np.concatenate([sine(220.0, 0.5), np.zeros(SR // 2)])
        contour = track_f0(Waveform.from_array(x, SR))

        assert 0 < contour.voiced_count < contour.frame_count
        np.testing.assert_array_equal(contour.values == 0, ~contour.voiced_mask)
        voiced = contour.voiced_values()
        assert np.all((voiced >= contour.f0_min) & (voiced <= contour.f0_max))

    def test_silence_is_unvoiced(self):
        contour = track_f0(Waveform.from_array(np.zeros(SR), SR))

        assert contour.voiced_count == 0
        assert np.all(contour.values == 0)

    def test_pulse_train_not_octave_doubled(self):
        contour = track_f0(Waveform.from_array(gaussian_pulses(150.0, 1.0), SR))

        assert contour.voiced_count > 0
        assert 140.0 <= np.median(contour.voiced_values()) <= 160.0

    def test_custom_range(self):
        contour = track_f0(sine_wave(220.0, 1.0), f0_min=100.0, f0_max=300.0)

        assert contour.f0_min == 100.0
        assert np.median(contour.voiced_values()) == pytest.approx(220.0, abs=2.0)

    def test_invalid_range(self):
        with pytest.raises(InvalidParameter):
            track_f0(sine_wave(220.0), f0_min=300.0, f0_max=200.0)
        with pytest.raises(InvalidParameter):
            track_f0(sine_wave(220.0), f0_min=60.0, f0_max=9000.0)

    def test_too_short(self):
        with pytest.raises(SignalTooShort):
            track_f0(Waveform.from_array(sine(220.0, 0.02), SR))

    def test_series_marks_unvoiced_missing(self):
        series = _contour([0.0, 100.0, 0.0]).as_series()

        assert series.name == "f0_contour"
        assert np.isnan(series.values[0]) and np.isnan(series.values[2])
        assert series.values[1] == 100.0


class TestVoicedRuns:
    def test_runs(self):
        mask = np.array([False, True, True, False, True])
        assert voiced_runs(mask) == [(1, 3), (4, 5)]

    def test_no_runs(self):
        assert voiced_runs(np.zeros(4, dtype=bool)) == []


class TestF0Statistics:
    """Test mean and SD over voiced frames"""

    def test_constant_contour(self):
        stats = f0_statistics(_contour(np.full(50, 220.0)))
        assert stats.mean == 220.0
        assert stats.sd == 0.0

    def test_two_point_distribution(self):
        stats = f0_statistics(_contour([100.0, 200.0] * 10))
        assert stats.mean == pytest.approx(150.0)
        assert stats.sd == pytest.approx(50.0)

    def test_unvoiced_frames_ignored(self):
        stats = f0_statistics(_contour([0.0, 100.0, 0.0, 200.0]))
        assert stats.mean == pytest.approx(150.0)

    def test_all_unvoiced(self):
        with pytest.raises(NoVoicedFrames):
            f0_statistics(_contour(np.zeros(10)))


class TestEnergy:
    """Test intensity, RMS and log energy"""

    def test_constant_signal_intensity(self):
        w = Waveform.from_array(np.full(SR, 0.5), SR)

        np.testing.assert_allclose(intensity(w).values, 0.25)
        assert intensity_sd(w) == pytest.approx(0.0, abs=1e-15)

    def test_sine_power(self):
        np.testing.assert_allclose(intensity(sine_wave(200.0, 1.0, 0.5)).values, 0.125, rtol=0.01)

    def test_sine_rms(self):
        np.testing.assert_allclose(rms(sine_wave(400.0, 1.0, 0.5)).values, 0.5 / np.sqrt(2.0), rtol=0.01)

    def test_zero_signal_rms(self):
        assert np.all(rms(Waveform.from_array(np.zeros(SR), SR)).values == 0.0)

    def test_rms_squared_is_intensity(self):
        w = Waveform.from_array(white_noise(SR, seed=11), SR)
        np.testing.assert_allclose(rms(w).values ** 2, intensity(w).values, rtol=1e-9)

    def test_log_energy_square_wave(self):
        assert log_energy(Waveform.from_array(square_wave(100.0), SR)) == pytest.approx(0.0, abs=1e-9)

    def test_log_energy_sine(self):
        # 1 s of 100 Hz holds whole periods, so the mean square is exactly A^2 / 2
        assert log_energy(sine_wave(100.0, 1.0, 0.5)) == pytest.approx(np.log(0.125), abs=1e-6)

    def test_log_energy_silence(self):
        assert log_energy(Waveform.from_array(np.zeros(100), SR)) == pytest.approx(np.log(EPSILON))

    def test_sliding_log_energy(self):
        series = sliding_log_energy(Waveform.from_array(np.full(SR, 0.5), SR))
        np.testing.assert_allclose(series.values, np.log(0.25 + EPSILON))


class TestZeroCrossings:
    """Test zero-crossing counts and rates"""

    @pytest.mark.parametrize("freq", [100.0, 250.0, 1000.0])
    def test_sine_count(self, freq):
        crossings = zero_crossings(sine_wave(freq, 1.0))

        assert abs(crossings.count - 2 * freq) <= 2
        assert crossings.rate == pytest.approx(crossings.count / (SR - 1))

    def test_constant_signal(self):
        crossings = zero_crossings(Waveform.from_array(np.full(100, 0.3), SR))
        assert crossings.count == 0
        assert crossings.rate == 0.0

    def test_zero_counts_as_positive(self):
        crossings = zero_crossings(Waveform.from_array([-0.5, 0.0, 0.5, -0.5], SR))
        assert crossings.count == 2

    def test_single_sample(self):
        assert zero_crossings(Waveform.from_array([0.1], SR)).rate == 0.0

    @pytest.mark.parametrize("gain", [0.01, 0.3, 1.0])
    def test_amplitude_invariant(self, gain):
        x = white_noise(SR, seed=12)
        base = zero_crossings(Waveform.from_array(x, SR))
        scaled = zero_crossings(Waveform.from_array(gain * x, SR))

        assert scaled.count == base.count
        assert scaled.rate == base.rate

    def test_sliding_rate(self):
        rates = sliding_zcr(Waveform.from_array(square_wave(100.0), SR)).values
        # Flips every 80 samples; frames start on one, leaving 4 inside each frame
        np.testing.assert_allclose(rates, 4 / 399)


class TestCrestFactor:
    """Test per-frame peak over RMS"""

    def test_square_wave(self):
        np.testing.assert_allclose(crest_factor(Waveform.from_array(square_wave(100.0), SR)).values, 1.0)

    def test_sine(self):
        values = crest_factor(sine_wave(400.0, 1.0)).values
        assert np.mean(values) == pytest.approx(np.sqrt(2.0), rel=0.01)

    def test_silent_frames_missing(self):
        x = np.concatenate([np.zeros(SR // 2), sine(400.0, 0.5)])
        values = crest_factor(Waveform.from_array(x, SR)).values

        assert np.isnan(values[0])
        assert np.all(np.isfinite(values[-10:]))

    @pytest.mark.parametrize("gain", [0.1, 0.5])
    def test_gain_invariant(self, gain):
        x = white_noise(SR, seed=13)
        base = crest_factor(Waveform.from_array(x, SR)).values
        scaled = crest_factor(Waveform.from_array(gain * x, SR)).values
        np.testing.assert_allclose(scaled, base, rtol=1e-12)


class TestLoudness:
    """Test BS.1770 integrated loudness"""

    def test_calibration_tone(self):
        w = Waveform.from_array(sine(997.0, 5.0, 0.1, 48000), 48000)
        assert loudness(w).integrated_loudness == pytest.approx(-23.01, abs=0.1)

    @pytest.mark.parametrize("gain_db", [-30.0, -20.0, -10.0])
    def test_gain_equivariance(self, gain_db):
        x = sine(997.0, 5.0, 0.9, 48000)
        base = loudness(Waveform.from_array(x, 48000)).integrated_loudness
        scaled = loudness(Waveform.from_array(x * 10 ** (gain_db / 20.0), 48000)).integrated_loudness

        assert scaled - base == pytest.approx(gain_db, abs=0.05)

    def test_windowed_loudness(self):
        result = loudness(Waveform.from_array(sine(997.0, 2.0, 0.1, SR), SR))

        # 400 ms windows every 100 ms over 2 s
        assert result.windowed_loudness.shape == (17,)
        assert result.variation == pytest.approx(0.0, abs=0.05)
        assert result.integrated_loudness <= 0.0

    def test_too_short(self):
        with pytest.raises(TooShortForLoudness):
            loudness(Waveform.from_array(sine(997.0, 0.3), SR))
