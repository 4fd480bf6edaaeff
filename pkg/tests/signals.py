"""
Synthetic signals with known ground truth, shared by the test modules.
"""

from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.signal
import soundfile as sf

from audio_core import Waveform

SR = 16000


def sine(freq: float, duration: float = 1.0, amplitude: float = 0.5, sr: int = SR,
         phase: float = 0.0) -> np.ndarray:
    t = np.arange(int(round(duration * sr))) / sr
    return amplitude * np.sin(2.0 * np.pi * freq * t + phase)


def sine_wave(freq: float, duration: float = 1.0, amplitude: float = 0.5, sr: int = SR) -> Waveform:
    return Waveform.from_array(sine(freq, duration, amplitude, sr), sr)


def white_noise(n: int, seed: int, scale: float = 0.1) -> np.ndarray:
    x = np.random.default_rng(seed).normal(0.0, scale, n)
    return np.clip(x, -1.0, 1.0)


def random_walk(n: int, seed: int) -> np.ndarray:
    walk = np.cumsum(np.random.default_rng(seed).normal(0.0, 1.0, n))
    walk = walk - walk.mean()
    return walk / np.max(np.abs(walk))


def square_wave(freq: float, duration: float = 1.0, sr: int = SR) -> np.ndarray:
    """Full-scale +/-1 square wave starting high; sign flips every sr / (2 freq) samples."""
    n = np.arange(int(round(duration * sr)))
    half_cycles = np.floor(2.0 * freq * n / sr).astype(int)
    return np.where(half_cycles % 2 == 0, 1.0, -1.0)


def pulse_train(
    periods: Sequence[float],
    amplitudes: Sequence[float],
    sr: int = SR,
    lead_in: float = 0.005
) -> np.ndarray:
    """
    Cosine cycles with known periods (seconds) and peak amplitudes.

    Cycle i starts at a peak of height amplitudes[i] and lasts periods[i].
    The amplitude changes at the trough in the middle of each cycle, so
    both neighbours of a peak share its amplitude. Needs
    len(amplitudes) == len(periods) + 1 (the closing peak).
    """
    periods = np.asarray(periods, dtype=np.float64)
    amplitudes = np.asarray(amplitudes, dtype=np.float64)
    starts = lead_in + np.concatenate([[0.0], np.cumsum(periods)])
    total = starts[-1] + periods[-1] + lead_in
    t = np.arange(int(np.ceil(total * sr))) / sr
    x = np.zeros_like(t)

    for i, period in enumerate(periods):
        in_cycle = (t >= starts[i]) & (t < starts[i + 1])
        phase = (t[in_cycle] - starts[i]) / period
        amplitude = np.where(phase < 0.5, amplitudes[i], amplitudes[i + 1])
        x[in_cycle] = amplitude * np.cos(2.0 * np.pi * phase)

    # Closing half-cycle so the last peak is a true maximum
    tail = (t >= starts[-1]) & (t < starts[-1] + periods[-1] / 2.0)
    x[tail] = amplitudes[-1] * np.cos(2.0 * np.pi * (t[tail] - starts[-1]) / periods[-1])
    return x


def jittered_train(
    f0: float,
    cycles: int,
    period_jitter: float,
    amplitude_shimmer: float,
    seed: int,
    amplitude: float = 0.5
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gaussian period and amplitude perturbations; returns (signal, periods, amplitudes)."""
    rng = np.random.default_rng(seed)
    periods = (1.0 / f0) * (1.0 + period_jitter * rng.standard_normal(cycles))
    amplitudes = amplitude * (1.0 + amplitude_shimmer * rng.standard_normal(cycles + 1))
    amplitudes = np.clip(amplitudes, 0.05, 0.95)
    return pulse_train(periods, amplitudes), periods, amplitudes


def gaussian_pulses(f0: float, duration: float = 1.0, width_s: float = 0.0003,
                    amplitude: float = 0.8, sr: int = SR) -> np.ndarray:
    """Narrow pulses every 1/f0 seconds: strong harmonics at every multiple of f0."""
    t = np.arange(int(round(duration * sr))) / sr
    phase = np.mod(t, 1.0 / f0)
    distance = np.minimum(phase, 1.0 / f0 - phase)
    return amplitude * np.exp(-0.5 * (distance / width_s) ** 2)


def resonator_denominator(
    formants: Sequence[float],
    bandwidths: Sequence[float],
    sr: int = SR
) -> np.ndarray:
    """All-pole denominator with one conjugate pole pair per (frequency, bandwidth)."""
    denominator = np.array([1.0])
    for freq, bandwidth in zip(formants, bandwidths):
        radius = np.exp(-np.pi * bandwidth / sr)
        theta = 2.0 * np.pi * freq / sr
        denominator = np.convolve(denominator, [1.0, -2.0 * radius * np.cos(theta), radius ** 2])
    return denominator


def synthetic_vowel(
    f0: float,
    formants: Sequence[float] = (700.0, 1220.0, 2600.0),
    bandwidths: Sequence[float] = (130.0, 70.0, 160.0),
    duration: float = 1.0,
    sr: int = SR
) -> np.ndarray:
    """Impulse train at f0 through an all-pole resonator, scaled to 0.8 peak."""
    excitation = np.zeros(int(round(duration * sr)))
    excitation[(np.arange(0.0, duration, 1.0 / f0) * sr).astype(int)] = 1.0
    x = scipy.signal.lfilter([1.0], resonator_denominator(formants, bandwidths, sr), excitation)
    return 0.8 * x / np.max(np.abs(x))


def write_wav(
    path: Union[str, Path],
    samples: np.ndarray,
    sr: int = SR,
    subtype: Optional[str] = "PCM_16"
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), samples, sr, subtype=subtype)
    return path
