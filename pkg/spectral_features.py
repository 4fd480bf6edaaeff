"""
Spectral Features

Time-frequency representations (STFT magnitude, log-mel, MFCC, Bark,
chroma, Morlet CWT) and the nine frame-level spectral descriptors.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import librosa
import numpy as np
import scipy.fft
from scipy.signal import convolve

from audio_core import (
    EPSILON,
    TimeSeries,
    Waveform,
    WindowKind,
    apply_window,
    frame_samples,
)
from feature_errors import InvalidBand, InvalidParameter, SignalTooShort

logger = logging.getLogger(__name__)

DEFAULT_N_FFT = 512
DEFAULT_HOP = 160
DEFAULT_N_MELS = 40
DEFAULT_N_MFCC = 13
DEFAULT_CHROMA_N_FFT = 2048
DEFAULT_MORLET_OMEGA = 5.0
ROLLOFF_FRACTION = 0.85

# Zwicker critical-band edges in Hz (24 bands)
BARK_BAND_EDGES = np.array([
    20, 100, 200, 300, 400, 510, 630, 770, 920, 1080, 1270, 1480, 1720,
    2000, 2320, 2700, 3150, 3700, 4400, 5300, 6400, 7700, 9500, 12000, 15500
], dtype=np.float64)
BARK_BAND_COUNT = len(BARK_BAND_EDGES) - 1

DESCRIPTOR_NAMES = (
    "slope", "flux", "entropy", "centroid", "spread",
    "skewness", "kurtosis", "flatness", "rolloff",
)
DESCRIPTOR_UNITS = {
    "slope": "1/Hz",
    "centroid": "Hz",
    "spread": "Hz",
    "rolloff": "Hz",
}


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """frames x bins values with the frequency of every bin."""

    values: np.ndarray
    bin_frequencies: np.ndarray
    hop_length: int
    sample_rate: int
    log_scaled: bool = False

    @property
    def frame_count(self) -> int:
        return int(self.values.shape[0])

    @property
    def bin_count(self) -> int:
        return int(self.values.shape[1])

    def as_series(self, name: str) -> TimeSeries:
        return TimeSeries(
            name=name,
            values=self.values,
            hop_length=self.hop_length,
            sample_rate=self.sample_rate,
        )


# Descriptor series are plain TimeSeries carrying the descriptor's units
SpectralDescriptorSeries = TimeSeries


def _check_fft_params(n_fft: int, hop: int) -> None:
    if n_fft < 2 or (n_fft & (n_fft - 1)) != 0:
        raise InvalidParameter(f"n_fft must be a power of two >= 2, got {n_fft}")
    if hop < 1:
        raise InvalidParameter(f"hop must be positive, got {hop}")


# ============================
# Representations
# ============================

def stft_magnitude(
    w: Waveform,
    n_fft: int = DEFAULT_N_FFT,
    hop: int = DEFAULT_HOP,
    window: Union[WindowKind, str] = WindowKind.HANN
) -> Spectrogram:
    """
    Magnitude of the windowed one-sided DFT, frames x (n_fft/2 + 1).

    Frames follow audio_core framing: no centering, no padding.
    """
    _check_fft_params(n_fft, hop)
    frames = frame_samples(w.samples, n_fft, hop)
    spectrum = scipy.fft.rfft(apply_window(frames, window), axis=1)
    return Spectrogram(
        values=np.abs(spectrum),
        bin_frequencies=scipy.fft.rfftfreq(n_fft, d=1.0 / w.sample_rate),
        hop_length=hop,
        sample_rate=w.sample_rate,
    )


def mel_filterbank(
    sample_rate: int,
    n_fft: int,
    n_mels: int,
    fmin: float = 0.0,
    fmax: Optional[float] = None
) -> np.ndarray:
    """Slaney-scale, area-normalized triangular filters, n_mels x (n_fft/2 + 1)."""
    nyquist = sample_rate / 2.0
    fmax = nyquist if fmax is None else fmax
    if n_mels < 2:
        raise InvalidParameter(f"n_mels must be >= 2, got {n_mels}")
    if not (0.0 <= fmin < fmax <= nyquist):
        raise InvalidBand(f"Need 0 <= fmin < fmax <= {nyquist}, got fmin={fmin}, fmax={fmax}")
    return librosa.filters.mel(
        sr=sample_rate, n_fft=n_fft, n_mels=n_mels,
        fmin=fmin, fmax=fmax, htk=False, norm="slaney",
    )


def log_mel_spectrogram(
    w: Waveform,
    n_fft: int = DEFAULT_N_FFT,
    hop: int = DEFAULT_HOP,
    n_mels: int = DEFAULT_N_MELS,
    fmin: float = 0.0,
    fmax: Optional[float] = None
) -> Spectrogram:
    """ln(mel-filterbank power + eps); bins are the mel band centers."""
    fmax = w.sample_rate / 2.0 if fmax is None else fmax
    filterbank = mel_filterbank(w.sample_rate, n_fft, n_mels, fmin, fmax)
    magnitude = stft_magnitude(w, n_fft, hop, WindowKind.HANN)

    mel_power = (magnitude.values ** 2) @ filterbank.T
    centers = librosa.mel_frequencies(n_mels=n_mels + 2, fmin=fmin, fmax=fmax, htk=False)[1:-1]
    return Spectrogram(
        values=np.log(mel_power + EPSILON),
        bin_frequencies=centers,
        hop_length=hop,
        sample_rate=w.sample_rate,
        log_scaled=True,
    )


def mfcc(
    w: Waveform,
    n_mfcc: int = DEFAULT_N_MFCC,
    n_fft: int = DEFAULT_N_FFT,
    hop: int = DEFAULT_HOP,
    n_mels: int = DEFAULT_N_MELS,
    fmin: float = 0.0,
    fmax: Optional[float] = None
) -> TimeSeries:
    """First n_mfcc orthonormal DCT-II coefficients of every log-mel frame."""
    if not 1 <= n_mfcc <= n_mels:
        raise InvalidParameter(f"n_mfcc must be in [1, n_mels={n_mels}], got {n_mfcc}")
    log_mel = log_mel_spectrogram(w, n_fft, hop, n_mels, fmin, fmax)
    coefficients = scipy.fft.dct(log_mel.values, type=2, norm="ortho", axis=1)[:, :n_mfcc]
    return TimeSeries(name="mfcc", values=coefficients, hop_length=hop, sample_rate=w.sample_rate)


def bark_band_edges(sample_rate: int) -> np.ndarray:
    """Zwicker edges of the bands that lie entirely below Nyquist."""
    nyquist = sample_rate / 2.0
    usable = int(np.searchsorted(BARK_BAND_EDGES, nyquist, side="right"))
    return BARK_BAND_EDGES[:usable]


def bark_spectrogram(
    w: Waveform,
    n_fft: int = DEFAULT_N_FFT,
    hop: int = DEFAULT_HOP
) -> Spectrogram:
    """STFT power summed over each critical band below Nyquist."""
    magnitude = stft_magnitude(w, n_fft, hop, WindowKind.HANN)
    edges = bark_band_edges(w.sample_rate)
    if len(edges) < 2:
        raise InvalidBand(f"No complete Bark band below Nyquist at {w.sample_rate} Hz")

    power = magnitude.values ** 2
    freqs = magnitude.bin_frequencies
    # bins x bands membership; a bin belongs to [lower, upper)
    membership = (freqs[:, None] >= edges[None, :-1]) & (freqs[:, None] < edges[None, 1:])
    bands = power @ membership.astype(np.float64)

    return Spectrogram(
        values=bands,
        bin_frequencies=0.5 * (edges[:-1] + edges[1:]),
        hop_length=hop,
        sample_rate=w.sample_rate,
    )


def chromagram_stft(
    w: Waveform,
    n_fft: int = DEFAULT_CHROMA_N_FFT,
    hop: int = DEFAULT_HOP,
    n_chroma: int = 12
) -> TimeSeries:
    """
    STFT power folded onto pitch classes, C first (A is index 9).

    Each frame is L2-normalized; all-zero frames stay all-zero.
    """
    if n_chroma < 1:
        raise InvalidParameter(f"n_chroma must be positive, got {n_chroma}")
    magnitude = stft_magnitude(w, n_fft, hop, WindowKind.HANN)
    filterbank = librosa.filters.chroma(sr=w.sample_rate, n_fft=n_fft, n_chroma=n_chroma, tuning=0.0)

    raw = (magnitude.values ** 2) @ filterbank.T
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    chroma = np.divide(raw, norms, out=np.zeros_like(raw), where=norms > 0)
    return TimeSeries(name="chroma_stft", values=chroma, hop_length=hop, sample_rate=w.sample_rate)


def morlet_wavelet(length: int, width: float, omega: float = DEFAULT_MORLET_OMEGA) -> np.ndarray:
    """Real part of the complex Morlet wavelet at scale width, centered in length samples."""
    x = (np.arange(length) - (length - 1.0) / 2.0) / width
    return np.cos(omega * x) * np.exp(-0.5 * x ** 2) * np.pi ** -0.25 * np.sqrt(1.0 / width)


def default_morlet_widths() -> np.ndarray:
    return np.geomspace(1.0, 256.0, 32)


def morlet_cwt(
    w: Waveform,
    widths: Optional[Sequence[float]] = None,
    omega: float = DEFAULT_MORLET_OMEGA
) -> TimeSeries:
    """
    Continuous wavelet transform with a real Morlet wavelet.

    Output is samples x widths ("same"-mode convolution per scale), so the
    series hop is one sample.
    """
    widths = default_morlet_widths() if widths is None else np.asarray(widths, dtype=np.float64)
    if widths.ndim != 1 or widths.size == 0 or np.any(widths <= 0):
        raise InvalidParameter("widths must be a non-empty sequence of positive scales")

    samples = w.samples
    if samples.size < 2:
        raise SignalTooShort("Morlet transform needs at least 2 samples")

    rows = []
    for width in widths:
        length = int(min(10 * width, samples.size))
        wavelet = morlet_wavelet(max(length, 1), width, omega)
        rows.append(convolve(samples, wavelet[::-1], mode="same"))

    return TimeSeries(
        name="morlet_cwt",
        values=np.stack(rows, axis=1),
        hop_length=1,
        sample_rate=w.sample_rate,
    )


# ============================
# Spectral Descriptors
# ============================

def _normalize_rows(values: np.ndarray, totals: np.ndarray) -> np.ndarray:
    return np.divide(values, totals[:, None], out=np.zeros_like(values), where=totals[:, None] > 0)


def spectral_descriptors(s: Spectrogram) -> Dict[str, SpectralDescriptorSeries]:
    """
    Per-frame descriptors of a magnitude spectrogram, keyed by descriptor name.

    Silent frames give: centroid, spread, skewness, kurtosis, slope,
    entropy and rolloff 0; flatness 1; flux by definition (distance of
    zero vectors).
    """
    if s.values.size == 0:
        raise InvalidParameter("Cannot describe an empty spectrogram")

    magnitude = np.asarray(s.values, dtype=np.float64)
    freqs = np.asarray(s.bin_frequencies, dtype=np.float64)
    totals = magnitude.sum(axis=1)
    silent = totals <= 0

    # Moments of the magnitude distribution over frequency
    weights = _normalize_rows(magnitude, totals)
    centroid = weights @ freqs
    deviation = freqs[None, :] - centroid[:, None]
    variance = np.sum(weights * deviation ** 2, axis=1)
    spread = np.sqrt(variance)
    has_spread = spread > 0
    safe_spread = np.where(has_spread, spread, 1.0)
    skewness = np.where(has_spread, np.sum(weights * deviation ** 3, axis=1) / safe_spread ** 3, 0.0)
    kurtosis = np.where(has_spread, np.sum(weights * deviation ** 4, axis=1) / safe_spread ** 4 - 3.0, 0.0)

    # Least-squares slope of magnitude against frequency
    freq_dev = freqs - freqs.mean()
    freq_ss = np.sum(freq_dev ** 2)
    if freq_ss > 0:
        slope = (magnitude - magnitude.mean(axis=1, keepdims=True)) @ freq_dev / freq_ss
    else:
        slope = np.zeros(magnitude.shape[0])

    flux = np.zeros(magnitude.shape[0])
    if magnitude.shape[0] > 1:
        flux[1:] = np.linalg.norm(np.diff(weights, axis=0), axis=1)

    power = magnitude ** 2
    power_dist = _normalize_rows(power, power.sum(axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(power_dist > 0, power_dist * np.log(power_dist), 0.0)
    entropy = -plogp.sum(axis=1)

    floored = np.maximum(power, EPSILON)
    flatness = np.exp(np.mean(np.log(floored), axis=1)) / np.mean(floored, axis=1)

    cumulative = np.cumsum(magnitude, axis=1)
    rolloff_index = np.argmax(cumulative >= ROLLOFF_FRACTION * totals[:, None], axis=1)
    rolloff = freqs[rolloff_index]

    for series in (centroid, spread, skewness, kurtosis, slope, entropy, rolloff):
        series[silent] = 0.0

    computed = {
        "slope": slope,
        "flux": flux,
        "entropy": entropy,
        "centroid": centroid,
        "spread": spread,
        "skewness": skewness,
        "kurtosis": kurtosis,
        "flatness": np.minimum(flatness, 1.0),
        "rolloff": rolloff,
    }
    return {
        name: TimeSeries(
            name=f"spectral_{name}",
            values=computed[name],
            hop_length=s.hop_length,
            sample_rate=s.sample_rate,
            units=DESCRIPTOR_UNITS.get(name),
        )
        for name in DESCRIPTOR_NAMES
    }
