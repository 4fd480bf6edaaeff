"""
Audio Core

Decoding, normalization, resampling, framing and windowing: the substrate
every feature module consumes.

Waveforms are mono, float64, full-scale normalized and read-only. Framing
never pads: a trailing remainder shorter than one frame is dropped.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from math import gcd
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import soundfile as sf
from scipy.signal import resample_poly
from scipy.signal import windows as scipy_windows

from feature_errors import EmptyAudio, InvalidParameter, SignalTooShort, UnsupportedFormat

logger = logging.getLogger(__name__)

# Floor applied before every logarithm and inside ratio features
EPSILON = 1e-10

DEFAULT_FRAME_LENGTH_S = 0.025
DEFAULT_HOP_LENGTH_S = 0.010

SUPPORTED_CONTAINERS = {"WAV", "WAVEX", "FLAC"}

# Integer subtypes are read left-justified into int32, so one divisor fits all
PCM_SUBTYPES = {"PCM_16": 16, "PCM_24": 24, "PCM_32": 32}
FLOAT_SUBTYPES = {"FLOAT", "DOUBLE"}
INT32_FULL_SCALE = 2.0 ** 31


class WindowKind(str, Enum):
    """Analysis window shapes."""
    HANN = "hann"
    HAMMING = "hamming"
    RECTANGULAR = "rectangular"


# ============================
# Domain Types
# ============================

@dataclass(frozen=True, eq=False)
class Waveform:
    """Immutable mono sample sequence with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidParameter(f"Waveform must be mono (1-D), got shape {samples.shape}")
        if samples.size == 0:
            raise EmptyAudio("Waveform has zero samples")
        if not np.all(np.isfinite(samples)):
            raise InvalidParameter("Waveform contains non-finite samples")
        if np.max(np.abs(samples)) > 1.0:
            raise InvalidParameter("Waveform samples must lie in [-1, 1]")
        if int(self.sample_rate) <= 0:
            raise InvalidParameter(f"sample_rate must be positive, got {self.sample_rate}")

        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def num_samples(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        """Duration in seconds."""
        return self.num_samples / self.sample_rate

    @classmethod
    def from_array(cls, samples, sample_rate: int) -> "Waveform":
        """Wrap an in-memory signal (already mono and full-scale normalized)."""
        return cls(samples=np.asarray(samples), sample_rate=sample_rate)

    @classmethod
    def from_file(
        cls,
        path: Union[str, Path],
        target_sample_rate: Optional[int] = None
    ) -> "Waveform":
        """Decode a WAV or FLAC file. See load_audio."""
        return load_audio(path, target_sample_rate)

    # ============================
    # Feature Methods
    # ============================
    # Thin delegates to the feature modules. Those modules import this one,
    # so each delegate imports at call time.

    def compute(self, component: str, **params):
        """Run one named component with parameter overrides, as a config entry would."""
        from components import ComponentContext, get_component

        entry = get_component(component)
        return entry.compute(ComponentContext(self), entry.parse_params(params))

    def stft(self, **kwargs):
        from spectral_features import stft_magnitude
        return stft_magnitude(self, **kwargs)

    def log_melspec(self, **kwargs):
        from spectral_features import log_mel_spectrogram
        return log_mel_spectrogram(self, **kwargs)

    def mfcc(self, **kwargs) -> "TimeSeries":
        from spectral_features import mfcc
        return mfcc(self, **kwargs)

    def spectral_descriptors(self, **kwargs):
        from spectral_features import spectral_descriptors, stft_magnitude
        return spectral_descriptors(stft_magnitude(self, **kwargs))

    def f0_contour(self, **kwargs):
        from prosody_features import track_f0
        return track_f0(self, **kwargs)

    def f0_statistics(self, **kwargs):
        from prosody_features import f0_statistics
        return f0_statistics(self.f0_contour(**kwargs))

    def rms(self, **kwargs) -> "TimeSeries":
        from prosody_features import rms
        return rms(self, **kwargs)

    def loudness(self):
        from prosody_features import loudness
        return loudness(self)

    def periods(self, **kwargs):
        """Glottal cycles; keyword arguments go to the F0 tracker."""
        from clinical_features import extract_periods
        return extract_periods(self, self.f0_contour(**kwargs))

    def jitters(self, **kwargs):
        from clinical_features import jitters
        return jitters(self.periods(**kwargs))

    def shimmers(self, **kwargs):
        from clinical_features import shimmers
        return shimmers(self.periods(**kwargs))

    def ppe(self, **kwargs) -> float:
        from clinical_features import pitch_period_entropy
        return pitch_period_entropy(self.f0_contour(**kwargs))

    def hnr(self, **kwargs) -> float:
        from clinical_features import hnr
        return hnr(self, self.f0_contour(**kwargs))

    def dfa(self, box_sizes: Optional[Sequence[int]] = None) -> float:
        from clinical_features import dfa
        return dfa(self, box_sizes)

    def lpc(self, order: int = 12) -> np.ndarray:
        from clinical_features import lpc
        return lpc(self, order)

    def formants(self, **kwargs):
        from clinical_features import formants
        return formants(self, **kwargs)


@dataclass(frozen=True, eq=False)
class FrameSequence:
    """Equal-length, possibly overlapping windows over a waveform."""

    frames: np.ndarray
    frame_length: int
    hop_length: int
    sample_rate: int

    @property
    def count(self) -> int:
        return int(self.frames.shape[0])

    def frame_starts(self) -> np.ndarray:
        """Start index (in samples) of every frame."""
        return np.arange(self.count) * self.hop_length


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """
    Named, uniformly sampled per-frame values.

    values is (frames,) for 1-D series or (frames, dims) for vector series
    such as MFCCs. NaN marks a missing frame (unvoiced, silent).
    """

    name: str
    values: np.ndarray
    hop_length: int
    sample_rate: int
    units: Optional[str] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim not in (1, 2):
            raise InvalidParameter(f"TimeSeries {self.name} must be 1-D or 2-D, got {values.ndim}-D")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def frame_count(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_dims(self) -> int:
        return 1 if self.values.ndim == 1 else int(self.values.shape[1])

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 2


# ============================
# Decoding
# ============================

def load_audio(
    path: Union[str, Path],
    target_sample_rate: Optional[int] = None
) -> Waveform:
    """
    Load a PCM WAV or FLAC file as a mono, full-scale normalized Waveform.

    Integer PCM is divided by 2^(bits-1). Channels are averaged. The file's
    native rate is kept unless target_sample_rate is given, in which case
    the signal is resampled with a polyphase filter.

    Raises:
        FileNotFoundError: path does not exist
        UnsupportedFormat: container, sample format or bytes not decodable
        EmptyAudio: file holds zero samples
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Audio file not found: {path}")

    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise UnsupportedFormat(f"Could not decode {path}: {e}") from e

    if info.format not in SUPPORTED_CONTAINERS:
        raise UnsupportedFormat(f"Unsupported container {info.format} in {path}")

    try:
        if info.subtype in PCM_SUBTYPES:
            data, rate = sf.read(str(path), dtype="int32", always_2d=True)
            data = data.astype(np.float64) / INT32_FULL_SCALE
        elif info.subtype in FLOAT_SUBTYPES:
            data, rate = sf.read(str(path), dtype="float64", always_2d=True)
        else:
            raise UnsupportedFormat(f"Unsupported sample format {info.subtype} in {path}")
    except RuntimeError as e:
        raise UnsupportedFormat(f"Could not decode {path}: {e}") from e

    if data.shape[0] == 0:
        raise EmptyAudio(f"No samples in {path}")

    samples = data.mean(axis=1)

    if info.subtype in FLOAT_SUBTYPES:
        if not np.all(np.isfinite(samples)):
            raise UnsupportedFormat(f"Non-finite float samples in {path}")
        peak = float(np.max(np.abs(samples)))
        if peak > 1.0:
            logger.warning(f"Clipping float samples above full scale (peak {peak:.3f}) in {path}")
            samples = np.clip(samples, -1.0, 1.0)

    if target_sample_rate is not None and target_sample_rate != rate:
        samples = resample(samples, rate, target_sample_rate)
        rate = target_sample_rate

    return Waveform(samples=samples, sample_rate=rate)


def resample(samples: np.ndarray, orig_sample_rate: int, target_sample_rate: int) -> np.ndarray:
    """Band-limited polyphase resampling; output clipped back to full scale."""
    if orig_sample_rate <= 0 or target_sample_rate <= 0:
        raise InvalidParameter("Sample rates must be positive")
    if orig_sample_rate == target_sample_rate:
        return np.asarray(samples, dtype=np.float64)

    divisor = gcd(int(orig_sample_rate), int(target_sample_rate))
    up = int(target_sample_rate) // divisor
    down = int(orig_sample_rate) // divisor
    resampled = resample_poly(np.asarray(samples, dtype=np.float64), up, down)
    return np.clip(resampled, -1.0, 1.0)


# ============================
# Framing
# ============================

def seconds_to_samples(seconds: float, sample_rate: int) -> int:
    """Convert a duration to a whole number of samples (at least 1)."""
    if seconds <= 0:
        raise InvalidParameter(f"Duration must be positive, got {seconds}")
    count = int(round(seconds * sample_rate))
    if count < 1:
        raise InvalidParameter(f"{seconds} s is shorter than one sample at {sample_rate} Hz")
    return count


def frame_samples(samples: np.ndarray, frame_length: int, hop_length: int) -> np.ndarray:
    """
    Read-only (frames x frame_length) view over contiguous samples.

    frame_count = floor((N - frame_length) / hop_length) + 1.
    """
    if frame_length < 1 or hop_length < 1:
        raise InvalidParameter(
            f"frame_length and hop_length must be positive, got {frame_length}, {hop_length}"
        )
    samples = np.asarray(samples)
    if samples.shape[0] < frame_length:
        raise SignalTooShort(
            f"Signal of {samples.shape[0]} samples is shorter than one frame ({frame_length})"
        )
    return np.lib.stride_tricks.sliding_window_view(samples, frame_length)[::hop_length]


def frame_signal(
    w: Waveform,
    frame_length_s: float = DEFAULT_FRAME_LENGTH_S,
    hop_length_s: float = DEFAULT_HOP_LENGTH_S
) -> FrameSequence:
    """Cut a waveform into frames; no zero-padding, no partial trailing frame."""
    frame_length = seconds_to_samples(frame_length_s, w.sample_rate)
    hop_length = seconds_to_samples(hop_length_s, w.sample_rate)
    frames = frame_samples(w.samples, frame_length, hop_length)
    return FrameSequence(
        frames=frames,
        frame_length=frame_length,
        hop_length=hop_length,
        sample_rate=w.sample_rate
    )


# ============================
# Windowing
# ============================

def window_function(kind: Union[WindowKind, str], length: int) -> np.ndarray:
    """Symmetric window of the given kind (Hann endpoints are exactly 0)."""
    kind = WindowKind(kind)
    if length < 1:
        raise InvalidParameter(f"Window length must be positive, got {length}")
    if kind == WindowKind.HANN:
        return scipy_windows.hann(length, sym=True)
    if kind == WindowKind.HAMMING:
        return scipy_windows.hamming(length, sym=True)
    return np.ones(length)


def apply_window(frame: np.ndarray, kind: Union[WindowKind, str] = WindowKind.HANN) -> np.ndarray:
    """
    Multiply a frame (or a stack of frames, along the last axis) by a window.

    Rectangular returns an unchanged copy.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size == 0 or frame.shape[-1] == 0:
        raise InvalidParameter("Cannot window an empty frame")
    return frame * window_function(kind, frame.shape[-1])
