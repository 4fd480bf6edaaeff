"""
Clinical Features

Voice-quality measures motivated by the clinical speech literature:
jitter and shimmer variants, pitch period entropy, detrended fluctuation
analysis, HNR, LPC/LSF, formants and amplitude statistics.

Cycle extraction picks waveform peaks at the F0-predicted spacing inside
voiced regions; it does not attempt waveform matching.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.signal
import scipy.stats
from pydantic import BaseModel, Field

from audio_core import (
    DEFAULT_FRAME_LENGTH_S,
    DEFAULT_HOP_LENGTH_S,
    TimeSeries,
    Waveform,
    WindowKind,
    apply_window,
    frame_signal,
    seconds_to_samples,
)
from feature_errors import (
    DegenerateSignal,
    InsufficientVoicing,
    InvalidParameter,
    NoVoicedFrames,
    SignalTooShort,
    TooFewPeriods,
    TooFewResolvedFormants,
)
from prosody_features import F0Contour, normalized_cross_correlation, peak_candidates, voiced_runs

logger = logging.getLogger(__name__)

MIN_VOICED_FRAMES = 3
PEAK_SPACING_FACTOR = 0.75
PPE_MIN_VOICED_FRAMES = 30
PPE_REFERENCE_HZ = 10.0
PPE_BINS = 30
PPE_SPAN_SEMITONES = 1.5
PPE_WHITENING_ORDER = 2
DFA_BOX_COUNT = 16
DFA_MIN_BOX = 4
HNR_CLAMP = 1e-6
PRE_EMPHASIS = 0.97
FORMANT_MIN_HZ = 90.0
FORMANT_MAX_BANDWIDTH_HZ = 400.0
FORMANT_COUNT = 4


# ============================
# Result Types
# ============================

@dataclass(frozen=True, eq=False)
class PeriodSequence:
    """Glottal cycle periods (seconds) with the peak amplitude that opens each cycle."""

    periods: np.ndarray
    cycle_peak_amplitudes: np.ndarray

    def __len__(self) -> int:
        return int(self.periods.shape[0])


class JitterSet(BaseModel):
    local: float = Field(..., description="Mean absolute period difference over mean period")
    local_absolute: float = Field(..., description="Mean absolute period difference (s)")
    rap: float = Field(..., description="Relative average perturbation (3-point)")
    ppq5: float = Field(..., description="5-point period perturbation quotient")
    ddp: float = Field(..., description="Difference of differences of periods (3 x rap)")


class ShimmerSet(BaseModel):
    local: float = Field(..., description="Mean absolute amplitude difference over mean amplitude")
    local_db: float = Field(..., description="Mean absolute amplitude ratio in dB")
    apq3: float = Field(..., description="3-point amplitude perturbation quotient")
    apq5: Optional[float] = Field(None, description="5-point quotient, None when fewer than 5 cycles")
    apq11: Optional[float] = Field(None, description="11-point quotient, None when fewer than 11 cycles")


@dataclass(frozen=True, eq=False)
class FormantSet:
    f1: float
    f2: float
    f3: float
    f4: float
    tracks: TimeSeries
    deltas: TimeSeries


@dataclass(frozen=True, eq=False)
class AmplitudeStats:
    shannon_entropy: float
    sliding_kurtosis: TimeSeries


# ============================
# Cycle Extraction
# ============================

def _refine_peaks(samples: np.ndarray, peaks: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Parabolic sub-sample position and height of each peak.

    A peak only gets the parabolic vertex when the signal rises into it and
    falls out of it over two samples on each side. Otherwise (an onset, a
    plateau or a region edge) it keeps its sample position and height.
    """
    last = samples.size - 1
    left2 = samples[np.maximum(peaks - 2, 0)]
    left = samples[np.maximum(peaks - 1, 0)]
    centre = samples[peaks]
    right = samples[np.minimum(peaks + 1, last)]
    right2 = samples[np.minimum(peaks + 2, last)]

    proper = (
        (peaks >= 2) & (peaks <= last - 2)
        & (left2 < left) & (left < centre) & (right < centre) & (right2 < right)
    )
    curvature = left - 2.0 * centre + right
    delta = np.divide(0.5 * (left - right), curvature, out=np.zeros_like(centre), where=proper & (curvature != 0))
    delta = np.clip(delta, -0.5, 0.5)
    return peaks + delta, centre - 0.25 * (left - right) * delta


def extract_periods(w: Waveform, c: F0Contour) -> PeriodSequence:
    """
    Cycle periods and amplitudes from voiced regions of the contour.

    Peaks are picked no closer than 0.75 of the shortest period the region's
    F0 predicts. A period is kept when it lies in (1/f0_max, 1/f0_min) and
    its ratio to the median candidate period of its region is strictly
    between 0.5 and 2. Adjacent regions share samples through the frame
    overlap; a peak already used by the previous region is not reused.
    """
    if c.voiced_count < MIN_VOICED_FRAMES:
        raise InsufficientVoicing(
            f"Need at least {MIN_VOICED_FRAMES} voiced frames, got {c.voiced_count}"
        )

    sr = w.sample_rate
    shortest, longest = 1.0 / c.f0_max, 1.0 / c.f0_min
    periods: List[float] = []
    amplitudes: List[float] = []
    used_until = -1

    for start, stop in voiced_runs(c.voiced_mask):
        first = start * c.hop_length
        last = min((stop - 1) * c.hop_length + c.frame_length, w.num_samples)
        region = w.samples[first:last]
        distance = max(1, int(PEAK_SPACING_FACTOR * sr / c.values[start:stop].max()))

        peaks, _ = scipy.signal.find_peaks(region, height=0.0, distance=distance)
        peaks = peaks[peaks + first > used_until]
        if peaks.size < 2:
            continue
        used_until = int(peaks[-1]) + first

        positions, heights = _refine_peaks(region, peaks)
        region_periods = np.diff(positions) / sr
        in_range = (region_periods > shortest) & (region_periods < longest) & (heights[:-1] > 0)
        if not np.any(in_range):
            continue

        reference = float(np.median(region_periods[in_range]))
        ratio = region_periods / reference
        keep = in_range & (ratio > 0.5) & (ratio < 2.0)
        dropped = int(np.count_nonzero(in_range & ~keep))
        if dropped:
            logger.debug(f"Dropped {dropped} outlier cycles in frames {start}-{stop}")

        periods.extend(float(v) for v in region_periods[keep])
        amplitudes.extend(float(v) for v in heights[:-1][keep])

    if not periods:
        raise InsufficientVoicing("No glottal cycle survived extraction")

    return PeriodSequence(periods=np.array(periods), cycle_peak_amplitudes=np.array(amplitudes))


# ============================
# Jitter and Shimmer
# ============================

def _perturbation_quotient(values: np.ndarray, points: int) -> float:
    """Mean |x_i - centred K-point mean| over the mean of x."""
    windows = np.lib.stride_tricks.sliding_window_view(values, points)
    centre = values[points // 2: values.size - points // 2]
    return float(np.mean(np.abs(centre - windows.mean(axis=1))) / np.mean(values))


def jitters(p: PeriodSequence) -> JitterSet:
    periods = np.asarray(p.periods, dtype=np.float64)
    if periods.size < 5:
        raise TooFewPeriods(f"Jitter needs at least 5 periods, got {periods.size}")

    mean_period = np.mean(periods)
    absolute = float(np.mean(np.abs(np.diff(periods))))
    ddp = float(np.mean(np.abs(np.diff(periods, n=2))) / mean_period)

    return JitterSet(
        local=absolute / mean_period,
        local_absolute=absolute,
        rap=ddp / 3.0,
        ppq5=_perturbation_quotient(periods, 5),
        ddp=ddp,
    )


def shimmers(p: PeriodSequence) -> ShimmerSet:
    amplitudes = np.asarray(p.cycle_peak_amplitudes, dtype=np.float64)
    if amplitudes.size < 3:
        raise TooFewPeriods(f"Shimmer needs at least 3 cycles, got {amplitudes.size}")

    local = float(np.mean(np.abs(np.diff(amplitudes))) / np.mean(amplitudes))
    local_db = float(np.mean(np.abs(20.0 * np.log10(amplitudes[1:] / amplitudes[:-1]))))

    return ShimmerSet(
        local=local,
        local_db=local_db,
        apq3=_perturbation_quotient(amplitudes, 3),
        apq5=_perturbation_quotient(amplitudes, 5) if amplitudes.size >= 5 else None,
        apq11=_perturbation_quotient(amplitudes, 11) if amplitudes.size >= 11 else None,
    )


# ============================
# Linear Prediction
# ============================

def levinson_durbin(r: Sequence[float], order: int) -> Tuple[np.ndarray, float, np.ndarray]:
    """
    Solve the autocorrelation normal equations.

    Returns (a, error, reflection) with a[0] == 1, so that
    x[t] ~ -sum(a[k] * x[t - k]). Recursion stops early (remaining
    coefficients 0) once the prediction error vanishes.
    """
    r = np.asarray(r, dtype=np.float64)
    if r[0] <= 0:
        raise DegenerateSignal("Zero autocorrelation: signal has no energy")

    a = np.zeros(order + 1)
    a[0] = 1.0
    reflection = np.zeros(order)
    error = float(r[0])

    for i in range(1, order + 1):
        if error <= 0:
            break
        acc = r[i] + np.dot(a[1:i], r[i - 1:0:-1])
        k = -acc / error
        previous = a.copy()
        a[1:i] = previous[1:i] + k * previous[i - 1:0:-1]
        a[i] = k
        reflection[i - 1] = k
        error *= 1.0 - k * k

    return a, max(error, 0.0), reflection


def lpc_coefficients(samples: np.ndarray, order: int) -> np.ndarray:
    """Autocorrelation-method LPC of a raw sample array."""
    if order < 1:
        raise InvalidParameter(f"LPC order must be >= 1, got {order}")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size <= order:
        raise SignalTooShort(f"LPC of order {order} needs more than {order} samples")
    full = scipy.signal.correlate(samples, samples, mode="full")
    r = full[samples.size - 1: samples.size + order]
    return levinson_durbin(r, order)[0]


def lpc(w: Waveform, order: int) -> np.ndarray:
    """LPC coefficients [1, a_1, ..., a_order] of the whole waveform."""
    return lpc_coefficients(w.samples, order)


def line_spectral_pairs(a: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Root angles in (0, pi) of the symmetric (P) and antisymmetric (Q)
    split polynomials, each sorted ascending.
    """
    a = np.asarray(a, dtype=np.float64)
    extended = np.concatenate([a, [0.0]])
    symmetric = extended + extended[::-1]
    antisymmetric = extended - extended[::-1]

    def angles(poly: np.ndarray) -> np.ndarray:
        theta = np.angle(np.roots(poly))
        eps = 1e-9
        return np.sort(theta[(theta > eps) & (theta < np.pi - eps)])

    return angles(symmetric), angles(antisymmetric)


def lsf(a: Sequence[float]) -> np.ndarray:
    """Line spectral frequencies in radians, ascending in (0, pi)."""
    p_angles, q_angles = line_spectral_pairs(a)
    return np.sort(np.concatenate([p_angles, q_angles]))


# ============================
# Pitch Period Entropy
# ============================

def histogram_entropy(values: np.ndarray, bins: int = PPE_BINS, span: float = PPE_SPAN_SEMITONES) -> float:
    """Shannon entropy of a histogram over [-span, span], normalized by ln(bins)."""
    clipped = np.clip(values, -span, span)
    counts, _ = np.histogram(clipped, bins=bins, range=(-span, span))
    prob = counts[counts > 0] / counts.sum()
    return float(-np.sum(prob * np.log(prob)) / np.log(bins))


def pitch_period_entropy(c: F0Contour) -> float:
    """
    Entropy of semitone-scale F0 after second-order LPC whitening.

    Voiced F0 becomes 12*log2(F0/10) with the mean removed. A contour with
    no variation has zero entropy.
    """
    voiced = c.voiced_values()
    if voiced.size < PPE_MIN_VOICED_FRAMES:
        raise InsufficientVoicing(
            f"Pitch period entropy needs {PPE_MIN_VOICED_FRAMES} voiced frames, got {voiced.size}"
        )

    semitones = 12.0 * np.log2(voiced / PPE_REFERENCE_HZ)
    semitones = semitones - semitones.mean()
    try:
        a = lpc_coefficients(semitones, PPE_WHITENING_ORDER)
    except DegenerateSignal:
        return 0.0

    residuals = scipy.signal.lfilter(a, [1.0], semitones)[PPE_WHITENING_ORDER:]
    return histogram_entropy(residuals)


# ============================
# Detrended Fluctuation Analysis
# ============================

def default_box_sizes(n_samples: int) -> np.ndarray:
    """Up to 16 log-spaced integer box sizes from 4 to N/4."""
    largest = n_samples // 4
    if largest < DFA_MIN_BOX + 1:
        raise SignalTooShort(f"DFA needs at least {4 * (DFA_MIN_BOX + 1)} samples, got {n_samples}")
    return np.unique(np.round(np.geomspace(DFA_MIN_BOX, largest, DFA_BOX_COUNT)).astype(int))


def fluctuation(profile: np.ndarray, box: int) -> float:
    """RMS residual of non-overlapping linear fits of the given box size."""
    count = profile.size // box
    boxes = profile[:count * box].reshape(count, box)
    t = np.arange(box) - (box - 1) / 2.0
    slopes = boxes @ t / np.sum(t ** 2)
    trend = boxes.mean(axis=1, keepdims=True) + slopes[:, None] * t[None, :]
    return float(np.sqrt(np.mean((boxes - trend) ** 2)))


def dfa(w: Waveform, box_sizes: Optional[Sequence[int]] = None) -> float:
    """Scaling exponent: slope of log F(n) against log n."""
    samples = w.samples
    sizes = default_box_sizes(samples.size) if box_sizes is None else np.asarray(box_sizes, dtype=int)
    if sizes.size < 2 or np.any(sizes < 2):
        raise InvalidParameter("DFA needs at least two box sizes >= 2")
    if samples.size < 4 * sizes.max():
        raise SignalTooShort(f"DFA needs N >= 4 x largest box ({4 * sizes.max()}), got {samples.size}")

    profile = np.cumsum(samples - samples.mean())
    fluctuations = np.array([fluctuation(profile, int(n)) for n in sizes])
    if np.any(fluctuations <= 0):
        raise DegenerateSignal("Zero fluctuation at some box size")

    return float(np.polyfit(np.log(sizes), np.log(fluctuations), 1)[0])


# ============================
# Harmonics-to-Noise Ratio
# ============================

def hnr(
    w: Waveform,
    c: F0Contour,
    frame_length_s: Optional[float] = None,
    hop_length_s: Optional[float] = None
) -> float:
    """
    Mean over voiced frames of 10*log10(r / (1 - r)), r the strongest NCCF
    peak in the pitch lag range clamped to [1e-6, 1 - 1e-6].

    Framing defaults to the contour's; other framings take voicing from
    the contour frame nearest in time.
    """
    if c.voiced_count == 0:
        raise NoVoicedFrames("HNR needs at least one voiced frame")

    sr = w.sample_rate
    frame_length = c.frame_length if frame_length_s is None else seconds_to_samples(frame_length_s, sr)
    hop_length = c.hop_length if hop_length_s is None else seconds_to_samples(hop_length_s, sr)
    lag_min = int(np.floor(sr / c.f0_max))
    lag_max = int(np.ceil(sr / c.f0_min))

    nccf, _ = normalized_cross_correlation(w.samples, frame_length, hop_length, lag_max)
    contour_index = np.round(np.arange(nccf.shape[0]) * hop_length / c.hop_length).astype(int)
    in_contour = contour_index < c.frame_count
    voiced_frames = np.flatnonzero(in_contour & c.voiced_mask[np.minimum(contour_index, c.frame_count - 1)])
    if voiced_frames.size == 0:
        raise NoVoicedFrames("No analysis frame maps to a voiced contour frame")

    ratios = []
    for t in voiced_frames:
        _, peaks = peak_candidates(nccf[t], lag_min, lag_max, lag_weight=0.0)
        r = peaks.max() if peaks.size else nccf[t, lag_min:lag_max + 1].max()
        r = float(np.clip(r, HNR_CLAMP, 1.0 - HNR_CLAMP))
        ratios.append(10.0 * np.log10(r / (1.0 - r)))
    return float(np.mean(ratios))


# ============================
# Formants
# ============================

def frame_formants(frame: np.ndarray, sample_rate: int, order: int) -> np.ndarray:
    """Up to four formant frequencies of one frame, NaN-padded."""
    emphasized = scipy.signal.lfilter([1.0, -PRE_EMPHASIS], [1.0], frame)
    windowed = apply_window(emphasized, WindowKind.HANN)
    result = np.full(FORMANT_COUNT, np.nan)
    try:
        a = lpc_coefficients(windowed, order)
    except DegenerateSignal:
        return result

    roots = np.roots(a)
    roots = roots[np.imag(roots) > 0]
    frequencies = np.angle(roots) * sample_rate / (2.0 * np.pi)
    bandwidths = -(sample_rate / np.pi) * np.log(np.abs(roots))
    keep = (frequencies > FORMANT_MIN_HZ) & (bandwidths < FORMANT_MAX_BANDWIDTH_HZ)
    resolved = np.sort(frequencies[keep])[:FORMANT_COUNT]
    result[:resolved.size] = resolved
    return result


def formants(
    w: Waveform,
    frame_length_s: float = DEFAULT_FRAME_LENGTH_S,
    hop_length_s: float = DEFAULT_HOP_LENGTH_S
) -> FormantSet:
    """F1-F4 tracks from per-frame LPC roots, their medians and first differences."""
    sr = w.sample_rate
    if sr < 8000:
        raise InvalidParameter(f"Formant analysis needs a sample rate >= 8 kHz, got {sr}")

    framed = frame_signal(w, frame_length_s, hop_length_s)
    order = 2 + int(round(sr / 1000.0))
    tracks = np.array([frame_formants(frame, sr, order) for frame in framed.frames])

    if np.all(np.isnan(tracks)):
        raise TooFewResolvedFormants("No frame resolved a formant")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        medians = np.nanmedian(tracks, axis=0)

    return FormantSet(
        f1=float(medians[0]),
        f2=float(medians[1]),
        f3=float(medians[2]),
        f4=float(medians[3]),
        tracks=TimeSeries(
            name="formant_tracks", values=tracks,
            hop_length=framed.hop_length, sample_rate=sr, units="Hz",
        ),
        deltas=TimeSeries(
            name="formant_deltas", values=np.diff(tracks, axis=0).reshape(-1, FORMANT_COUNT),
            hop_length=framed.hop_length, sample_rate=sr, units="Hz",
        ),
    )


# ============================
# Amplitude Statistics
# ============================

def amplitude_entropy(w: Waveform) -> float:
    """-sum(s ln s) with s_i = x_i^2 / sum(x^2)."""
    squares = w.samples ** 2
    total = squares.sum()
    if total <= 0:
        raise DegenerateSignal("Amplitude entropy of an all-zero signal")
    share = squares[squares > 0] / total
    return float(-np.sum(share * np.log(share)))


def sliding_amplitude_kurtosis(
    w: Waveform,
    frame_length_s: float = DEFAULT_FRAME_LENGTH_S,
    hop_length_s: float = DEFAULT_HOP_LENGTH_S
) -> TimeSeries:
    """Per-frame excess kurtosis of raw samples; constant frames are NaN."""
    framed = frame_signal(w, frame_length_s, hop_length_s)
    flat = np.var(framed.frames, axis=1) == 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        values = scipy.stats.kurtosis(framed.frames, axis=1, fisher=True, bias=True)
    values = np.where(flat, np.nan, values)
    return TimeSeries(
        name="amplitude_kurtosis", values=values,
        hop_length=framed.hop_length, sample_rate=w.sample_rate,
    )


def amplitude_stats(
    w: Waveform,
    frame_length_s: float = DEFAULT_FRAME_LENGTH_S,
    hop_length_s: float = DEFAULT_HOP_LENGTH_S
) -> AmplitudeStats:
    return AmplitudeStats(
        shannon_entropy=amplitude_entropy(w),
        sliding_kurtosis=sliding_amplitude_kurtosis(w, frame_length_s, hop_length_s),
    )
