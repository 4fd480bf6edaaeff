"""
Prosody Features

F0 tracking and the classical speech features: intensity, energies,
zero-crossing measures, loudness and crest factor.

The pitch tracker generates candidates from the normalized
cross-correlation function (NCCF) of each frame and picks one per frame
with dynamic programming that penalizes octave jumps.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import pyloudnorm
from pydantic import BaseModel, Field
from pyloudnorm.iirfilter import IIRfilter
from scipy.signal import fftconvolve

from audio_core import (
    DEFAULT_FRAME_LENGTH_S,
    DEFAULT_HOP_LENGTH_S,
    EPSILON,
    TimeSeries,
    Waveform,
    frame_samples,
    frame_signal,
    seconds_to_samples,
)
from feature_errors import InvalidParameter, NoVoicedFrames, SignalTooShort, TooShortForLoudness

logger = logging.getLogger(__name__)

DEFAULT_F0_MIN = 60.0
DEFAULT_F0_MAX = 500.0
VOICING_THRESHOLD = 0.3
SILENCE_THRESHOLD_DB = 60.0
LAG_WEIGHT = 0.3
OCTAVE_COST = 0.5
MAX_CANDIDATES = 5

LOUDNESS_BLOCK_S = 0.4
LOUDNESS_STEP_S = 0.1
# BS.1770 offset for K-weighted mean square to LKFS
LOUDNESS_OFFSET = -0.691


# ============================
# Result Types
# ============================

@dataclass(frozen=True, eq=False)
class F0Contour:
    """Per-frame F0 in Hz; 0 marks an unvoiced frame."""

    values: np.ndarray
    voiced_mask: np.ndarray
    hop_length: int
    frame_length: int
    sample_rate: int
    f0_min: float = DEFAULT_F0_MIN
    f0_max: float = DEFAULT_F0_MAX

    @property
    def frame_count(self) -> int:
        return int(self.values.shape[0])

    @property
    def voiced_count(self) -> int:
        return int(np.count_nonzero(self.voiced_mask))

    def voiced_values(self) -> np.ndarray:
        return self.values[self.voiced_mask]

    def as_series(self) -> TimeSeries:
        """Contour as a time series with unvoiced frames missing."""
        return TimeSeries(
            name="f0_contour",
            values=np.where(self.voiced_mask, self.values, np.nan),
            hop_length=self.hop_length,
            sample_rate=self.sample_rate,
            units="Hz",
        )


class F0Statistics(BaseModel):
    mean: float = Field(..., description="Mean F0 over voiced frames (Hz)")
    sd: float = Field(..., description="Population standard deviation of voiced F0 (Hz)")


class ZeroCrossings(BaseModel):
    rate: float = Field(..., description="Sign changes per sample pair")
    count: int = Field(..., description="Number of sign changes", ge=0)


@dataclass(frozen=True, eq=False)
class LoudnessResult:
    integrated_loudness: float
    windowed_loudness: np.ndarray

    @property
    def variation(self) -> float:
        """Population SD of the ungated windowed loudness (dB)."""
        return float(np.std(self.windowed_loudness))


# ============================
# Pitch Tracking
# ============================

def normalized_cross_correlation(
    samples: np.ndarray,
    frame_length: int,
    hop_length: int,
    max_lag: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    NCCF of every frame for lags 0..max_lag+1.

    Returns (nccf, frame_energy): nccf is frames x (max_lag + 2), and
    frame_energy is the sum of squares of each reference window. A frame
    needs frame_length + max_lag + 1 samples, so the frame count can be
    smaller than plain framing gives.
    """
    span = frame_length + max_lag + 1
    if samples.shape[0] < span:
        raise SignalTooShort(
            f"Pitch analysis needs at least {span} samples, got {samples.shape[0]}"
        )

    segments = frame_samples(samples, span, hop_length)
    reference = segments[:, :frame_length]

    correlation = fftconvolve(segments, reference[:, ::-1], mode="valid", axes=1)

    squares = segments ** 2
    cumulative = np.concatenate([np.zeros((squares.shape[0], 1)), np.cumsum(squares, axis=1)], axis=1)
    lags = np.arange(max_lag + 2)
    lag_energy = np.maximum(cumulative[:, lags + frame_length] - cumulative[:, lags], 0.0)
    frame_energy = lag_energy[:, 0]

    denominator = np.sqrt(frame_energy[:, None] * lag_energy)
    nccf = np.divide(correlation, denominator, out=np.zeros_like(correlation), where=denominator > 0)
    return np.clip(nccf, -1.0, 1.0), frame_energy


def peak_candidates(
    nccf_row: np.ndarray,
    lag_min: int,
    lag_max: int,
    limit: int = MAX_CANDIDATES,
    lag_weight: float = LAG_WEIGHT
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Local NCCF maxima in [lag_min, lag_max], refined by parabolic interpolation.

    Returns (lags, peaks) for at most `limit` candidates, best first, where
    a peak's score is its height times (1 - lag_weight * lag / lag_max).
    Multiples of the period score below the period itself, so a tone with
    many near-equal peaks keeps its fundamental among the candidates.
    """
    lags = np.arange(max(lag_min, 1), lag_max + 1)
    centre = nccf_row[lags]
    left = nccf_row[lags - 1]
    right = nccf_row[lags + 1]
    is_peak = (centre >= left) & (centre > right) & (centre > 0)
    if not np.any(is_peak):
        return np.empty(0), np.empty(0)

    idx = np.flatnonzero(is_peak)
    score = centre[idx] * (1.0 - lag_weight * lags[idx] / lag_max)
    order = idx[np.argsort(-score, kind="stable")][:limit]
    a, b, c = left[order], centre[order], right[order]

    curvature = a - 2.0 * b + c
    delta = np.divide(0.5 * (a - c), curvature, out=np.zeros_like(b), where=curvature != 0)
    delta = np.clip(delta, -0.5, 0.5)
    refined_lags = lags[order] + delta
    refined_peaks = np.minimum(b - 0.25 * (a - c) * delta, 1.0)
    return refined_lags, refined_peaks


def _viterbi(candidate_lags: List[np.ndarray], local_costs: List[np.ndarray]) -> List[int]:
    """Minimum-cost candidate path; transitions cost OCTAVE_COST per octave jumped."""
    cost = local_costs[0].copy()
    pointers = []
    for t in range(1, len(candidate_lags)):
        jump = np.abs(np.log2(candidate_lags[t][:, None] / candidate_lags[t - 1][None, :]))
        total = cost[None, :] + OCTAVE_COST * jump
        best_previous = np.argmin(total, axis=1)
        cost = total[np.arange(best_previous.size), best_previous] + local_costs[t]
        pointers.append(best_previous)

    path = [int(np.argmin(cost))]
    for back in reversed(pointers):
        path.append(int(back[path[-1]]))
    return path[::-1]


def voiced_runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """[start, stop) index pairs of contiguous True runs."""
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return list(zip(edges[::2], edges[1::2]))


def track_f0(
    w: Waveform,
    f0_min: float = DEFAULT_F0_MIN,
    f0_max: float = DEFAULT_F0_MAX,
    frame_length_s: float = DEFAULT_FRAME_LENGTH_S,
    hop_length_s: float = DEFAULT_HOP_LENGTH_S,
    voicing_threshold: float = VOICING_THRESHOLD,
    silence_threshold_db: float = SILENCE_THRESHOLD_DB
) -> F0Contour:
    """
    Track F0 with NCCF candidates and octave-penalized DP smoothing.

    A frame is voiced when its strongest NCCF peak reaches
    voicing_threshold and its RMS is within silence_threshold_db of the
    loudest frame. Voiced values lie in [f0_min, f0_max].
    """
    sr = w.sample_rate
    if not 0 < f0_min < f0_max < sr / 2.0:
        raise InvalidParameter(f"Need 0 < f0_min < f0_max < {sr / 2.0}, got {f0_min}, {f0_max}")

    frame_length = seconds_to_samples(frame_length_s, sr)
    hop_length = seconds_to_samples(hop_length_s, sr)
    lag_min = int(np.floor(sr / f0_max))
    lag_max = int(np.ceil(sr / f0_min))

    nccf, frame_energy = normalized_cross_correlation(w.samples, frame_length, hop_length, lag_max)
    frame_rms = np.sqrt(frame_energy / frame_length)
    loudest = float(frame_rms.max())
    energy_floor = loudest * 10.0 ** (-silence_threshold_db / 20.0)

    n_frames = nccf.shape[0]
    candidate_lags: List[np.ndarray] = []
    local_costs: List[np.ndarray] = []
    voiced = np.zeros(n_frames, dtype=bool)

    for t in range(n_frames):
        lags, peaks = peak_candidates(nccf[t], lag_min, lag_max)
        candidate_lags.append(lags)
        local_costs.append(1.0 - peaks * (1.0 - LAG_WEIGHT * lags / lag_max))
        voiced[t] = (
            loudest > 0
            and peaks.size > 0
            and peaks.max() >= voicing_threshold
            and frame_rms[t] >= energy_floor
        )

    values = np.zeros(n_frames)
    for start, stop in voiced_runs(voiced):
        path = _viterbi(candidate_lags[start:stop], local_costs[start:stop])
        for offset, choice in enumerate(path):
            values[start + offset] = sr / candidate_lags[start + offset][choice]

    values[voiced] = np.clip(values[voiced], f0_min, f0_max)
    logger.debug(f"Tracked F0: {int(voiced.sum())}/{n_frames} voiced frames")

    return F0Contour(
        values=values,
        voiced_mask=voiced,
        hop_length=hop_length,
        frame_length=frame_length,
        sample_rate=sr,
        f0_min=f0_min,
        f0_max=f0_max,
    )


def f0_statistics(c: F0Contour) -> F0Statistics:
    """Mean and population SD of F0 over voiced frames."""
    voiced = c.voiced_values()
    if voiced.size == 0:
        raise NoVoicedFrames("F0 contour has no voiced frame")
    return F0Statistics(mean=float(np.mean(voiced)), sd=float(np.std(voiced)))


# ============================
# Energy and Zero Crossings
# ============================

def _frame_power(w: Waveform, frame_length_s: float, hop_length_s: float) -> Tuple[np.ndarray, int]:
    framed = frame_signal(w, frame_length_s, hop_length_s)
    return np.mean(framed.frames ** 2, axis=1), framed.hop_length


def intensity(
    w: Waveform,
    frame_length_s: float = DEFAULT_FRAME_LENGTH_S,
    hop_length_s: float = DEFAULT_HOP_LENGTH_S
) -> TimeSeries:
    """Per-frame mean squared amplitude."""
    power, hop = _frame_power(w, frame_length_s, hop_length_s)
    return TimeSeries(name="intensity", values=power, hop_length=hop, sample_rate=w.sample_rate)


def intensity_sd(
    w: Waveform,
    frame_length_s: float = DEFAULT_FRAME_LENGTH_S,
    hop_length_s: float = DEFAULT_HOP_LENGTH_S
) -> float:
    return float(np.std(intensity(w, frame_length_s, hop_length_s).values))


def rms(
    w: Waveform,
    frame_length_s: float = DEFAULT_FRAME_LENGTH_S,
    hop_length_s: float = DEFAULT_HOP_LENGTH_S
) -> TimeSeries:
    """Per-frame root mean square."""
    power, hop = _frame_power(w, frame_length_s, hop_length_s)
    return TimeSeries(name="rms", values=np.sqrt(power), hop_length=hop, sample_rate=w.sample_rate)


def log_energy(w: Waveform) -> float:
    """ln(mean square + eps) over the whole signal."""
    return float(np.log(np.mean(w.samples ** 2) + EPSILON))


def sliding_log_energy(
    w: Waveform,
    frame_length_s: float = DEFAULT_FRAME_LENGTH_S,
    hop_length_s: float = DEFAULT_HOP_LENGTH_S
) -> TimeSeries:
    power, hop = _frame_power(w, frame_length_s, hop_length_s)
    return TimeSeries(
        name="sliding_log_energy",
        values=np.log(power + EPSILON),
        hop_length=hop,
        sample_rate=w.sample_rate,
    )


def _sign_changes(samples: np.ndarray, axis: int = -1) -> np.ndarray:
    # Zero counts as positive
    positive = samples >= 0
    return np.count_nonzero(np.diff(positive, axis=axis), axis=axis)


def zero_crossings(w: Waveform) -> ZeroCrossings:
    """Sign changes between consecutive samples; rate = count / (N - 1)."""
    count = int(_sign_changes(w.samples))
    pairs = w.num_samples - 1
    return ZeroCrossings(rate=count / pairs if pairs > 0 else 0.0, count=count)


def sliding_zcr(
    w: Waveform,
    frame_length_s: float = DEFAULT_FRAME_LENGTH_S,
    hop_length_s: float = DEFAULT_HOP_LENGTH_S
) -> TimeSeries:
    framed = frame_signal(w, frame_length_s, hop_length_s)
    pairs = max(framed.frame_length - 1, 1)
    rate = _sign_changes(framed.frames, axis=1) / pairs
    return TimeSeries(name="sliding_zcr", values=rate, hop_length=framed.hop_length, sample_rate=w.sample_rate)


def crest_factor(
    w: Waveform,
    frame_length_s: float = DEFAULT_FRAME_LENGTH_S,
    hop_length_s: float = DEFAULT_HOP_LENGTH_S
) -> TimeSeries:
    """Per-frame peak |x| over RMS; silent frames are NaN."""
    framed = frame_signal(w, frame_length_s, hop_length_s)
    peak = np.max(np.abs(framed.frames), axis=1)
    frame_rms = np.sqrt(np.mean(framed.frames ** 2, axis=1))
    crest = np.divide(peak, frame_rms, out=np.full_like(peak, np.nan), where=frame_rms > 0)
    return TimeSeries(name="crest_factor", values=crest, hop_length=framed.hop_length, sample_rate=w.sample_rate)


# ============================
# Loudness (BS.1770-4)
# ============================

def k_weight(samples: np.ndarray, sample_rate: int) -> np.ndarray:
    """K-weighting pre-filter: high shelf then high pass, designed for sample_rate."""
    high_shelf = IIRfilter(4.0, 1 / np.sqrt(2), 1500.0, sample_rate, "high_shelf")
    high_pass = IIRfilter(0.0, 0.5, 38.0, sample_rate, "high_pass")
    return high_pass.apply_filter(high_shelf.apply_filter(samples))


def loudness(w: Waveform) -> LoudnessResult:
    """
    Gated integrated loudness plus ungated 400 ms windowed loudness (100 ms step).

    Digital silence yields -inf integrated loudness; callers treat that as missing.
    """
    block = seconds_to_samples(LOUDNESS_BLOCK_S, w.sample_rate)
    if w.num_samples < block:
        raise TooShortForLoudness(
            f"Loudness needs at least {LOUDNESS_BLOCK_S} s, got {w.duration:.3f} s"
        )

    meter = pyloudnorm.Meter(w.sample_rate, block_size=LOUDNESS_BLOCK_S)
    # Silence makes the gating average an empty slice
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        integrated = float(meter.integrated_loudness(np.array(w.samples)))

    weighted = k_weight(np.asarray(w.samples), w.sample_rate)
    blocks = frame_samples(weighted, block, seconds_to_samples(LOUDNESS_STEP_S, w.sample_rate))
    windowed = LOUDNESS_OFFSET + 10.0 * np.log10(np.mean(blocks ** 2, axis=1) + EPSILON)

    return LoudnessResult(integrated_loudness=integrated, windowed_loudness=windowed)
