"""
Component Registry

Maps configuration names to feature extractors. Every component declares
a pydantic parameter schema and a column layout that depends only on its
parameters (never on the audio), so CSV columns are stable across files.

Components that share expensive intermediates (the F0 contour, STFT
magnitudes, cycle periods) get them from a per-waveform ComponentContext.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Annotated, Any, Callable, Dict, List, Optional, Tuple, Type, Union

import numpy as np
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

import clinical_features as clinical
import prosody_features as prosody
import spectral_features as spectral
from audio_core import DEFAULT_FRAME_LENGTH_S, DEFAULT_HOP_LENGTH_S, TimeSeries, Waveform, WindowKind
from feature_errors import BadParameter, UnknownComponent
from feature_statistics import statistic_names

logger = logging.getLogger(__name__)

DEFAULT_LPC_ORDER = 12


class ComponentKind(str, Enum):
    SERIES = "series"
    SCALAR = "scalar"


# ============================
# Parameter Schemas
# ============================

def _require_power_of_two(v: int) -> int:
    if v < 2 or v & (v - 1):
        raise ValueError("n_fft must be a power of two >= 2")
    return v


FftSize = Annotated[int, AfterValidator(_require_power_of_two)]


class ComponentParams(BaseModel):
    """Base for parameter schemas: unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid", frozen=True)


class NoParams(ComponentParams):
    pass


class FrameParams(ComponentParams):
    frame_length_s: float = Field(DEFAULT_FRAME_LENGTH_S, gt=0, description="Frame length (s)")
    hop_length_s: float = Field(DEFAULT_HOP_LENGTH_S, gt=0, description="Hop between frames (s)")


class PitchParams(FrameParams):
    f0_min: float = Field(prosody.DEFAULT_F0_MIN, gt=0, description="Lowest F0 searched (Hz)")
    f0_max: float = Field(prosody.DEFAULT_F0_MAX, gt=0, description="Highest F0 searched (Hz)")

    @model_validator(mode="after")
    def check_range(self) -> "PitchParams":
        if self.f0_min >= self.f0_max:
            raise ValueError("f0_min must be below f0_max")
        return self


class StftParams(ComponentParams):
    n_fft: FftSize = Field(spectral.DEFAULT_N_FFT, description="FFT size (power of two)")
    hop: int = Field(spectral.DEFAULT_HOP, ge=1, description="Hop (samples)")
    window: WindowKind = Field(WindowKind.HANN, description="Analysis window")


class BarkParams(StftParams):
    pass


class MelParams(ComponentParams):
    n_fft: FftSize = Field(spectral.DEFAULT_N_FFT, description="FFT size (power of two)")
    hop: int = Field(spectral.DEFAULT_HOP, ge=1, description="Hop (samples)")
    n_mels: int = Field(spectral.DEFAULT_N_MELS, ge=2, description="Mel bands")
    fmin: float = Field(0.0, ge=0, description="Lowest filter edge (Hz)")
    fmax: Optional[float] = Field(None, gt=0, description="Highest filter edge (Hz), default Nyquist")


class MfccParams(MelParams):
    n_mfcc: int = Field(spectral.DEFAULT_N_MFCC, ge=1, description="Coefficients kept")

    @model_validator(mode="after")
    def check_n_mfcc(self) -> "MfccParams":
        if self.n_mfcc > self.n_mels:
            raise ValueError("n_mfcc must not exceed n_mels")
        return self


class ChromaParams(ComponentParams):
    n_fft: FftSize = Field(spectral.DEFAULT_CHROMA_N_FFT, description="FFT size (power of two)")
    hop: int = Field(spectral.DEFAULT_HOP, ge=1, description="Hop (samples)")
    n_chroma: int = Field(12, ge=1, description="Pitch classes")


class MorletParams(ComponentParams):
    widths: Optional[List[float]] = Field(None, min_length=1, description="Scales in samples")
    omega: float = Field(spectral.DEFAULT_MORLET_OMEGA, gt=0, description="Wavelet centre frequency")

    @field_validator("widths")
    @classmethod
    def positive_widths(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and any(width <= 0 for width in v):
            raise ValueError("widths must be positive")
        return v


class LpcParams(ComponentParams):
    order: int = Field(DEFAULT_LPC_ORDER, ge=1, le=64, description="Prediction order")


# ============================
# Per-waveform Context
# ============================

class ComponentContext:
    """Memoizes intermediates shared by the components of one waveform."""

    def __init__(self, waveform: Waveform):
        self.waveform = waveform
        self._cache: Dict[Tuple, Any] = {}

    def cached(self, key: Tuple, compute: Callable[[], Any]) -> Any:
        # Failures are cached too so every dependent component reports them
        if key not in self._cache:
            try:
                self._cache[key] = compute()
            except Exception as e:
                self._cache[key] = e
        value = self._cache[key]
        if isinstance(value, Exception):
            raise value
        return value

    def f0_contour(self, p: PitchParams) -> prosody.F0Contour:
        key = ("f0", p.f0_min, p.f0_max, p.frame_length_s, p.hop_length_s)
        return self.cached(key, lambda: prosody.track_f0(
            self.waveform, p.f0_min, p.f0_max, p.frame_length_s, p.hop_length_s
        ))

    def periods(self, p: PitchParams) -> clinical.PeriodSequence:
        key = ("periods", p.f0_min, p.f0_max, p.frame_length_s, p.hop_length_s)
        return self.cached(key, lambda: clinical.extract_periods(self.waveform, self.f0_contour(p)))

    def magnitude(self, p: StftParams) -> spectral.Spectrogram:
        key = ("stft", p.n_fft, p.hop, p.window.value)
        return self.cached(key, lambda: spectral.stft_magnitude(self.waveform, p.n_fft, p.hop, p.window))

    def descriptors(self, p: StftParams) -> Dict[str, TimeSeries]:
        key = ("descriptors", p.n_fft, p.hop, p.window.value)
        return self.cached(key, lambda: spectral.spectral_descriptors(self.magnitude(p)))

    def formants(self, p: FrameParams) -> clinical.FormantSet:
        key = ("formants", p.frame_length_s, p.hop_length_s)
        return self.cached(key, lambda: clinical.formants(self.waveform, p.frame_length_s, p.hop_length_s))

    def loudness(self) -> prosody.LoudnessResult:
        return self.cached(("loudness",), lambda: prosody.loudness(self.waveform))


# ============================
# Component Definition
# ============================

ScalarValues = Dict[str, Optional[float]]


@dataclass(frozen=True)
class Component:
    """
    One entry of the vocabulary.

    Series components return a TimeSeries whose width is dims(params).
    Scalar components return a mapping of field name to value (None when
    the value is legitimately absent); an empty field list means a single
    value stored under the key "".
    """

    name: str
    kind: ComponentKind
    params_model: Type[ComponentParams]
    compute: Callable[[ComponentContext, ComponentParams], Union[TimeSeries, ScalarValues]]
    description: str
    dims: Optional[Callable[[ComponentParams], int]] = None
    fields: Optional[Callable[[ComponentParams], List[str]]] = None
    vector: bool = False

    def parse_params(self, overrides: Optional[Dict[str, Any]] = None) -> ComponentParams:
        try:
            return self.params_model(**(overrides or {}))
        except ValidationError as e:
            details = "; ".join(
                f"{'.'.join(str(loc) for loc in err['loc']) or 'params'}: {err['msg']}"
                for err in e.errors()
            )
            raise BadParameter(self.name, details) from e
        except TypeError as e:
            raise BadParameter(self.name, str(e)) from e

    def scalar_fields(self, params: ComponentParams) -> List[str]:
        return self.fields(params) if self.fields else []

    def column_names(self, params: ComponentParams, statistics: List[str]) -> List[str]:
        """Columns this component contributes; series in passthrough mode contribute none."""
        if self.kind == ComponentKind.SCALAR:
            fields = self.scalar_fields(params)
            if not fields:
                return [self.name]
            return [f"{self.name}.{field}" for field in fields]
        if not statistics:
            return []
        return statistic_names(self.name, self.dims(params) if self.dims else 1, statistics, self.vector)


_REGISTRY: Dict[str, Component] = {}


def register(component: Component) -> Component:
    _REGISTRY[component.name] = component
    return component


def series_component(name: str, params_model: Type[ComponentParams], description: str,
                     dims: Optional[Callable[[Any], int]] = None):
    def decorator(fn):
        register(Component(
            name=name, kind=ComponentKind.SERIES, params_model=params_model,
            compute=fn, description=description, dims=dims, vector=dims is not None,
        ))
        return fn
    return decorator


def scalar_component(name: str, params_model: Type[ComponentParams], description: str,
                     fields: Optional[Callable[[Any], List[str]]] = None):
    def decorator(fn):
        register(Component(
            name=name, kind=ComponentKind.SCALAR, params_model=params_model,
            compute=fn, description=description, fields=fields,
        ))
        return fn
    return decorator


def get_component(name: str) -> Component:
    if name not in _REGISTRY:
        raise UnknownComponent(name)
    return _REGISTRY[name]


def component_names() -> List[str]:
    return list(_REGISTRY)


def describe_components() -> List[Dict[str, Any]]:
    """Vocabulary with defaults and parameter schemas, for the CLI and server."""
    described = []
    for component in _REGISTRY.values():
        defaults = component.params_model()
        described.append({
            "name": component.name,
            "kind": component.kind.value,
            "description": component.description,
            "defaults": defaults.model_dump(mode="json"),
            "schema": component.params_model.model_json_schema(),
            "dims": component.dims(defaults) if component.dims else 1,
            "fields": component.scalar_fields(defaults),
        })
    return described


def _single(value: float) -> ScalarValues:
    return {"": float(value)}


def _pad(values: np.ndarray, width: int) -> np.ndarray:
    """Right-pad (or truncate) the last axis with NaN to a fixed width."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] >= width:
        return values[..., :width]
    padding = np.full(values.shape[:-1] + (width - values.shape[-1],), np.nan)
    return np.concatenate([values, padding], axis=-1)


# ============================
# Spectral Components
# ============================

@series_component("magnitude_spectrum", StftParams, "STFT magnitude per bin",
                  dims=lambda p: p.n_fft // 2 + 1)
def _magnitude_spectrum(ctx: ComponentContext, p: StftParams) -> TimeSeries:
    return ctx.magnitude(p).as_series("magnitude_spectrum")


@series_component("log_melspec", MelParams, "Log mel spectrogram", dims=lambda p: p.n_mels)
def _log_melspec(ctx: ComponentContext, p: MelParams) -> TimeSeries:
    return spectral.log_mel_spectrogram(ctx.waveform, p.n_fft, p.hop, p.n_mels, p.fmin, p.fmax).as_series("log_melspec")


@series_component("mfcc", MfccParams, "Mel-frequency cepstral coefficients", dims=lambda p: p.n_mfcc)
def _mfcc(ctx: ComponentContext, p: MfccParams) -> TimeSeries:
    return spectral.mfcc(ctx.waveform, p.n_mfcc, p.n_fft, p.hop, p.n_mels, p.fmin, p.fmax)


@series_component("bark_spectrogram", BarkParams, "Critical-band power (bands above Nyquist missing)",
                  dims=lambda p: spectral.BARK_BAND_COUNT)
def _bark_spectrogram(ctx: ComponentContext, p: BarkParams) -> TimeSeries:
    bark = spectral.bark_spectrogram(ctx.waveform, p.n_fft, p.hop)
    return TimeSeries(
        name="bark_spectrogram",
        values=_pad(bark.values, spectral.BARK_BAND_COUNT),
        hop_length=bark.hop_length,
        sample_rate=bark.sample_rate,
    )


@series_component("chroma_stft", ChromaParams, "Chromagram from the STFT", dims=lambda p: p.n_chroma)
def _chroma_stft(ctx: ComponentContext, p: ChromaParams) -> TimeSeries:
    return spectral.chromagram_stft(ctx.waveform, p.n_fft, p.hop, p.n_chroma)


@series_component("morlet_cwt", MorletParams, "Real Morlet continuous wavelet transform",
                  dims=lambda p: len(p.widths) if p.widths else len(spectral.default_morlet_widths()))
def _morlet_cwt(ctx: ComponentContext, p: MorletParams) -> TimeSeries:
    return spectral.morlet_cwt(ctx.waveform, p.widths, p.omega)


def _register_descriptor(descriptor: str) -> None:
    def compute(ctx: ComponentContext, p: StftParams) -> TimeSeries:
        return ctx.descriptors(p)[descriptor]

    register(Component(
        name=f"spectral_{descriptor}",
        kind=ComponentKind.SERIES,
        params_model=StftParams,
        compute=compute,
        description=f"Spectral {descriptor} per frame",
    ))


for _descriptor in spectral.DESCRIPTOR_NAMES:
    _register_descriptor(_descriptor)


# ============================
# Prosody Components
# ============================

@series_component("f0_contour", PitchParams, "F0 per frame (unvoiced frames missing)")
def _f0_contour(ctx: ComponentContext, p: PitchParams) -> TimeSeries:
    return ctx.f0_contour(p).as_series()


@scalar_component("f0_statistics", PitchParams, "Mean and SD of voiced F0",
                  fields=lambda p: ["mean", "sd"])
def _f0_statistics(ctx: ComponentContext, p: PitchParams) -> ScalarValues:
    stats = prosody.f0_statistics(ctx.f0_contour(p))
    return {"mean": stats.mean, "sd": stats.sd}


@series_component("intensity", FrameParams, "Frame power")
def _intensity(ctx: ComponentContext, p: FrameParams) -> TimeSeries:
    return prosody.intensity(ctx.waveform, p.frame_length_s, p.hop_length_s)


@scalar_component("intensity_sd", FrameParams, "SD of frame power")
def _intensity_sd(ctx: ComponentContext, p: FrameParams) -> ScalarValues:
    return _single(prosody.intensity_sd(ctx.waveform, p.frame_length_s, p.hop_length_s))


@series_component("rms", FrameParams, "Frame root mean square")
def _rms(ctx: ComponentContext, p: FrameParams) -> TimeSeries:
    return prosody.rms(ctx.waveform, p.frame_length_s, p.hop_length_s)


@scalar_component("log_energy", NoParams, "Log mean square of the whole signal")
def _log_energy(ctx: ComponentContext, p: NoParams) -> ScalarValues:
    return _single(prosody.log_energy(ctx.waveform))


@series_component("sliding_log_energy", FrameParams, "Log mean square per frame")
def _sliding_log_energy(ctx: ComponentContext, p: FrameParams) -> TimeSeries:
    return prosody.sliding_log_energy(ctx.waveform, p.frame_length_s, p.hop_length_s)


@scalar_component("zero_crossings", NoParams, "Zero-crossing rate and count",
                  fields=lambda p: ["rate", "count"])
def _zero_crossings(ctx: ComponentContext, p: NoParams) -> ScalarValues:
    crossings = prosody.zero_crossings(ctx.waveform)
    return {"rate": crossings.rate, "count": float(crossings.count)}


@series_component("sliding_zcr", FrameParams, "Zero-crossing rate per frame")
def _sliding_zcr(ctx: ComponentContext, p: FrameParams) -> TimeSeries:
    return prosody.sliding_zcr(ctx.waveform, p.frame_length_s, p.hop_length_s)


@scalar_component("loudness", NoParams, "Integrated loudness (LUFS) and windowed loudness SD (dB)",
                  fields=lambda p: ["integrated", "variation"])
def _loudness(ctx: ComponentContext, p: NoParams) -> ScalarValues:
    result = ctx.loudness()
    return {"integrated": result.integrated_loudness, "variation": result.variation}


@series_component("crest_factor", FrameParams, "Peak over RMS per frame (silent frames missing)")
def _crest_factor(ctx: ComponentContext, p: FrameParams) -> TimeSeries:
    return prosody.crest_factor(ctx.waveform, p.frame_length_s, p.hop_length_s)


# ============================
# Clinical Components
# ============================

@scalar_component("jitters", PitchParams, "Jitter variants",
                  fields=lambda p: ["local", "local_absolute", "rap", "ppq5", "ddp"])
def _jitters(ctx: ComponentContext, p: PitchParams) -> ScalarValues:
    return clinical.jitters(ctx.periods(p)).model_dump()


@scalar_component("shimmers", PitchParams, "Shimmer variants",
                  fields=lambda p: ["local", "local_db", "apq3", "apq5", "apq11"])
def _shimmers(ctx: ComponentContext, p: PitchParams) -> ScalarValues:
    return clinical.shimmers(ctx.periods(p)).model_dump()


@scalar_component("ppe", PitchParams, "Pitch period entropy")
def _ppe(ctx: ComponentContext, p: PitchParams) -> ScalarValues:
    return _single(clinical.pitch_period_entropy(ctx.f0_contour(p)))


@scalar_component("dfa", NoParams, "Detrended fluctuation analysis exponent")
def _dfa(ctx: ComponentContext, p: NoParams) -> ScalarValues:
    return _single(clinical.dfa(ctx.waveform))


@scalar_component("hnr", PitchParams, "Harmonics-to-noise ratio (dB)")
def _hnr(ctx: ComponentContext, p: PitchParams) -> ScalarValues:
    return _single(clinical.hnr(ctx.waveform, ctx.f0_contour(p)))


@scalar_component("lpc", LpcParams, "Linear prediction coefficients a_1..a_p",
                  fields=lambda p: [f"a{k}" for k in range(1, p.order + 1)])
def _lpc(ctx: ComponentContext, p: LpcParams) -> ScalarValues:
    a = clinical.lpc(ctx.waveform, p.order)
    return {f"a{k}": float(a[k]) for k in range(1, p.order + 1)}


@scalar_component("lsf", LpcParams, "Line spectral frequencies (radians)",
                  fields=lambda p: [str(k) for k in range(p.order)])
def _lsf(ctx: ComponentContext, p: LpcParams) -> ScalarValues:
    frequencies = _pad(clinical.lsf(clinical.lpc(ctx.waveform, p.order)), p.order)
    return {str(k): float(frequencies[k]) for k in range(p.order)}


@scalar_component("formants", FrameParams, "Median F1-F4 (Hz)",
                  fields=lambda p: ["f1", "f2", "f3", "f4"])
def _formants(ctx: ComponentContext, p: FrameParams) -> ScalarValues:
    found = ctx.formants(p)
    return {"f1": found.f1, "f2": found.f2, "f3": found.f3, "f4": found.f4}


@series_component("formant_tracks", FrameParams, "Per-frame F1-F4 (Hz)",
                  dims=lambda p: clinical.FORMANT_COUNT)
def _formant_tracks(ctx: ComponentContext, p: FrameParams) -> TimeSeries:
    return ctx.formants(p).tracks


@series_component("formant_deltas", FrameParams, "First differences of the F1-F4 tracks",
                  dims=lambda p: clinical.FORMANT_COUNT)
def _formant_deltas(ctx: ComponentContext, p: FrameParams) -> TimeSeries:
    return ctx.formants(p).deltas


@scalar_component("amplitude_entropy", NoParams, "Shannon entropy of normalized sample energy")
def _amplitude_entropy(ctx: ComponentContext, p: NoParams) -> ScalarValues:
    return _single(clinical.amplitude_entropy(ctx.waveform))


@series_component("amplitude_kurtosis", FrameParams, "Excess kurtosis of samples per frame")
def _amplitude_kurtosis(ctx: ComponentContext, p: FrameParams) -> TimeSeries:
    return clinical.sliding_amplitude_kurtosis(ctx.waveform, p.frame_length_s, p.hop_length_s)
