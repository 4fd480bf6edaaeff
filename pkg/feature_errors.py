"""
Error Taxonomy for Audio Feature Extraction

Every failure the extractors can report has its own class so the pipeline
can log the class name as the event ``kind`` and keep going.
"""

from typing import Optional


class FeatureError(Exception):
    """Base class for all feature-extraction errors."""

    @property
    def kind(self) -> str:
        return type(self).__name__


# ============================
# Audio decoding and framing
# ============================

class UnsupportedFormat(FeatureError, ValueError):
    """Codec, container or bit depth not handled, or undecodable bytes."""


class EmptyAudio(FeatureError, ValueError):
    """Decoded audio holds zero samples."""


class SignalTooShort(FeatureError, ValueError):
    """Signal is shorter than the analysis requires."""


class InvalidParameter(FeatureError, ValueError):
    """An analysis parameter is out of its valid range."""


class InvalidBand(InvalidParameter):
    """Frequency band limits are inconsistent with the sample rate."""


class TooShortForLoudness(SignalTooShort):
    """Loudness needs at least one 400 ms gating block."""


# ============================
# Feature-level failures
# ============================

class NoVoicedFrames(FeatureError):
    """F0 contour has no voiced frame."""


class InsufficientVoicing(FeatureError):
    """Not enough voiced material for cycle-level analysis."""


class TooFewPeriods(FeatureError):
    """Period sequence too short for the requested perturbation measure."""


class DegenerateSignal(FeatureError):
    """Signal has no energy (zero autocorrelation, all-zero samples)."""


class TooFewResolvedFormants(FeatureError):
    """No analysis frame resolved a formant."""


class NonFiniteValue(FeatureError):
    """A component produced an infinite or NaN scalar."""


# ============================
# Configuration
# ============================

class ConfigError(FeatureError):
    """Base class for configuration problems."""


class ConfigSyntaxError(ConfigError):
    """Configuration file does not parse or does not follow the schema."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownComponent(ConfigError):
    """Component name not in the registered vocabulary."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Unknown component: {name!r}")


class UnknownStatistic(ConfigError):
    """Statistic identifier not in the registered vocabulary."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Unknown statistic: {name!r}")


class BadParameter(ConfigError):
    """Parameter override fails the component's parameter schema."""

    def __init__(self, component: str, detail: str):
        self.component = component
        super().__init__(f"Bad parameter for component {component!r}: {detail}")


# ============================
# Pipeline
# ============================

class DecodeFailure(FeatureError):
    """An input file could not be decoded; its row is all-missing."""


class NoAudioFound(FeatureError):
    """Directory scan found no file with a recognized audio extension."""


class LengthMismatch(FeatureError, ValueError):
    """Paired sequences differ in length."""


class DegenerateInput(FeatureError, ValueError):
    """Rank correlation input is constant or too short."""
