"""
Feature Configuration

Parses the YAML feature configuration into a validated FeatureConfig.

Schema:

    components:            # required, non-empty
      - mfcc               # bare name: default parameters
      - f0_statistics: {f0_min: 75, f0_max: 400}
    statistics: [mean, std]  # optional; absent = full catalog, [] = passthrough
    sample_rate: 16000       # optional pipeline-wide resample target
    n_jobs: 4                # optional worker count (default 1)
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, SerializeAsAny

from components import Component, ComponentKind, ComponentParams, get_component
from feature_errors import ConfigSyntaxError
from feature_statistics import STATISTICS, validate_statistics

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).with_name("default_config.yaml")
TOP_LEVEL_KEYS = {"components", "statistics", "sample_rate", "n_jobs"}


class ComponentRequest(BaseModel):
    """A component name with its validated parameters."""
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="Registered component name")
    params: SerializeAsAny[ComponentParams] = Field(..., description="Validated parameter set")

    @property
    def component(self) -> Component:
        return get_component(self.name)

    def column_names(self, statistics: List[str]) -> List[str]:
        return self.component.column_names(self.params, statistics)


class FeatureConfig(BaseModel):
    """Declarative selection of components and statistics."""

    components: List[ComponentRequest] = Field(..., min_length=1)
    statistics: List[str] = Field(default_factory=lambda: list(STATISTICS))
    sample_rate: Optional[int] = Field(None, gt=0, description="Resample every file to this rate")
    n_jobs: int = Field(1, ge=1, description="Worker processes for directory runs")

    @property
    def passthrough(self) -> bool:
        return not self.statistics

    def column_names(self) -> List[str]:
        """Ordered CSV columns: config order, then each component's layout."""
        names: List[str] = []
        for request in self.components:
            names.extend(request.column_names(self.statistics))
        return names

    def series_components(self) -> List[str]:
        return [r.name for r in self.components if r.component.kind == ComponentKind.SERIES]


def _line_of(lines: Sequence[str], needle: str) -> Optional[int]:
    """1-based line of the first occurrence of needle, if any."""
    for number, line in enumerate(lines, start=1):
        if needle in line:
            return number
    return None


def _parse_component_entry(entry: Any, lines: Sequence[str]) -> ComponentRequest:
    if isinstance(entry, str):
        name, overrides = entry, {}
    elif isinstance(entry, dict) and len(entry) == 1:
        name, overrides = next(iter(entry.items()))
        overrides = overrides or {}
        if not isinstance(overrides, dict):
            raise ConfigSyntaxError(
                f"parameters of component {name!r} must be a mapping", _line_of(lines, str(name))
            )
    else:
        raise ConfigSyntaxError(
            "each component must be a name or a single-key mapping of name to parameters",
            _line_of(lines, str(entry)[:20]) if entry is not None else None,
        )

    component = get_component(str(name))
    return ComponentRequest(name=component.name, params=component.parse_params(overrides))


def build_config(data: Any, lines: Sequence[str] = ()) -> FeatureConfig:
    """Validate an already-loaded mapping."""
    if not isinstance(data, dict):
        raise ConfigSyntaxError("configuration must be a mapping", 1 if lines else None)

    unknown = set(data) - TOP_LEVEL_KEYS
    if unknown:
        key = sorted(map(str, unknown))[0]
        raise ConfigSyntaxError(f"unknown top-level key {key!r}", _line_of(lines, key))

    entries = data.get("components")
    if not isinstance(entries, list) or not entries:
        raise ConfigSyntaxError("'components' must be a non-empty list", _line_of(lines, "components"))

    requests = [_parse_component_entry(entry, lines) for entry in entries]
    seen = set()
    for request in requests:
        if request.name in seen:
            raise ConfigSyntaxError(f"component {request.name!r} listed twice", _line_of(lines, request.name))
        seen.add(request.name)

    if "statistics" in data:
        raw = data["statistics"]
        if raw is None:
            raw = []
        if not isinstance(raw, list) or not all(isinstance(s, str) for s in raw):
            raise ConfigSyntaxError("'statistics' must be a list of names", _line_of(lines, "statistics"))
        statistics = validate_statistics(raw)
    else:
        statistics = list(STATISTICS)

    for key in ("sample_rate", "n_jobs"):
        value = data.get(key)
        if value is not None and (not isinstance(value, int) or isinstance(value, bool) or value < 1):
            raise ConfigSyntaxError(f"'{key}' must be a positive integer", _line_of(lines, key))

    return FeatureConfig(
        components=requests,
        statistics=statistics,
        sample_rate=data.get("sample_rate"),
        n_jobs=data.get("n_jobs") or 1,
    )


def parse_config(path: Union[str, Path]) -> FeatureConfig:
    """
    Load and validate a configuration file.

    Raises:
        FileNotFoundError: path does not exist
        ConfigSyntaxError: YAML or schema problem, with the line when known
        UnknownComponent / UnknownStatistic / BadParameter: vocabulary errors
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")

    text = path.read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigSyntaxError(problem, mark.line + 1 if mark is not None else None) from e

    config = build_config(data, text.splitlines())
    logger.info(
        f"Loaded config {path}: {len(config.components)} components, "
        f"{len(config.statistics)} statistics"
    )
    return config


def default_config() -> FeatureConfig:
    return parse_config(DEFAULT_CONFIG_PATH)


def config_from_names(
    components: Sequence[Union[str, Dict[str, Dict[str, Any]]]],
    statistics: Optional[Sequence[str]] = None,
    sample_rate: Optional[int] = None,
    n_jobs: int = 1
) -> FeatureConfig:
    """Build a config in code, with the same validation as the file path."""
    data: Dict[str, Any] = {"components": list(components), "n_jobs": n_jobs}
    if statistics is not None:
        data["statistics"] = list(statistics)
    if sample_rate is not None:
        data["sample_rate"] = sample_rate
    return build_config(data)
