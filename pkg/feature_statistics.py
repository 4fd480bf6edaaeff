"""
Feature Statistics

Functionals that reduce a 1-D or 2-D TimeSeries to named scalars, plus
the passthrough used when a configuration asks for raw series.

Missing frames (NaN) are excluded from every statistic; the regression
statistics still use each remaining frame's original index.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.stats
from pydantic import BaseModel, Field

from audio_core import TimeSeries
from feature_errors import UnknownStatistic

logger = logging.getLogger(__name__)

STATISTICS = (
    "mean",
    "std",
    "skewness",
    "kurtosis",
    "min",
    "max",
    "range",
    "first_quartile",
    "median",
    "third_quartile",
    "iqr",
    "slope",
    "intercept",
    "mean_abs_delta",
    "std_delta",
    "mean_abs_delta2",
    "std_delta2",
)

# Accepted in configurations but not part of the default catalog
EXTRA_STATISTICS = ("mad",)

KNOWN_STATISTICS = STATISTICS + EXTRA_STATISTICS


class StatisticSet(BaseModel):
    """Named scalars from one series, dimension-major then statistic-minor."""

    component: str = Field(..., description="Component the series came from")
    statistics: List[str] = Field(..., description="Statistic identifiers applied")
    names: List[str] = Field(..., description="Feature name of every value")
    values: List[float] = Field(..., description="One value per name; NaN is missing")

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.names, self.values))


def validate_statistics(which: Optional[Sequence[str]]) -> List[str]:
    """Default to the full catalog; reject unknown identifiers."""
    if which is None:
        return list(STATISTICS)
    for name in which:
        if name not in KNOWN_STATISTICS:
            raise UnknownStatistic(name)
    return list(which)


def statistic_names(component: str, n_dims: int, which: Sequence[str], vector: bool) -> List[str]:
    """Column names for a series of n_dims dimensions."""
    if not vector:
        return [f"{component}.{stat}" for stat in which]
    return [f"{component}.{k}.{stat}" for k in range(n_dims) for stat in which]


def _difference_stats(diffs: np.ndarray) -> Dict[str, float]:
    usable = diffs[np.isfinite(diffs)]
    if usable.size == 0:
        return {"mean_abs": np.nan, "std": np.nan}
    return {"mean_abs": float(np.mean(np.abs(usable))), "std": float(np.std(usable))}


def column_statistics(values: np.ndarray) -> Dict[str, float]:
    """Every known statistic of one 1-D column (NaN where undefined)."""
    values = np.asarray(values, dtype=np.float64)
    present = np.flatnonzero(np.isfinite(values))
    result = {name: np.nan for name in KNOWN_STATISTICS}
    if present.size == 0:
        return result

    v = values[present]
    mean = float(np.mean(v))
    q1, median, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    result.update({
        "mean": mean,
        "std": float(np.std(v)),
        "min": float(np.min(v)),
        "max": float(np.max(v)),
        "range": float(np.ptp(v)),
        "first_quartile": float(q1),
        "median": float(median),
        "third_quartile": float(q3),
        "iqr": float(q3 - q1),
        "mad": float(np.median(np.abs(v - median))),
    })

    # Higher moments of a constant series are reported as 0
    if np.ptp(v) == 0:
        result["skewness"] = 0.0
        result["kurtosis"] = 0.0
    else:
        result["skewness"] = float(scipy.stats.skew(v, bias=True))
        result["kurtosis"] = float(scipy.stats.kurtosis(v, fisher=True, bias=True))

    if present.size >= 2:
        index = present.astype(np.float64)
        centred = index - index.mean()
        slope = float(np.dot(centred, v - mean) / np.dot(centred, centred))
        result["slope"] = slope
        result["intercept"] = mean - slope * float(index.mean())

    first = _difference_stats(np.diff(values, n=1))
    second = _difference_stats(np.diff(values, n=2)) if values.size >= 3 else _difference_stats(np.empty(0))
    result["mean_abs_delta"] = first["mean_abs"]
    result["std_delta"] = first["std"]
    result["mean_abs_delta2"] = second["mean_abs"]
    result["std_delta2"] = second["std"]
    return result


def apply_statistics(t: TimeSeries, which: Optional[Sequence[str]] = None) -> StatisticSet:
    """
    Reduce a series to scalars named `<component>.<stat>` (1-D) or
    `<component>.<k>.<stat>` (2-D, k zero-based).
    """
    which = validate_statistics(which)
    columns = [t.values] if not t.is_vector else [t.values[:, k] for k in range(t.n_dims)]

    values: List[float] = []
    for column in columns:
        computed = column_statistics(column)
        values.extend(computed[stat] for stat in which)

    return StatisticSet(
        component=t.name,
        statistics=which,
        names=statistic_names(t.name, t.n_dims, which, t.is_vector),
        values=values,
    )


def passthrough(t: TimeSeries) -> TimeSeries:
    """Identity: the pipeline emits the raw series instead of statistics."""
    return t
