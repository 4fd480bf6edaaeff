"""
Local Storage for Passthrough Series

When a configuration asks for no statistics, series components are
emitted whole. Each (file, component) series is stored as a JSON file in
a directory: ~/.audio-features/series/ unless AUDIO_FEATURES_SERIES_DIR
or an explicit directory says otherwise.
"""

import json
import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional
from urllib.parse import quote

import numpy as np

from audio_core import TimeSeries

logger = logging.getLogger(__name__)

SERIES_DIR_ENV = "AUDIO_FEATURES_SERIES_DIR"


def series_id_for(row_id: str, component: str) -> str:
    """
    File-safe identifier for one file's series of one component.

    The row id is percent-encoded, so distinct row ids never share an
    identifier. Component names contain no ".", so the last "." separates
    the two parts.
    """
    return f"{quote(row_id, safe='')}.{component}"


def _to_json_values(values: np.ndarray) -> List[Any]:
    # JSON has no NaN; missing frames become null
    as_objects = values.astype(object)
    as_objects[~np.isfinite(values)] = None
    return as_objects.tolist()


def _from_json_values(values: List[Any]) -> np.ndarray:
    return np.array(values, dtype=np.float64)


class SeriesStore:
    """
    Manages local storage of passthrough time series.

    One JSON document per series with its values, frame hop, sample rate,
    component and source row.
    """

    def __init__(self, storage_dir: Optional[str] = None):
        """
        Initialize storage with directory path.

        Args:
            storage_dir: Custom storage directory, or None for
                        $AUDIO_FEATURES_SERIES_DIR or ~/.audio-features/series/
        """
        if storage_dir:
            self.storage_dir = Path(storage_dir).expanduser()
        elif os.getenv(SERIES_DIR_ENV):
            self.storage_dir = Path(os.environ[SERIES_DIR_ENV]).expanduser()
        else:
            self.storage_dir = Path.home() / ".audio-features" / "series"

        self.storage_dir.mkdir(parents=True, exist_ok=True)
        self._cache: Dict[str, TimeSeries] = {}

    def save_series(self, row_id: str, series: TimeSeries) -> str:
        """
        Save one series; returns its identifier.

        Args:
            row_id: Relative path of the source file
            series: The component's per-frame values
        """
        series_id = series_id_for(row_id, series.name)
        document = {
            "series_id": series_id,
            "row_id": row_id,
            "component": series.name,
            "hop_length": series.hop_length,
            "sample_rate": series.sample_rate,
            "units": series.units,
            "shape": list(series.values.shape),
            "created_at": datetime.now().isoformat(),
            "values": _to_json_values(series.values),
        }

        with open(self._get_file_path(series_id), "w", encoding="utf-8") as f:
            json.dump(document, f, allow_nan=False)

        self._cache[series_id] = series
        return series_id

    def load_series(self, series_id: str) -> Optional[TimeSeries]:
        """Load a stored series, or None if it does not exist or is unreadable."""
        if series_id in self._cache:
            return self._cache[series_id]

        file_path = self._get_file_path(series_id)
        if not file_path.exists():
            return None

        try:
            with open(file_path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except (json.JSONDecodeError, OSError) as e:
            logger.error(f"Error loading series {series_id}: {e}")
            return None

        values = _from_json_values(document["values"]).reshape(document["shape"])
        series = TimeSeries(
            name=document["component"],
            values=values,
            hop_length=document["hop_length"],
            sample_rate=document["sample_rate"],
            units=document.get("units"),
        )
        self._cache[series_id] = series
        return series

    def series_exists(self, series_id: str) -> bool:
        return self._get_file_path(series_id).exists()

    def list_series(self, component: Optional[str] = None, limit: Optional[int] = None) -> List[str]:
        """
        Stored series identifiers, sorted by name.

        Args:
            component: Only series of this component
            limit: Optional limit on the number returned
        """
        series_ids = sorted(f.stem for f in self.storage_dir.glob("*.json"))
        if component:
            series_ids = [s for s in series_ids if s.endswith(f".{component}")]
        if limit:
            series_ids = series_ids[:limit]
        return series_ids

    def delete_series(self, series_id: str) -> bool:
        """Delete a stored series; False if it was not there."""
        file_path = self._get_file_path(series_id)
        if not file_path.exists():
            return False

        try:
            file_path.unlink()
            self._cache.pop(series_id, None)
            return True
        except OSError as e:
            logger.error(f"Error deleting series {series_id}: {e}")
            return False

    def get_storage_stats(self) -> Dict[str, Any]:
        json_files = list(self.storage_dir.glob("*.json"))
        total_size = sum(f.stat().st_size for f in json_files)

        return {
            "total_series": len(json_files),
            "total_size_bytes": total_size,
            "total_size_mb": round(total_size / (1024 * 1024), 2),
            "storage_directory": str(self.storage_dir),
        }

    def _get_file_path(self, series_id: str) -> Path:
        return self.storage_dir / f"{series_id}.json"


# Singleton instance for easy access
_series_store: Optional[SeriesStore] = None


def get_series_store() -> SeriesStore:
    """
    Get the global SeriesStore instance.

    Creates it if it doesn't exist yet.
    """
    global _series_store
    if _series_store is None:
        _series_store = SeriesStore()
    return _series_store
