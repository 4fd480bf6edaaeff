"""
Batch Extraction Pipeline

Runs a FeatureConfig over single files, in-memory waveforms or whole
directories, and turns the rows into a FeatureMatrix that can be imputed
and written as CSV.

Component failures never abort a row: the component's cells become
missing and a structured event is logged on the "audio_features.events"
logger, one JSON object per line.
"""

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from tqdm import tqdm

from audio_core import TimeSeries, Waveform, load_audio
from components import ComponentContext, ComponentKind
from feature_config import FeatureConfig, config_from_names
from feature_errors import DecodeFailure, FeatureError, NoAudioFound, NonFiniteValue
from feature_statistics import apply_statistics, passthrough
from series_store import SeriesStore

logger = logging.getLogger(__name__)

EVENT_LOGGER_NAME = "audio_features.events"
events_logger = logging.getLogger(EVENT_LOGGER_NAME)

AUDIO_EXTENSIONS = {".wav", ".flac"}
ROW_ID_COLUMN = "file"


# ============================
# Rows and Events
# ============================

class FeatureEvent(BaseModel):
    """One structured warning: which file, which component, what went wrong."""

    file: str = Field(..., description="Row identifier (relative path)")
    component: str = Field(..., description="Component name, empty for file-level events")
    kind: str = Field(..., description="Error class name")
    message: str = Field(..., description="Human-readable detail")

    def to_json(self) -> str:
        return json.dumps(self.model_dump(), ensure_ascii=False)


def log_event(event: FeatureEvent) -> None:
    events_logger.warning(event.to_json())


def _error_kind(error: Exception) -> str:
    return error.kind if isinstance(error, FeatureError) else type(error).__name__


@dataclass
class ExtractedRow:
    row_id: str
    values: List[float]
    events: List[FeatureEvent] = field(default_factory=list)
    series: Dict[str, TimeSeries] = field(default_factory=dict)


@dataclass(eq=False)
class FeatureMatrix:
    """Rows are input files, columns are named features; NaN is a missing cell."""

    row_ids: List[str]
    column_names: List[str]
    cells: np.ndarray

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.float64).reshape(len(self.row_ids), len(self.column_names))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.cells.shape

    def column(self, name: str) -> np.ndarray:
        return self.cells[:, self.column_names.index(name)]

    def row(self, row_id: str) -> Dict[str, float]:
        values = self.cells[self.row_ids.index(row_id)]
        return dict(zip(self.column_names, values.tolist()))

    def missing_count(self) -> int:
        return int(np.count_nonzero(np.isnan(self.cells)))

    def to_dataframe(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.cells, columns=self.column_names)
        frame.insert(0, ROW_ID_COLUMN, self.row_ids)
        return frame


# ============================
# Per-row Extraction
# ============================

def compute_row(w: Waveform, config: FeatureConfig, row_id: str) -> ExtractedRow:
    """Run every configured component on one waveform."""
    ctx = ComponentContext(w)
    row = ExtractedRow(row_id=row_id, values=[])

    for request in config.components:
        component = request.component
        names = request.column_names(config.statistics)

        try:
            result = component.compute(ctx, request.params)
        except Exception as e:
            row.values.extend([math.nan] * len(names))
            row.events.append(FeatureEvent(
                file=row_id, component=component.name, kind=_error_kind(e), message=str(e)
            ))
            continue

        if component.kind == ComponentKind.SERIES:
            if config.passthrough:
                row.series[component.name] = passthrough(result)
                continue
            raw = apply_statistics(result, config.statistics).values
        else:
            fields = component.scalar_fields(request.params) or [""]
            raw = [result.get(f) for f in fields]

        for name, value in zip(names, raw):
            # Undefined statistics are silently missing; other non-finite values are reported
            if value is None or (component.kind == ComponentKind.SERIES and math.isnan(value)):
                row.values.append(math.nan)
            elif not math.isfinite(value):
                row.values.append(math.nan)
                row.events.append(FeatureEvent(
                    file=row_id, component=component.name, kind=NonFiniteValue.__name__,
                    message=f"{name} = {value}"
                ))
            else:
                row.values.append(float(value))

    return row


def _extract_row(path: Path, row_id: str, config: FeatureConfig) -> ExtractedRow:
    """Decode one file and compute its row; decode failures yield an all-missing row."""
    try:
        w = load_audio(path, config.sample_rate)
    except (FeatureError, OSError) as e:
        return ExtractedRow(
            row_id=row_id,
            values=[math.nan] * len(config.column_names()),
            events=[FeatureEvent(
                file=row_id, component="", kind=DecodeFailure.__name__,
                message=f"{_error_kind(e)}: {e}"
            )],
        )
    return compute_row(w, config, row_id)


def _extract_task(task: Tuple[Path, str, FeatureConfig]) -> ExtractedRow:
    # Module-level so worker processes can unpickle it
    return _extract_row(*task)


def extract_file(
    path: Union[str, Path],
    config: FeatureConfig,
    row_id: Optional[str] = None
) -> Dict[str, float]:
    """
    Extract one file into a named feature row (NaN for missing cells).

    Events are logged; decode failures give an all-missing row.
    """
    path = Path(path)
    row = _extract_row(path, row_id or path.name, config)
    for event in row.events:
        log_event(event)
    return dict(zip(config.column_names(), row.values))


# ============================
# Directory Runs
# ============================

def scan_audio_files(directory: Union[str, Path]) -> List[Tuple[Path, str]]:
    """Recursive scan for .wav/.flac, as (path, relative posix id) sorted by id."""
    directory = Path(directory)
    found = [
        (path, path.relative_to(directory).as_posix())
        for path in directory.rglob("*")
        if path.is_file() and path.suffix.lower() in AUDIO_EXTENSIONS
    ]
    return sorted(found, key=lambda item: item[1])


def extract_directory(
    directory: Union[str, Path],
    config: FeatureConfig,
    n_jobs: Optional[int] = None,
    progress: bool = False,
    series_store: Optional[SeriesStore] = None
) -> FeatureMatrix:
    """
    One row per audio file under directory, ordered by relative path.

    The result (and the event log order) does not depend on n_jobs or on
    worker completion order.

    Raises:
        FileNotFoundError: directory does not exist
        NoAudioFound: no file with a recognized extension
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"Input directory not found: {directory}")

    logger.info(f"Scanning {directory}")
    files = scan_audio_files(directory)
    if not files:
        raise NoAudioFound(f"No .wav or .flac files under {directory}")

    jobs = n_jobs or config.n_jobs
    tasks = [(path, row_id, config) for path, row_id in files]
    logger.info(f"Extracting {len(tasks)} files with {jobs} worker(s)")

    if jobs <= 1:
        rows = [_extract_task(task) for task in tqdm(tasks, disable=not progress)]
    else:
        chunksize = max(1, len(tasks) // (jobs * 4))
        with Pool(processes=jobs) as pool:
            rows = list(tqdm(
                pool.imap_unordered(_extract_task, tasks, chunksize=chunksize),
                total=len(tasks),
                disable=not progress,
            ))

    rows.sort(key=lambda r: r.row_id)
    for row in rows:
        for event in row.events:
            log_event(event)
        if series_store is not None:
            for series in row.series.values():
                series_store.save_series(row.row_id, series)

    matrix = FeatureMatrix(
        row_ids=[r.row_id for r in rows],
        column_names=config.column_names(),
        cells=np.array([r.values for r in rows], dtype=np.float64),
    )
    logger.info(f"Extracted {len(rows)} rows, {matrix.missing_count()} missing cells")
    return matrix


def extract_features(
    waveforms: Iterable[Union[Waveform, str, Path]],
    components: Sequence[Union[str, Dict]],
    statistics: Optional[Sequence[str]] = None,
    row_ids: Optional[Sequence[str]] = None
) -> pd.DataFrame:
    """
    In-memory batch helper: one DataFrame row per waveform, same columns as the CSV.

    Paths are decoded with Waveform.from_file.
    """
    config = config_from_names(components, statistics)
    rows: List[ExtractedRow] = []
    for index, item in enumerate(waveforms):
        row_id = row_ids[index] if row_ids is not None else str(index)
        w = item if isinstance(item, Waveform) else Waveform.from_file(item)
        row = compute_row(w, config, row_id)
        for event in row.events:
            log_event(event)
        rows.append(row)

    return pd.DataFrame(
        [r.values for r in rows],
        columns=config.column_names(),
        index=pd.Index([r.row_id for r in rows], name=ROW_ID_COLUMN),
    )


# ============================
# Imputation and CSV
# ============================

def impute_column_means(m: FeatureMatrix) -> FeatureMatrix:
    """
    Replace missing cells with their column's mean over present cells.

    Columns with no present cell are filled with 0 and reported.
    """
    cells = m.cells.copy()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        means = np.nanmean(cells, axis=0) if cells.shape[0] else np.zeros(cells.shape[1])

    empty = np.isnan(means)
    if np.any(empty):
        columns = [m.column_names[i] for i in np.flatnonzero(empty)]
        logger.warning(f"All-missing columns filled with 0: {', '.join(columns)}")
        means = np.where(empty, 0.0, means)

    missing = np.isnan(cells)
    cells[missing] = np.take(means, np.nonzero(missing)[1])
    return FeatureMatrix(row_ids=list(m.row_ids), column_names=list(m.column_names), cells=cells)


def write_csv(m: FeatureMatrix, path: Union[str, Path]) -> None:
    """
    RFC 4180 CSV: header "file" + columns, CRLF line ends, UTF-8,
    17 significant digits, empty cell for missing.
    """
    path = Path(path)
    m.to_dataframe().to_csv(
        path,
        index=False,
        float_format="%.17g",
        na_rep="",
        lineterminator="\r\n",
        encoding="utf-8",
    )
    logger.info(f"Wrote {m.shape[0]}x{m.shape[1]} feature matrix to {path}")


def read_csv(path: Union[str, Path]) -> FeatureMatrix:
    """Parse a CSV written by write_csv; empty cells become missing."""
    frame = pd.read_csv(
        path,
        dtype={ROW_ID_COLUMN: str},
        keep_default_na=False,
        na_values=[""],
        float_precision="round_trip",
        encoding="utf-8",
    )
    if ROW_ID_COLUMN not in frame.columns:
        raise ValueError(f"{path} has no '{ROW_ID_COLUMN}' column")

    columns = [c for c in frame.columns if c != ROW_ID_COLUMN]
    return FeatureMatrix(
        row_ids=frame[ROW_ID_COLUMN].tolist(),
        column_names=columns,
        cells=frame[columns].to_numpy(dtype=np.float64),
    )
