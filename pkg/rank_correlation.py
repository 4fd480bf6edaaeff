"""
Rank Correlation

Spearman's rho between two feature columns, used to compare feature sets
produced by different extractors or configurations.
"""

import logging
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
import scipy.stats
from pydantic import BaseModel, Field

from feature_errors import DegenerateInput, LengthMismatch
from pipeline import read_csv

logger = logging.getLogger(__name__)


class ColumnComparison(BaseModel):
    rho: float = Field(..., description="Spearman rank correlation")
    rows_compared: int = Field(..., description="Rows present in both columns")
    rows_dropped: int = Field(..., description="Rows missing from either side")


def spearman_rho(a: Sequence[float], b: Sequence[float]) -> float:
    """
    Pearson correlation of the ranks, ties sharing their average rank.

    Raises:
        LengthMismatch: sequences differ in length
        DegenerateInput: fewer than 2 values, a missing value, or a constant sequence
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise LengthMismatch(f"Sequences differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise DegenerateInput(f"Need at least 2 pairs, got {a.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DegenerateInput("Sequences contain missing or non-finite values")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DegenerateInput("Rank correlation of a constant sequence is undefined")

    rho = scipy.stats.spearmanr(a, b)[0]
    return float(np.clip(rho, -1.0, 1.0))


def parse_column_spec(spec: str) -> Tuple[str, Path]:
    """Split 'column@path.csv' into (column, path)."""
    column, sep, path = spec.partition("@")
    if not sep or not column or not path:
        raise ValueError(f"Expected <column>@<csv>, got {spec!r}")
    return column, Path(path)


def compare_columns(
    a_csv: Union[str, Path],
    a_column: str,
    b_csv: Union[str, Path],
    b_column: str
) -> ColumnComparison:
    """Align two CSV columns by file, drop rows missing on either side, then rank-correlate."""
    a_matrix, b_matrix = read_csv(a_csv), read_csv(b_csv)
    for matrix, column, path in ((a_matrix, a_column, a_csv), (b_matrix, b_column, b_csv)):
        if column not in matrix.column_names:
            raise ValueError(f"Column {column!r} not found in {path}")

    a_values = dict(zip(a_matrix.row_ids, a_matrix.column(a_column)))
    b_values = dict(zip(b_matrix.row_ids, b_matrix.column(b_column)))
    shared = [r for r in a_matrix.row_ids if r in b_values]
    paired = [(a_values[r], b_values[r]) for r in shared
              if np.isfinite(a_values[r]) and np.isfinite(b_values[r])]

    dropped = len(set(a_values) | set(b_values)) - len(paired)
    if dropped:
        logger.info(f"Dropped {dropped} rows missing from one side")

    a_series = [pair[0] for pair in paired]
    b_series = [pair[1] for pair in paired]
    return ColumnComparison(
        rho=spearman_rho(a_series, b_series),
        rows_compared=len(paired),
        rows_dropped=dropped,
    )
