#!/usr/bin/env python3
"""
Audio Features MCP Server

An MCP server that exposes clinical audio feature extraction: single files
to named feature rows, directories to CSV feature matrices, and the
component vocabulary for building configurations.
"""

import asyncio
import json
import logging
import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from mcp.server.fastmcp import FastMCP
from pydantic import BaseModel, ConfigDict, Field

from components import describe_components
from feature_config import DEFAULT_CONFIG_PATH, FeatureConfig, config_from_names, parse_config
from feature_statistics import EXTRA_STATISTICS, STATISTICS
from pipeline import extract_directory, extract_file, impute_column_means, write_csv
from series_store import get_series_store

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

load_dotenv()

CONFIG_ENV = "AUDIO_FEATURES_CONFIG"

# Initialize MCP server
mcp = FastMCP("audio_features_mcp")

# ============================
# Pydantic Models
# ============================

class OutputFormat(str, Enum):
    """Output format for tool responses."""
    MARKDOWN = "markdown"
    JSON = "json"

# ============================
# Input Models
# ============================

class ExtractFileInput(BaseModel):
    """Input model for single-file extraction."""
    model_config = ConfigDict(
        str_strip_whitespace=True,
        validate_assignment=True,
        extra='forbid'
    )

    path: str = Field(
        ...,
        description="Absolute path to a .wav or .flac file",
        min_length=1
    )
    components: Optional[List[str]] = Field(
        default=None,
        description="Component names to extract with default parameters (e.g. ['f0_statistics', 'jitters']). Overrides config_path."
    )
    statistics: Optional[List[str]] = Field(
        default=None,
        description="Statistics applied to time-series components. Omit for the full catalog."
    )
    config_path: Optional[str] = Field(
        default=None,
        description="YAML feature configuration. Defaults to $AUDIO_FEATURES_CONFIG or the bundled default."
    )
    output_format: Optional[OutputFormat] = Field(
        default=OutputFormat.MARKDOWN,
        description="Output format for the tool response"
    )


class ExtractDirectoryInput(BaseModel):
    """Input model for directory extraction to CSV."""
    model_config = ConfigDict(
        str_strip_whitespace=True,
        validate_assignment=True,
        extra='forbid'
    )

    directory: str = Field(..., description="Directory scanned recursively for .wav/.flac files", min_length=1)
    output_csv: str = Field(..., description="Where the feature matrix CSV is written", min_length=1)
    config_path: Optional[str] = Field(
        default=None,
        description="YAML feature configuration. Defaults to $AUDIO_FEATURES_CONFIG or the bundled default."
    )
    n_jobs: Optional[int] = Field(default=None, ge=1, description="Worker processes (overrides the config)")
    impute: bool = Field(default=False, description="Fill missing cells with column means")
    output_format: Optional[OutputFormat] = Field(
        default=OutputFormat.MARKDOWN,
        description="Output format for the tool response"
    )


class ListSeriesInput(BaseModel):
    """Input model for listing stored passthrough series."""
    model_config = ConfigDict(extra='forbid')

    component: Optional[str] = Field(default=None, description="Only series of this component")
    limit: Optional[int] = Field(default=50, ge=1, le=1000, description="Maximum number of identifiers")

# ============================
# Utility Functions
# ============================

def resolve_config(
    config_path: Optional[str] = None,
    components: Optional[List[str]] = None,
    statistics: Optional[List[str]] = None
) -> FeatureConfig:
    """Explicit components win, then an explicit file, then the environment, then the default."""
    if components:
        return config_from_names(components, statistics)
    path = config_path or os.getenv(CONFIG_ENV) or DEFAULT_CONFIG_PATH
    return parse_config(Path(path).expanduser())


def _json_safe(values: Dict[str, float]) -> Dict[str, Optional[float]]:
    return {k: (None if math.isnan(v) else v) for k, v in values.items()}


def format_row_markdown(path: str, values: Dict[str, float]) -> str:
    lines = [f"# Features: `{Path(path).name}`\n"]
    missing = sum(1 for v in values.values() if math.isnan(v))
    lines.append(f"**Columns:** {len(values)}  **Missing:** {missing}\n")
    lines.append("| Feature | Value |")
    lines.append("|---|---|")
    for name, value in values.items():
        shown = "-" if math.isnan(value) else f"{value:.6g}"
        lines.append(f"| {name} | {shown} |")
    return "\n".join(lines)


def format_summary_markdown(summary: Dict[str, Any]) -> str:
    lines = ["# Feature Matrix Written\n", "**Status:** Success\n"]
    lines.append(f"**CSV:** `{summary['output_csv']}`")
    lines.append(f"**Rows:** {summary['rows']}  **Columns:** {summary['columns']}")
    lines.append(f"**Missing cells:** {summary['missing_cells']}")
    if summary["imputed"]:
        lines.append("*Missing cells were filled with column means.*")
    return "\n".join(lines)

# ============================
# MCP Tools
# ============================

@mcp.tool(name="audio_extract_file")
async def audio_extract_file(params: ExtractFileInput) -> str:
    """Extract named features from one audio file.

    Failed components yield missing values (shown as '-' or null) instead of
    failing the whole request; the reasons are logged as structured events.

    Args:
        params: File path plus either component names or a configuration file.

    Returns:
        Markdown table or JSON object mapping feature names to values.
    """
    try:
        config = resolve_config(params.config_path, params.components, params.statistics)
        values = await asyncio.to_thread(extract_file, params.path, config)

        if params.output_format == OutputFormat.JSON:
            return json.dumps({"path": params.path, "features": _json_safe(values), "success": True}, indent=2)
        return format_row_markdown(params.path, values)

    except Exception as e:
        error_msg = f"Feature extraction failed: {str(e)}"
        logger.error(error_msg)
        return json.dumps({"error": error_msg, "success": False})


@mcp.tool(name="audio_extract_directory")
async def audio_extract_directory(params: ExtractDirectoryInput) -> str:
    """Extract a feature matrix from every .wav/.flac file under a directory.

    Rows are ordered by relative path and do not depend on the worker count.
    The matrix is written as CSV; the response summarizes it.

    Args:
        params: Input directory, output CSV path and optional configuration.

    Returns:
        Summary with row and column counts and the number of missing cells.
    """
    try:
        config = resolve_config(params.config_path)
        matrix = await asyncio.to_thread(extract_directory, params.directory, config, params.n_jobs)
        missing = matrix.missing_count()
        if params.impute:
            matrix = impute_column_means(matrix)
        write_csv(matrix, params.output_csv)

        summary = {
            "output_csv": params.output_csv,
            "rows": matrix.shape[0],
            "columns": matrix.shape[1],
            "missing_cells": missing,
            "imputed": params.impute,
            "success": True,
        }
        if params.output_format == OutputFormat.JSON:
            return json.dumps(summary, indent=2)
        return format_summary_markdown(summary)

    except Exception as e:
        error_msg = f"Directory extraction failed: {str(e)}"
        logger.error(error_msg)
        return json.dumps({"error": error_msg, "success": False})


@mcp.tool(name="audio_list_components")
async def audio_list_components() -> str:
    """List every component name with its kind, outputs, defaults and parameter schema,
    plus the statistic names accepted in configurations.

    Returns:
        JSON with 'components' and 'statistics'.
    """
    try:
        return json.dumps({
            "components": describe_components(),
            "statistics": list(STATISTICS),
            "extra_statistics": list(EXTRA_STATISTICS),
        }, indent=2)

    except Exception as e:
        error_msg = f"Failed to list components: {str(e)}"
        logger.error(error_msg)
        return json.dumps({"error": error_msg, "success": False})


@mcp.tool(name="audio_list_series")
async def audio_list_series(params: ListSeriesInput) -> str:
    """List time series stored by passthrough runs (configurations with no statistics).

    Returns:
        JSON with storage statistics and series identifiers ('<file>.<component>').
    """
    try:
        store = get_series_store()
        stats = store.get_storage_stats()
        return json.dumps({
            "total_series": stats["total_series"],
            "storage_size_mb": stats["total_size_mb"],
            "storage_directory": stats["storage_directory"],
            "series": store.list_series(params.component, params.limit),
        }, indent=2)

    except Exception as e:
        error_msg = f"Failed to list series: {str(e)}"
        logger.error(error_msg)
        return json.dumps({"error": error_msg, "success": False})

# ============================
# Server Entry Point
# ============================

if __name__ == "__main__":
    mcp.run()
