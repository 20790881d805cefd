"""
Result File Integration

This module writes experiment results to disk and reads them back:
- CSV with '#'-prefixed "key: value" metadata lines ahead of the header
- JSON as {"metadata": {...}, "rows": [...]}

Floats are written in full precision (17 significant digits).
"""

import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy
import structlog

import src
from src.config.settings import Settings, get_settings
from src.models.experiment import ExperimentResult, OutputFormat
from src.utils.error_handling import InvalidArgumentError, with_error_handling

_META_PREFIX = "# "
_FLOAT_FORMAT = "%.16e"


def _to_builtin(value: Any) -> Any:
    """Plain JSON-compatible value; NaN and infinities become null."""
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _format_metadata_value(value: Any) -> str:
    if isinstance(value, float):
        return json.dumps(value)
    if isinstance(value, str):
        return value
    return json.dumps(_to_builtin(value), sort_keys=True)


def _parse_metadata_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


class ResultWriter:
    """Persists ExperimentResults as CSV or JSON files."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.logger = structlog.get_logger(__name__)

    def default_path(self, result: ExperimentResult, fmt: OutputFormat) -> Path:
        return Path(self.settings.output_dir) / f"{result.experiment.value}.{fmt.value}"

    def build_metadata(self, result: ExperimentResult) -> Dict[str, Any]:
        """Run metadata plus package versions and a UTC timestamp."""
        return {
            **result.metadata,
            "columns": list(result.columns),
            "star_rz_version": src.__version__,
            "numpy_version": np.__version__,
            "scipy_version": scipy.__version__,
            "pandas_version": pd.__version__,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }

    @with_error_handling("result_writer", "write")
    def write(
        self,
        result: ExperimentResult,
        path: Optional[Union[str, Path]] = None,
        fmt: OutputFormat = OutputFormat.CSV,
    ) -> Path:
        """
        Write a result file and return its path.

        An empty row list still produces the metadata and the header.
        """
        fmt = OutputFormat(fmt)
        target = Path(path) if path is not None else self.default_path(result, fmt)
        target.parent.mkdir(parents=True, exist_ok=True)
        metadata = self.build_metadata(result)

        if fmt == OutputFormat.CSV:
            frame = pd.DataFrame(result.rows, columns=result.columns)
            with target.open("w", encoding="utf-8", newline="") as handle:
                for key, value in metadata.items():
                    handle.write(f"{_META_PREFIX}{key}: {_format_metadata_value(value)}\n")
                frame.to_csv(handle, index=False, float_format=_FLOAT_FORMAT, na_rep="nan")
        else:
            payload = {
                "metadata": _to_builtin(metadata),
                "rows": [
                    {column: _to_builtin(row.get(column)) for column in result.columns}
                    for row in result.rows
                ],
            }
            target.write_text(json.dumps(payload, indent=2), encoding="utf-8")

        self.logger.info(
            "Results written",
            experiment=result.experiment.value,
            path=str(target),
            format=fmt.value,
            rows=len(result.rows),
        )
        return target

    @with_error_handling("result_writer", "read")
    def read(self, path: Union[str, Path]) -> Tuple[Dict[str, Any], pd.DataFrame]:
        """Metadata and data rows of a CSV or JSON result file."""
        source = Path(path)
        suffix = source.suffix.lower().lstrip(".")
        if suffix == OutputFormat.JSON.value:
            payload = json.loads(source.read_text(encoding="utf-8"))
            stored = payload.get("metadata", {})
            columns: Optional[List[str]] = stored.get("columns")
            return stored, pd.DataFrame(payload.get("rows", []), columns=columns)
        if suffix != OutputFormat.CSV.value:
            raise InvalidArgumentError(f"unsupported result file {source.name}", field="path")

        metadata: Dict[str, Any] = {}
        skip = 0
        with source.open("r", encoding="utf-8") as handle:
            for line in handle:
                if not line.startswith(_META_PREFIX.strip()):
                    break
                key, _, value = line[len(_META_PREFIX):].rstrip("\n").partition(": ")
                metadata[key] = _parse_metadata_value(value)
                skip += 1
        return metadata, pd.read_csv(source, skiprows=skip)


def write_results(
    result: ExperimentResult,
    path: Optional[Union[str, Path]] = None,
    fmt: OutputFormat = OutputFormat.CSV,
) -> Path:
    return ResultWriter().write(result, path, fmt)


def read_results(path: Union[str, Path]) -> Tuple[Dict[str, Any], pd.DataFrame]:
    return ResultWriter().read(path)
