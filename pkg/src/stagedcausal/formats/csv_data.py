"""
CSV ingestion and emission of categorical datasets.

Every cell is read as a string label. Levels are inferred in order of first
appearance unless a schema (JSON list of variables with levels) is given,
in which case a label outside the schema is an error naming its row and
column. Row numbers in messages count the header as line 1.

``write_csv`` also writes the schema next to the data as
``<file>.schema.json``; ``read_csv`` uses that sidecar when no schema is
passed, so level order and unused levels survive the round trip.
"""

import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import structlog

from ..core.errors import StagedCausalError
from ..trees.models import Dataset, SchemaError, Variable

log = structlog.get_logger()

PathLike = Union[str, Path]

SCHEMA_SUFFIX = ".schema.json"


class DataFormatError(StagedCausalError):
    """Malformed data file: empty, ragged, unknown labels."""


def read_schema(path: PathLike) -> List[Variable]:
    """Variables from ``[{"name": ..., "levels": [...]}, ...]`` or a model file."""
    try:
        with open(path, "r") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataFormatError(f"cannot read schema {path}: {e}") from e
    if isinstance(raw, dict):
        raw = raw.get("variables", [])
    try:
        return [Variable(name=v["name"], levels=tuple(str(x) for x in v["levels"])) for v in raw]
    except (KeyError, TypeError) as e:
        raise DataFormatError(f"schema {path} must list variables with 'name' and 'levels'") from e


def schema_path_for(path: PathLike) -> Path:
    """Sidecar schema written next to a data file."""
    p = Path(path)
    return p.with_name(p.name + SCHEMA_SUFFIX)


def write_schema(variables: Sequence[Variable], path: PathLike) -> None:
    """Write ``{"variables": [...]}``, readable by ``read_schema``."""
    raw = {"variables": [{"name": v.name, "levels": list(v.levels)} for v in variables]}
    with open(path, "w") as f:
        json.dump(raw, f, indent=2)
        f.write("\n")


def _load_frame(path: PathLike) -> pd.DataFrame:
    p = Path(path)
    if not p.exists():
        raise DataFormatError(f"data file not found: {path}")
    if p.stat().st_size == 0:
        raise DataFormatError(f"data file is empty: {path}")
    try:
        frame = pd.read_csv(
            p,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
            skipinitialspace=False,
        )
    except pd.errors.EmptyDataError as e:
        raise DataFormatError(f"data file is empty: {path}") from e
    except pd.errors.ParserError as e:
        raise DataFormatError(f"ragged rows in {path}: {e}") from e
    # short rows are padded with NaN even with keep_default_na=False
    if frame.isna().any().any():
        bad = int(np.flatnonzero(frame.isna().any(axis=1).to_numpy())[0])
        raise DataFormatError(f"ragged row at line {bad + 2} of {path}")
    if frame.empty:
        raise DataFormatError(f"data file has a header but no rows: {path}")
    # pandas renames repeated headers to "A.1", so check the raw header row
    header = pd.read_csv(p, header=None, nrows=1, dtype=str, keep_default_na=False)
    names = [str(c).strip() for c in header.iloc[0].tolist()]
    if len(set(names)) != len(names):
        raise DataFormatError(f"duplicate column names in {path}")
    frame.columns = names
    return frame


def dataset_from_frame(
    frame: pd.DataFrame,
    order: Optional[Sequence[str]] = None,
    schema: Optional[Sequence[Variable]] = None,
    source: str = "data",
) -> Dataset:
    """Code a string DataFrame into a Dataset in the given variable order."""
    names = list(order) if order else (
        [v.name for v in schema] if schema else [str(c) for c in frame.columns]
    )
    missing = [n for n in names if n not in frame.columns]
    if missing:
        raise SchemaError(f"column(s) {missing} not found in {source}; available {list(frame.columns)}")
    by_name: Dict[str, Variable] = {v.name: v for v in schema or []}
    variables: List[Variable] = []
    columns: List[np.ndarray] = []
    for name in names:
        values = frame[name].astype(str).to_numpy()
        if name in by_name:
            var = by_name[name]
        else:
            if schema:
                raise SchemaError(f"column '{name}' is not in the schema")
            var = Variable(name=name, levels=tuple(pd.unique(values).tolist()))
        lookup = {label: code for code, label in enumerate(var.levels)}
        codes = np.fromiter((lookup.get(v, -1) for v in values), dtype=np.int64, count=len(values))
        if np.any(codes < 0):
            row = int(np.flatnonzero(codes < 0)[0])
            raise DataFormatError(
                f"unknown label '{values[row]}' in column '{name}' at line {row + 2} of {source}"
            )
        variables.append(var)
        columns.append(codes)
    return Dataset(tuple(variables), np.column_stack(columns) if columns else np.zeros((len(frame), 0)))


def read_csv(
    path: PathLike,
    order: Optional[Sequence[str]] = None,
    schema: Optional[Sequence[Variable]] = None,
) -> Dataset:
    """Read a header CSV into a Dataset (LF and CRLF line endings).

    Without ``schema`` the sidecar written by ``write_csv`` is used when
    it exists; otherwise levels are inferred.
    """
    frame = _load_frame(path)
    if schema is None:
        sidecar = schema_path_for(path)
        if sidecar.exists():
            schema = read_schema(sidecar)
            log.debug("csv.schema_sidecar", path=str(sidecar))
    data = dataset_from_frame(frame, order=order, schema=schema, source=str(path))
    log.debug("csv.read", path=str(path), rows=data.n, columns=data.p)
    return data


def write_csv(data: Dataset, path: PathLike, schema_out: Optional[PathLike] = None) -> Path:
    """Write labels with a header plus the schema sidecar; returns the sidecar path."""
    data.labels().to_csv(path, index=False, lineterminator="\n")
    sidecar = Path(schema_out) if schema_out is not None else schema_path_for(path)
    write_schema(data.variables, sidecar)
    log.debug("csv.written", path=str(path), rows=data.n, schema=str(sidecar))
    return sidecar
