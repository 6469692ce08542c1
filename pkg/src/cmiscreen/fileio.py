"""CSV/JSON readers and writers; every multi-file output is committed atomically."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .cmi import CmiTrace, ScreeningReport
from .data import Dataset, prepare_dataset
from .scales import ScaleError

TRACE_PREFIX = "zeta_"


def fmt(v):
    """Lossless decimal text for a number (17 significant digits); '' for missing."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return f"{v:.17g}"


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


class AtomicOutputs:
    """Collect files and publish them together on success (write, then rename).

    Nothing appears at the destination paths if the block raises.
    """

    def __init__(self):
        self._files = {}

    def add(self, path, text):
        self._files[Path(path)] = text

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            return False
        staged = []
        try:
            for path, text in self._files.items():
                path.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
                with os.fdopen(fd, "w", newline="") as fh:
                    fh.write(text)
                staged.append((tmp, path))
        except BaseException:
            for tmp, _ in staged:
                os.unlink(tmp)
            raise
        for tmp, path in staged:
            os.replace(tmp, path)
        return False


# --- data + schema -----------------------------------------------------------

def read_schema(path):
    with open(path) as fh:
        schema = json.load(fh)
    if not isinstance(schema, dict) or not all(isinstance(v, dict) for v in schema.values()):
        raise ScaleError("schema must be a JSON object mapping column names to scale records")
    return schema


def read_table(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ScaleError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    if len(set(header)) != len(header):
        raise ScaleError(f"{path}: duplicate column names")
    cols = {name: [] for name in header}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ScaleError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for name, cell in zip(header, row):
            cell = cell.strip()
            try:
                cols[name].append(float(cell) if cell else math.nan)
            except ValueError:
                raise ScaleError(f"{path}:{lineno}: non-numeric value {cell!r} in {name}") from None
    return {name: np.array(v, dtype=float) for name, v in cols.items()}


def load_csv_with_schema(data_path, schema_path) -> Dataset:
    """Read a headed CSV and its scale schema; empty response cells become missing."""
    table = read_table(data_path)
    schema = read_schema(schema_path)
    for name in table:
        if name not in schema:
            raise ScaleError(f"column {name!r} is not described in the schema")
    for name in schema:
        if name not in table:
            raise ScaleError(f"schema column {name!r} is not in the data")
    return prepare_dataset(table, schema)


def dataset_csv(data: Dataset):
    table = data.raw_table()
    names = list(table)
    return csv_text(names, zip(*(table[c] for c in names)))


# --- traces and reports ------------------------------------------------------

def trace_csv(trace: CmiTrace):
    header = [f"{TRACE_PREFIX}{k + 1}" for k in range(trace.p)]
    return csv_text(header, trace.draws.tolist())


def read_trace(path, names=None, mode="conditional") -> CmiTrace:
    table = read_table(path)
    cols = list(table)
    expected = [f"{TRACE_PREFIX}{k + 1}" for k in range(len(cols))]
    if cols != expected:
        raise ScaleError(f"{path}: trace columns must be {expected[:3]}...")
    draws = np.column_stack([table[c] for c in cols]) if cols else np.empty((0, 0))
    if draws.shape[0] == 0:
        raise ScaleError(f"{path}: empty trace")
    return CmiTrace(draws, mode=mode, names=tuple(names) if names else ())


def report_json(report: ScreeningReport):
    return json_text({"threshold": report.threshold, "ci_level": report.ci_level,
                      "mode": report.mode, "predictors": report.to_records(), **report.meta})


REPORT_FIELDS = ("index", "name", "mean", "ci_low", "ci_high", "prob_positive", "selected")


def report_csv(report: ScreeningReport):
    return csv_text(REPORT_FIELDS, ([rec[k] for k in REPORT_FIELDS] for rec in report.to_records()))


def format_table(report: ScreeningReport, selected_only=True):
    """Plain-text table in the j / Mean / CI / Predictor layout."""
    pct = round(report.ci_level * 100)
    lines = [f"{'j':>4}  {'Mean':>8}  {f'{pct}%CI':<20}  Predictor"]
    for r in report.rows:
        if selected_only and not r.selected:
            continue
        lines.append(f"{r.column + 1:>4}  {r.mean:>8.4f}  [{r.ci_low:.4f}, {r.ci_high:.4f}]  {r.name}")
    return "\n".join(lines)
