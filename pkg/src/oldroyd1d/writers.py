"""Bit-stable CSV/JSON writers.

Floats are written with ``repr`` (shortest string that parses back to the same
double) and nothing time-dependent goes into data files; wall-clock metadata
lives in a separate ``metadata.json``.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from .diagnostics import EnergyReport

SCHEMA_VERSION = 1
NS_CSV_COLUMNS = ("t", "energy", "minv", "maxv", "limit_stress_L2")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) for x in row) + "\n")


def write_timeseries_csv(path, report: EnergyReport):
    _write_rows(path, EnergyReport.CSV_COLUMNS, report.rows())


def write_ns_timeseries_csv(path, rows):
    _write_rows(path, NS_CSV_COLUMNS, rows)


def write_snapshot_csv(path, field):
    cols = [field.grid.x, field.v, field.u, field.S]
    header = ["x", "v", "u", "S"]
    if getattr(field, "A", None) is not None:
        cols.append(field.A)
        header.append("A")
    _write_rows(path, header, zip(*cols))


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(payload), indent=2, allow_nan=False)
    with open(path, "w", newline="\n") as fh:
        fh.write(text + "\n")


def write_summary(path, command: str, config_echo: dict, results: dict, warnings=(), breakdown=None):
    write_json(path, {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config_echo,
        "warnings": list(warnings),
        "breakdown": breakdown,
        "results": results,
    })


def write_metadata(path, wall_clock_seconds: float):
    """Run metadata: excluded from golden-file comparisons."""
    write_json(path, {
        "note": "non-deterministic run metadata; not part of the data contract",
        "wall_clock_seconds": wall_clock_seconds,
        "pid": os.getpid(),
    })
