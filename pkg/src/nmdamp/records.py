"""Plot-ready output files.

Every file carries the resolved run configuration and the package version:
CSV files as leading ``#`` comment lines, JSON files as top-level keys.
Floats are written with 17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "%.17g"


def _version() -> str:
    from . import __version__

    return __version__


def _header_lines(config: dict | None) -> list[str]:
    lines = [f"# nmdamp {_version()}"]
    if config is not None:
        lines.append("# config: " + json.dumps(config, sort_keys=True, separators=(",", ":")))
    return lines


def write_csv(path, columns: dict, config: dict | None = None) -> Path:
    """Write equal-length real columns, in insertion order, to ``path``."""
    path = Path(path)
    names = list(columns)
    data = [np.asarray(columns[k]) for k in names]
    lengths = {d.shape[0] for d in data}
    if len(lengths) > 1:
        raise ValueError(f"columns have different lengths: {sorted(lengths)}")
    for name, d in zip(names, data):
        if np.iscomplexobj(d):
            raise ValueError(f"column {name!r} is complex; split it into real and imaginary parts")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in _header_lines(config):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*data):
            writer.writerow([FLOAT_FORMAT % float(v) for v in row])
    return path


def read_csv(path) -> tuple[dict, dict | None]:
    """Inverse of :func:`write_csv`: returns (columns, config)."""
    config = None
    rows = []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("# config: "):
                config = json.loads(line[len("# config: "):])
            elif not line.startswith("#"):
                rows.append(line)
    reader = csv.reader(rows)
    names = next(reader)
    values = np.array([[float(v) for v in r] for r in reader], dtype=float).reshape(-1, len(names))
    return {n: values[:, i] for i, n in enumerate(names)}, config


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload: dict, config: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"version": _version(), "config": config, **_jsonable(payload)}
    # repr-based float output already round-trips
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return path


def write_table(path_stem, columns: dict, config: dict | None, fmt: str = "csv") -> Path:
    """Write columns as ``<stem>.csv`` or ``<stem>.json`` depending on ``fmt``."""
    stem = Path(path_stem)
    if fmt == "csv":
        return write_csv(stem.with_suffix(".csv"), columns, config)
    if fmt == "json":
        return write_json(stem.with_suffix(".json"), {"columns": columns}, config)
    raise ValueError(f"unknown output format {fmt!r}")
