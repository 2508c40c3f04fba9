"""CSV serialization of power traces and JSON dataset manifests.

Trace file layout::

    sample_rate_hz,600.0
    label,walking
    1.0213,1.0198        <- one row per sample, one column per subcarrier
    ...

Floats are written with ``repr`` so a write/read cycle is exact.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .signal_model import CfrPowerTrace


class SchemaMismatchError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def write_trace_csv(path, trace: CfrPowerTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_rate_hz", repr(float(trace.sample_rate_hz))])
        w.writerow(["label", trace.label or ""])
        for row in trace.matrix:
            w.writerow([repr(float(v)) for v in row])


def _header(path, rows, line: int, key: str) -> str:
    if len(rows) < line or not rows[line - 1] or rows[line - 1][0].strip() != key:
        raise SchemaMismatchError(path, line, f"expected header row '{key},<value>'")
    row = rows[line - 1]
    if len(row) != 2:
        raise SchemaMismatchError(path, line, f"header '{key}' must have exactly one value")
    return row[1].strip()


def read_trace_csv(path) -> CfrPowerTrace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    fs_text = _header(path, rows, 1, "sample_rate_hz")
    try:
        fs = float(fs_text)
    except ValueError:
        raise SchemaMismatchError(path, 1, f"sample rate {fs_text!r} is not a number") from None
    if not (math.isfinite(fs) and fs > 0):
        raise SchemaMismatchError(path, 1, f"sample rate must be positive and finite, got {fs_text}")
    label = _header(path, rows, 2, "label") or None

    data, width = [], None
    for lineno, row in enumerate(rows[2:], start=3):
        if not row:
            continue
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise SchemaMismatchError(path, lineno, f"expected {width} columns, found {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise SchemaMismatchError(path, lineno, f"non-numeric value in {row}") from None
        if not all(math.isfinite(v) for v in vals):
            raise SchemaMismatchError(path, lineno, "non-finite sample value")
        data.append(vals)
    if not data:
        raise SchemaMismatchError(path, len(rows) + 1, "trace has no samples")
    return CfrPowerTrace(np.array(data), fs, label=label)


def write_dataset(directory, traces: Sequence[CfrPowerTrace], seeds: Optional[Sequence[int]] = None,
                  manifest_name: str = "manifest.json") -> Path:
    """One CSV per trace plus a manifest listing (file, label, seed)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, tr in enumerate(traces):
        name = f"trace_{i:04d}.csv"
        write_trace_csv(directory / name, tr)
        entries.append({"file": name, "label": tr.label, "seed": None if seeds is None else int(seeds[i])})
    path = directory / manifest_name
    with open(path, "w") as fh:
        json.dump({"traces": entries}, fh, indent=2)
    return path


def ingest_csv(path) -> list:
    """Load a single trace CSV, or every trace listed in a JSON manifest.

    Manifest labels override whatever label the CSV header carries.
    """
    path = Path(path)
    if path.suffix.lower() != ".json":
        return [read_trace_csv(path)]
    with open(path) as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaMismatchError(path, exc.lineno, f"invalid manifest JSON: {exc.msg}") from None
    entries = manifest.get("traces") if isinstance(manifest, dict) else None
    if not isinstance(entries, list):
        raise SchemaMismatchError(path, 1, "manifest needs a 'traces' list")
    out = []
    for entry in entries:
        if "file" not in entry:
            raise SchemaMismatchError(path, 1, f"manifest entry without 'file': {entry}")
        tr = read_trace_csv(os.path.join(path.parent, entry["file"]))
        if entry.get("label") is not None:
            tr.label = entry["label"]
        out.append(tr)
    return out
