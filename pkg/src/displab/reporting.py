"""Deterministic artifact files for experiment runs.

CSV bytes depend only on the data: floats are rendered with ``repr`` (the
shortest round-trip form), line endings are fixed to "\\n", and nothing
time- or host-dependent is written. Timestamps belong in the JSON summary
only, so reruns with the same config and seed produce byte-identical CSVs.
"""

from __future__ import annotations

import csv
import json
import numbers
from pathlib import Path

__all__ = ["format_cell", "write_csv", "write_json"]


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([str(name) for name in header])
        for row in rows:
            writer.writerow([format_cell(value) for value in row])
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path
