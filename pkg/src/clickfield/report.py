"""Experiment reports and their CSV / JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("detector_id", "kind", "count", "p_hat", "ci_low", "ci_high", "target", "abs_dev")


@dataclass
class DetectorRow:
    detector_id: int
    kind: str
    count: int
    p_hat: float
    ci_low: float
    ci_high: float
    target: float
    abs_dev: float

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    rows: list[DetectorRow] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    @property
    def counts(self) -> np.ndarray:
        return np.array([r.count for r in self.rows], dtype=np.int64)

    @property
    def p_hat(self) -> np.ndarray:
        return np.array([r.p_hat for r in self.rows])

    def to_dict(self) -> dict:
        return _plain({
            "experiment": self.name,
            "parameters": self.parameters,
            "detectors": [r.as_dict() for r in self.rows],
            "metrics": self.metrics,
            "tables": self.tables,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        """Per-detector rows; reports without detectors emit their first table instead."""
        buf = io.StringIO()
        if self.rows or not self.tables:
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(v) for v in (getattr(r, c) for c in CSV_COLUMNS)])
            return buf.getvalue()
        table = next(iter(self.tables.values()))
        cols = list(table[0]) if table else []
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in table:
            w.writerow([_fmt(_plain(row[c])) for c in cols])
        return buf.getvalue()

    def write(self, out_dir, fmt: str = "both", stem: str | None = None) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.name
        paths = []
        if fmt in ("csv", "both"):
            p = out / f"{stem}.csv"
            p.write_text(self.to_csv(), encoding="utf-8")
            paths.append(p)
        if fmt in ("json", "both"):
            p = out / f"{stem}.json"
            p.write_text(self.to_json(), encoding="utf-8")
            paths.append(p)
        return paths


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj
