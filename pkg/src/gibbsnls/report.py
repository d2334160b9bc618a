"""Experiment reports: JSON for machines, aligned text for people, CSV tables."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IoFailure
from .gibbs import params_to_dict
from .spectral import ParameterSet


def plain(obj):
    """Convert numpy scalars/arrays to JSON-ready Python values.

    Non-finite floats become the strings "inf", "-inf" and "nan".
    """
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, ParameterSet):
        return params_to_dict(obj)
    return obj


@dataclass
class ExperimentReport:
    experiment: str
    params: ParameterSet
    sample_size: int
    statistics: dict
    thresholds: dict
    passed: bool
    seeds: list
    settings: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)   # name -> (header, rows)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return plain({
            "experiment": self.experiment,
            "params": self.params,
            "sample_size": self.sample_size,
            "statistics": self.statistics,
            "thresholds": self.thresholds,
            "pass": self.passed,
            "seeds": self.seeds,
            "settings": self.settings,
            "notes": self.notes,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        d = self.to_dict()
        lines = [f"experiment  {self.experiment}",
                 f"result      {'PASS' if self.passed else 'FAIL'}",
                 f"samples     {self.sample_size}",
                 f"seeds       {d['seeds']}", ""]
        for title, block in (("settings", d["settings"]), ("thresholds", d["thresholds"]),
                             ("statistics", d["statistics"])):
            if not block:
                continue
            lines.append(title)
            flat = _flatten(block)
            width = max(len(k) for k in flat)
            lines += [f"  {k.ljust(width)}  {_fmt(v)}" for k, v in flat]
            lines.append("")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines).rstrip() + "\n"

    def write(self, outdir, csv_tables: bool = True) -> list[Path]:
        out = Path(outdir)
        written = []
        try:
            out.mkdir(parents=True, exist_ok=True)
            for name, text in (("report.json", self.to_json()), ("report.txt", self.to_text())):
                (out / name).write_text(text)
                written.append(out / name)
            if csv_tables:
                for name, (header, rows) in sorted(self.tables.items()):
                    path = out / f"{name}.csv"
                    with open(path, "w", newline="") as fh:
                        w = csv.writer(fh)
                        w.writerow(header)
                        for row in rows:
                            w.writerow([_cell(v) for v in row])
                    written.append(path)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        return written


def _flatten(d, prefix=""):
    out = []
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out += _flatten(v, key + ".")
        else:
            out.append((key, v))
    return out


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list) and v and all(isinstance(x, float) for x in v):
        return "[" + ", ".join(f"{x:.4g}" for x in v) + "]"
    return str(v)


def _cell(v):
    v = plain(v)
    return repr(v) if isinstance(v, float) else v
