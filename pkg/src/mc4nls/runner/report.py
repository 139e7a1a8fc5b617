"""Run reports (JSON) and time series (CSV).

CSV schema, one row per stored snapshot::

    t, dt, mass, energy, mom_1, ..., mom_n, sup_norm, h2_seminorm, <probe columns>

``dt`` is the step that produced the row.  Probe columns follow in the
order the probes were registered and are named after the probe; probes
without a per-snapshot observable add no column.  Radial runs write zero
momentum columns.  Floats are written with ``repr`` so identical runs give
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .probes import Check

REPORT_FILE = "report.json"
SERIES_FILE = "series.csv"
CONFIG_FILE = "config.ini"


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings 'inf', '-inf', 'nan'."""
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
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def series_columns(n: int, probe_columns) -> list:
    return ["t", "dt", "mass", "energy", *[f"mom_{i}" for i in range(1, n + 1)], "sup_norm", "h2_seminorm",
            *probe_columns]


@dataclass
class RunReport:
    name: str
    config: dict
    outcome: Optional[str]
    outcome_reason: str
    events: list
    steps: int
    drift: dict
    drift_scales: dict
    probes: dict
    checks: list
    caveats: list
    validity_window: list
    columns: list
    artifacts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def failed(self) -> list:
        return [c["name"] for c in self.checks if not c["passed"]]

    def to_dict(self) -> dict:
        return to_jsonable({k: getattr(self, k) for k in self.__dataclass_fields__})

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(**d)

    def summary(self) -> str:
        lines = [f"run {self.name}: outcome {self.outcome} ({self.outcome_reason}), {self.steps} steps"]
        for k, v in self.drift.items():
            lines.append(f"  drift {k:9s} {v if isinstance(v, str) else format(v, '.3e')}")
        for c in self.checks:
            val = c["value"]
            val = "-" if val is None else (val if isinstance(val, str) else f"{val:.4g}")
            lines.append(f"  [{'PASS' if c['passed'] else 'FAIL'}] {c['name']}: {val} ({c['threshold']})"
                         + (f" {c['detail']}" if c["detail"] else ""))
        for cav in self.caveats:
            lines.append(f"  caveat: {cav}")
        return "\n".join(lines)


def make_report(name: str, config, record, probe_results: dict, checks: list, caveats: list,
                window, columns: list, drift: dict, drift_scales: dict) -> RunReport:
    names = [c.name for c in checks]
    dupes = sorted({x for x in names if names.count(x) > 1})
    if dupes:
        raise ValueError(f"acceptance checks registered twice: {', '.join(dupes)}")
    rep = RunReport(
        name=name,
        config=config.to_dict(),
        outcome=record.outcome,
        outcome_reason=record.outcome_reason,
        events=[list(e) for e in record.events],
        steps=record.steps,
        drift=drift,
        drift_scales=drift_scales,
        probes=probe_results,
        checks=[c.as_dict() for c in checks],
        caveats=list(caveats),
        validity_window=list(window),
        columns=list(columns),
    )
    # normalise once so the in-memory report equals its parsed JSON
    return RunReport.from_dict(rep.to_dict())


def series_rows(record, columns: list) -> list:
    rows = []
    n = record.params.n
    for cs, dg in zip(record.conserved_series, record.diagnostic_series):
        mom = list(cs.momentum) if len(cs.momentum) else [0.0] * n
        vals = [cs.t, dg["dt"], cs.mass, cs.energy, *mom, dg["sup_norm"], dg["h2_seminorm"]]
        vals += [dg[c] for c in columns[len(vals):]]
        rows.append([float(v) for v in vals])
    return rows


def write_series(path, columns: list, rows: list) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(v) for v in r])
    return path


def read_series(path) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        data = np.array([[float(v) for v in row] for row in rd], dtype=float)
    return header, data.reshape(-1, len(header))


def emit_report(report: RunReport, directory, formats=("json",), rows: Optional[list] = None) -> list:
    """Write the report (``json``) and, given rows, the time series (``csv``)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats and rows is not None:
        written.append(write_series(directory / SERIES_FILE, report.columns, rows))
    if "json" in formats:
        p = directory / REPORT_FILE
        p.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        written.append(p)
    return written


def load_report(directory) -> RunReport:
    p = Path(directory) / REPORT_FILE
    return RunReport.from_dict(json.loads(p.read_text()))


def check_from_dict(d: dict) -> Check:
    return Check.from_dict(d)
