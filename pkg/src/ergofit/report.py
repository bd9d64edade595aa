"""Run reports: tables of per-seed records, aggregates, verdicts, and file emission.

Tables are lists of flat rows.  Verdicts are always computed from tables
after a CSV round trip, so re-deriving them from the emitted files gives the
same answer bit for bit.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

REPORT_FILE = "report.json"
LONG_FILE = "plot_long.csv"
LONG_COLUMNS = ("x", "y", "series", "seed")


@dataclass
class Table:
    name: str
    columns: list
    rows: list = field(default_factory=list)

    def add(self, **row):
        self.rows.append(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(self.columns), extrasaction="raise", lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: _cell(row.get(k)) for k in self.columns})
        return buf.getvalue()

    @classmethod
    def from_csv(cls, name: str, text: str) -> "Table":
        rd = csv.DictReader(io.StringIO(text))
        rows = [{k: parse_cell(v) for k, v in r.items()} for r in rd]
        return cls(name, list(rd.fieldnames or []), rows)

    def roundtrip(self) -> "Table":
        return Table.from_csv(self.name, self.to_csv())

    def where(self, **match) -> list:
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]

    def column(self, key) -> list:
        return [r[key] for r in self.rows]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def parse_cell(s: str):
    """Inverse of the CSV cell encoding: ints, floats (repr round-trip), booleans, text."""
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


@dataclass
class Verdict:
    criterion: str
    passed: bool
    checks: list = field(default_factory=list)

    def check(self, name: str, value, threshold, ok: bool):
        self.checks.append({"name": name, "value": _json_safe(value), "threshold": _json_safe(threshold),
                            "passed": bool(ok)})
        self.passed = self.passed and bool(ok)
        return ok

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "passed": self.passed, "checks": self.checks}

    def line(self) -> str:
        failed = [c["name"] for c in self.checks if not c["passed"]]
        tail = "" if not failed else "  failed: " + ", ".join(failed)
        return f"{self.criterion}: {'PASS' if self.passed else 'FAIL'}{tail}"


@dataclass
class RunReport:
    experiment: str
    config: dict
    seeds: list
    tables: dict
    aggregate: dict
    verdicts: dict
    status: str = "complete"
    notes: list = field(default_factory=list)
    plot: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())

    @property
    def partial(self) -> bool:
        return self.status != "complete"

    def per_seed(self) -> list:
        out = []
        for s in self.seeds:
            recs = {}
            for name, t in self.tables.items():
                if "seed" in t.columns:
                    recs[name] = [r for r in t.rows if r.get("seed") == s]
            out.append({"seed": s, "results": recs})
        return out

    def to_dict(self) -> dict:
        return _json_safe({
            "experiment": self.experiment,
            "status": self.status,
            "config": self.config,
            "seeds": list(self.seeds),
            "per_seed": self.per_seed(),
            "shared": {n: t.rows for n, t in self.tables.items() if "seed" not in t.columns},
            "tables": {n: list(t.columns) for n, t in self.tables.items()},
            "aggregate": self.aggregate,
            "verdicts": {k: v.to_dict() for k, v in sorted(self.verdicts.items())},
            "passed": self.passed,
            "notes": list(self.notes),
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def long_rows(self) -> list:
        """Plot-ready (x, y, series, seed) rows from the declared plot specs."""
        rows = []
        for table, xcol, ycol, label_cols in self.plot:
            t = self.tables.get(table)
            if t is None:
                continue
            for r in t.rows:
                label = "/".join([ycol] + [f"{c}={r.get(c)}" for c in label_cols])
                rows.append({"x": r.get(xcol), "y": r.get(ycol), "series": label, "seed": r.get("seed", "")})
        return rows

    def summary_lines(self) -> list:
        return [v.line() for _, v in sorted(self.verdicts.items(), key=lambda kv: _crit_key(kv[0]))]


def _crit_key(c: str):
    digits = "".join(ch for ch in c if ch.isdigit())
    return (int(digits) if digits else 0, c)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def emit_report(report: RunReport, out_dir, formats=("json", "csv")) -> list:
    """Write ``report.json`` plus one CSV per table and the long-format plot CSV.

    JSON is always written; ``formats`` only controls the CSV files.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    path = os.path.join(out_dir, REPORT_FILE)
    with open(path, "w") as fh:
        fh.write(report.to_json())
    written.append(path)
    if "csv" in formats:
        for name, t in report.tables.items():
            p = os.path.join(out_dir, f"{name}.csv")
            with open(p, "w", newline="") as fh:
                fh.write(t.to_csv())
            written.append(p)
        lt = Table("plot_long", list(LONG_COLUMNS), report.long_rows())
        p = os.path.join(out_dir, LONG_FILE)
        with open(p, "w", newline="") as fh:
            fh.write(lt.to_csv())
        written.append(p)
    return written


def load_tables(out_dir, names) -> dict:
    tables = {}
    for name in names:
        with open(os.path.join(out_dir, f"{name}.csv"), newline="") as fh:
            tables[name] = Table.from_csv(name, fh.read())
    return tables


__all__ = ["Table", "Verdict", "RunReport", "emit_report", "load_tables", "parse_cell", "REPORT_FILE", "LONG_FILE"]
