#!/usr/bin/env python3
"""Recompute verdicts from an output directory's CSV files and compare with report.json.

usage: python scripts/recompute_verdicts.py OUT_DIR
"""
import json
import pathlib
import sys

from ergofit.config import validate
from ergofit.experiments import REGISTRY, compute_verdicts, resolve_settings
from ergofit.report import load_tables


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    out = pathlib.Path(argv[0])
    report = json.loads((out / "report.json").read_text())
    cfg = validate(report["config"])
    tables = load_tables(out, REGISTRY[cfg.experiment].tables)
    fresh = compute_verdicts(cfg.experiment, tables, resolve_settings(cfg))
    same = True
    for crit, v in sorted(fresh.items()):
        stored = report["verdicts"][crit]["passed"]
        same &= stored == v.passed
        print(v.line() + ("" if stored == v.passed else f"  (report.json says {stored})"))
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
