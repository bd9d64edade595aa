"""Command-line entry point: ``ergofit --config cfg.json [--seed N] [--out DIR] [--threads N]``.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 configuration error,
3 budget or resource error (a partial report is still written).
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import load_config
from .errors import (ConfigError, DataStarvationError, DomainError, ErgofitError, InvalidArgumentError,
                     InvalidParameterError, PrecisionError, ResourceBudgetError)
from .experiments import REGISTRY, run_experiment
from .report import emit_report

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3

log = logging.getLogger("ergofit")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ergofit", description="Run a named dynamical-model fitting experiment.")
    ap.add_argument("--config", metavar="PATH", help="JSON experiment config")
    ap.add_argument("--seed", type=int, metavar="N", help="run this single seed instead of the config's seeds")
    ap.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    ap.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads over seeds")
    ap.add_argument("--list-experiments", action="store_true", help="list experiment names and exit")
    ap.add_argument("-q", "--quiet", action="store_true", help="suppress the verdict summary")
    return ap


def list_experiments(out=None):
    out = out or sys.stdout
    for name, exp in REGISTRY.items():
        print(f"{name:26s} {','.join(exp.criteria):8s} {exp.description}", file=out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    if args.list_experiments:
        list_experiments()
        return EXIT_PASS
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative", ("seeds",))
            cfg = dataclasses.replace(cfg, seeds=[args.seed])
        if args.out is not None:
            cfg = dataclasses.replace(cfg, output_dir=args.out)
        report = run_experiment(cfg, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceBudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InvalidParameterError, InvalidArgumentError, DomainError) as exc:
        # parameters from the config were rejected downstream
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataStarvationError, PrecisionError) as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ErgofitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except MemoryError:
        print("error: out of memory", file=sys.stderr)
        return EXIT_BUDGET
    try:
        paths = emit_report(report, cfg.output_dir)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    if not args.quiet:
        for line in report.summary_lines():
            print(line)
        log.info("wrote %d files to %s", len(paths), cfg.output_dir)
    if report.partial:
        for note in report.notes:
            print(f"partial: {note}", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
