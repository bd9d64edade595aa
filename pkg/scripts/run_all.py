#!/usr/bin/env python3
"""Run every config in configs/ through the CLI and print the verdict lines.

usage: python scripts/run_all.py [--out DIR] [--threads N] [names ...]
"""
import argparse
import pathlib
import sys

from ergofit.cli import main as cli_main

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="config stems to run (default: all acceptance configs)")
    ap.add_argument("--out", default="out", help="parent output directory")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    configs = sorted((ROOT / "configs").glob("*.json"))
    names = args.names or [p.stem for p in configs if not p.stem.endswith("_quick")]
    codes = {}
    for name in names:
        print(f"== {name}", flush=True)
        codes[name] = cli_main(["--config", str(ROOT / "configs" / f"{name}.json"),
                                "--out", str(pathlib.Path(args.out) / name), "--threads", str(args.threads)])
    print()
    for name, code in codes.items():
        print(f"{name:26s} exit {code}")
    return max(codes.values(), default=0)


if __name__ == "__main__":
    sys.exit(main())
