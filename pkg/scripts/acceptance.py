#!/usr/bin/env python3
"""Run all acceptance criteria outside pytest and print one PASS/FAIL line each."""
import sys
import time

from ergofit.config import validate
from ergofit.experiments import run_experiment

RUNS = [
    ("entropy_equality", [0], ["C1"]),
    ("zero_entropy_families", [0], ["C2"]),
    ("mean_width", [0], ["C3", "C4"]),
    ("consistency_subcritical", list(range(20)), ["C5"]),
    ("inconsistency_sigma", list(range(20)), ["C6"]),
    ("auxiliary_loss", [0], ["C7"]),
    ("distortion_lab", [0], ["C8", "C9"]),
    ("packing_lemma", [0], ["C10"]),
    ("sudakov", [0], ["C11"]),
]


def main():
    ok = True
    for name, seeds, crits in RUNS:
        t0 = time.time()
        rep = run_experiment(validate({"schema_version": 1, "experiment": name, "seeds": seeds}))
        for c in crits:
            v = rep.verdicts[c]
            ok &= v.passed and not rep.partial
            print(f"{v.line()}  [{name}, {time.time() - t0:.0f}s]", flush=True)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
