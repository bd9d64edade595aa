"""Acceptance run: every criterion at its stated settings and tolerance.

Each experiment runs once with its built-in defaults (thresholds are module
constants of ``ergofit.experiments`` and cannot be configured).  One
``C<k>: PASS`` or ``C<k>: FAIL`` line per criterion is printed to the
terminal even when pytest captures output.
"""
import pytest

from ergofit.config import validate
from ergofit.experiments import run_experiment

pytestmark = pytest.mark.slow

TWENTY = list(range(20))

# criterion -> (experiment, seeds)
CRITERIA = {
    "C1": ("entropy_equality", [0]),
    "C2": ("zero_entropy_families", [0]),
    "C3": ("mean_width", [0]),
    "C4": ("mean_width", [0]),
    "C5": ("consistency_subcritical", TWENTY),
    "C6": ("inconsistency_sigma", TWENTY),
    "C7": ("auxiliary_loss", [0]),
    "C8": ("distortion_lab", [0]),
    "C9": ("distortion_lab", [0]),
    "C10": ("packing_lemma", [0]),
    "C11": ("sudakov", [0]),
}

_reports = {}


def _report(name, seeds):
    key = (name, tuple(seeds))
    if key not in _reports:
        cfg = validate({"schema_version": 1, "experiment": name, "seeds": seeds})
        _reports[key] = run_experiment(cfg)
    return _reports[key]


@pytest.mark.parametrize("criterion", list(CRITERIA))
def test_criterion(criterion, capsys):
    name, seeds = CRITERIA[criterion]
    rep = _report(name, seeds)
    verdict = rep.verdicts[criterion]
    with capsys.disabled():
        print(f"\n{verdict.line()}")
    assert not rep.partial, rep.notes
    failed = [c for c in verdict.checks if not c["passed"]]
    assert verdict.passed, failed
