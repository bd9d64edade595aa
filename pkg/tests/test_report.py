import json
import math

import numpy as np
from hypothesis import given, strategies as st

from ergofit.report import RunReport, Table, Verdict, emit_report, load_tables, parse_cell


@given(st.floats(allow_nan=False))
def test_float_cells_roundtrip_exactly(x):
    t = Table("t", ["v"], [{"v": x}])
    assert t.roundtrip().rows[0]["v"] == x


def test_mixed_cells():
    t = Table("t", ["a", "b", "c", "d", "e"])
    t.add(a=np.int64(3), b=True, c=None, d="rotation", e=np.float32(0.5))
    r = t.roundtrip().rows[0]
    assert r == {"a": 3, "b": True, "c": None, "d": "rotation", "e": 0.5}
    assert parse_cell("inf") == math.inf


def test_header_only_table():
    t = Table("empty", ["x", "y"])
    assert t.to_csv() == "x,y\n"
    back = t.roundtrip()
    assert back.columns == ["x", "y"] and back.rows == []


def test_verdict_accumulates():
    v = Verdict("C9", True)
    v.check("a", 0.1, 0.2, True)
    v.check("b", math.inf, 1.0, False)
    assert not v.passed
    assert v.line() == "C9: FAIL  failed: b"
    assert v.to_dict()["checks"][1]["value"] == "inf"


def test_emit_and_reload(tmp_path):
    t = Table("rows", ["seed", "n", "y"], [{"seed": 0, "n": 1, "y": 0.5}, {"seed": 1, "n": 1, "y": 0.25}])
    s = Table("shared", ["k"], [{"k": 2}])
    v = Verdict("C1", True)
    rep = RunReport("x", {"experiment": "x"}, [0, 1], {"rows": t, "shared": s}, {"m": np.float64(1.0)}, {"C1": v},
                    plot=[("rows", "n", "y", ("seed",))])
    paths = emit_report(rep, tmp_path)
    assert {p.rsplit("/", 1)[1] for p in paths} == {"report.json", "rows.csv", "shared.csv", "plot_long.csv"}
    d = json.loads((tmp_path / "report.json").read_text())
    assert d["passed"] and d["shared"] == {"shared": [{"k": 2}]}
    assert [p["seed"] for p in d["per_seed"]] == [0, 1]
    assert load_tables(tmp_path, ["rows"])["rows"].rows == t.rows
    assert (tmp_path / "plot_long.csv").read_text().splitlines()[0] == "x,y,series,seed"
