import csv
import json
import math
import os
import xml.etree.ElementTree as ET

import numpy as np

from ..lib.classifier import PerturbSpec
from ..lib.monte_carlo import Attack
from ..lib.reports import (
    SWEEP_COLUMNS,
    VERSION,
    format_cell,
    junit_tree,
    to_jsonable,
    write_csv,
    write_json,
    write_junit,
    write_manifest,
    write_table,
)
from ..lib.verification import CheckResult, SuiteResult


def test_to_jsonable():
    payload = {
        "array": np.array([1.0, math.inf]),
        "flag": np.bool_(True),
        "count": np.int64(3),
        "nan": float("nan"),
        "attack": Attack.PGD,
        "pert": PerturbSpec(p=math.inf, epsilon=0.1),
        "pair": (1, -math.inf),
    }
    out = to_jsonable(payload)
    assert out["array"] == [1.0, "inf"]
    assert out["flag"] is True
    assert out["count"] == 3
    assert out["nan"] == "nan"
    assert out["attack"] == "pgd"
    assert out["pert"]["p"] == "inf"
    assert out["pair"] == [1, "-inf"]
    json.dumps(out)


def test_format_cell():
    assert format_cell(None) == ""
    assert format_cell(True) == "true"
    assert format_cell(np.int32(4)) == "4"
    assert format_cell(1 / 3) == "0.333333333333"
    assert format_cell(math.inf) == "inf"
    assert format_cell("inf") == "inf"


def test_write_csv_keeps_column_order(tmp_path):
    path = write_csv(str(tmp_path / "sweep.csv"), [{"R": 2.0, "scenario_id": "a", "extra": 1}], SWEEP_COLUMNS)
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == SWEEP_COLUMNS
    assert rows[1][:2] == ["a", "2"]
    assert rows[1][2:] == [""] * (len(SWEEP_COLUMNS) - 2)


def test_write_table_formats(tmp_path):
    rows = [{"R": 1.0, "gap": 0.0}, {"R": 2.0, "gap": 0.01}]
    assert write_table(str(tmp_path), "gap", rows, "csv") == [str(tmp_path / "gap.csv")]
    written = write_table(str(tmp_path / "nested"), "gap", rows, "both")
    assert [os.path.basename(p) for p in written] == ["gap.csv", "gap.json"]
    with open(written[1]) as handle:
        assert json.load(handle) == rows
    assert not [name for name in os.listdir(tmp_path / "nested") if name.startswith(".tmp-")]


def suite_with_failure():
    passed = CheckResult("good", "gaussian", passed=True, distances={"std.plus": 0.4}, elapsed=0.5)
    failed = CheckResult(
        "bad", "gaussian", passed=False, distances={"std.plus": 9.0, "std.minus": 1.0, "rob.plus": 7.5}, elapsed=0.25
    )
    broken = CheckResult("broken", "cauchy", passed=False, error="no finite optimum")
    return SuiteResult([passed, failed, broken], threshold=3.2, seed=4, n_major=1000)


def test_junit_tree():
    root = junit_tree(suite_with_failure()).getroot()
    assert root.get("tests") == "3"
    assert root.get("failures") == "1"
    assert root.get("errors") == "1"
    properties = {p.get("name"): p.get("value") for p in root.iter("property")}
    assert properties == {"seed": "4", "n_major": "1000", "threshold_sigma": "3.2"}
    cases = {c.get("name"): c for c in root.iter("testcase")}
    assert cases["good"].find("failure") is None
    message = cases["bad"].find("failure").get("message")
    assert message.startswith("std.plus=9.00 sigma, rob.plus=7.50 sigma")
    assert cases["broken"].find("error").get("message") == "no finite optimum"


def test_write_junit_is_parseable(tmp_path):
    path = write_junit(str(tmp_path / "verify.xml"), suite_with_failure())
    assert ET.parse(path).getroot().tag == "testsuite"


def test_manifest(tmp_path):
    first = write_json(str(tmp_path / "a.json"), {"x": 1})
    manifest = write_manifest(str(tmp_path), "solve", {"kind": "toy"}, [first])
    assert manifest["version"] == VERSION
    assert manifest["outputs"][0]["file"] == "a.json"
    assert manifest["outputs"][0]["size_bytes"] == os.path.getsize(first)
    with open(tmp_path / "manifest.json") as handle:
        assert json.load(handle)["config"] == {"kind": "toy"}
