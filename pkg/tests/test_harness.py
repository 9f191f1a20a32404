import copy
import csv
import io
import json
import statistics

import pytest

from jigsawbench.errors import ConfigError, IncompatibleTasks, ReportError
from jigsawbench.harness import (
    aggregate,
    check_report,
    compare,
    format_comparison,
    load_config,
    load_report,
    parse_config,
    report_csv,
    run_suite,
    sha256_of,
    write_report,
)

BASIC = """
[task]
kind = tiling
[profile]
name = ur10e_d435
[harness]
repeats = 3
base_seed = 5
"""


def cfg(text=BASIC, **kw):
    return parse_config(text).with_overrides(**kw)


# ---------------------------------------------------------------- config


def test_parse_defaults():
    c = parse_config("[task]\nkind = pick_place\n")
    assert c.repeats == 10 and c.base_seed == 0 and c.profile.name == "ideal"
    assert str(c.task.code) == "000101" and c.task.clearance == 0.6


def test_parse_full(tmp_path):
    (tmp_path / "rig.cfg").write_text("[profile]\nbase = panda_d435\n[camera]\nlabel_confusion = 0.2\n")
    text = """
[task]
kind = assembly_dexterous
code = 100111
clearance = 0.4
max_actions = 6
[profile]
file = rig.cfg
arm.repeatability = 0.3
[pipeline]
segmenter = oracle
param.min_cells = 50
[harness]
repeats = 4
base_seed = 0x10
jobs = 2
output = out.json
"""
    p = tmp_path / "run.cfg"
    p.write_text(text)
    c = load_config(p)
    assert c.task.kind == "assembly_dexterous" and c.task.clearance == 0.4 and c.task.max_actions == 6
    assert c.profile.arm.joint_count == 7 and c.profile.arm.repeatability == 0.3
    assert c.profile.camera.label_confusion == 0.2
    assert c.pipeline.segmenter == "oracle" and c.pipeline.params == {"min_cells": 50}
    assert (c.repeats, c.base_seed, c.jobs, c.output_path) == (4, 16, 2, "out.json")


@pytest.mark.parametrize("text", [
    "[task]\nkind = tiling\ncolour = red\n",
    "[task]\nkind = tiling\n[robot]\nx = 1\n",
    "[task]\nkind = tiling\n[profile]\nlens.focal = 3\n",
    "[task]\nkind = tiling\n[profile]\narm.wingspan = 3\n",
    "[task]\nkind = tiling\n[pipeline]\ndetector = ssd\n",
    "[task]\nkind = tiling\n[harness]\nthreads = 4\n",
    "[task]\nkind = tiling\n[harness]\nrepeats = 0\n",
    "[task]\nkind = tiling\n[harness]\nrepeats = ten\n",
    "[task]\nkind = tiling\n[harness]\nbase_seed = -1\n",
    "[task]\nkind = tiling\n[pipeline]\nsegmenter = ssd\n",
    "[task]\nkind = tiling\n[profile]\nname = ideal\nfile = x.cfg\n",
    "[task]\nkind = juggling\n",
    "[task]\ncode = 000101\n",
    "[task]\nkind = tiling\ncode = 0001\n",
    "[task]\nkind = assembly_simple\ncode = 000101\n",
    "not an ini file",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


# ---------------------------------------------------------------- suites


@pytest.fixture(scope="module")
def report():
    return run_suite(cfg())


def test_seeds_and_records(report):
    trials = report["body"]["trials"]
    assert [t["trial_index"] for t in trials] == [0, 1, 2]
    assert [t["seed"] for t in trials] == [5, 6, 7]
    for t in trials:
        assert len(t["result"]["log"]) == t["result"]["actions_used"]


def test_aggregates_hand_computed(report):
    scores = [t["result"]["score"] for t in report["body"]["trials"]]
    agg = report["body"]["aggregates"]["score"]
    assert agg["mean"] == statistics.fmean(scores)
    assert agg["std"] == statistics.stdev(scores)
    assert (agg["min"], agg["max"], agg["n"]) == (min(scores), max(scores), 3)


def test_self_consistent(report):
    check_report(report)


def test_timings_outside_body(report):
    assert "wall" not in json.dumps(report["body"])
    assert len(report["meta"]["trial_wall_clock"]) == 3


def test_single_repeat_std_zero():
    rep = run_suite(cfg(repeats=1))
    assert rep["body"]["aggregates"]["score"]["std"] == 0.0


def test_same_config_same_body(report):
    again = run_suite(cfg())
    assert again["body_sha256"] == report["body_sha256"]


def test_ap_absent_for_pick_place():
    rep = run_suite(cfg("[task]\nkind = pick_place\n[harness]\nrepeats = 2\n"))
    assert rep["body"]["aggregates"]["ap"] is None
    assert rep["body"]["aggregates"]["area_rate"] is None


def test_failed_trials_recorded():
    from jigsawbench.pipeline import register_stage

    @register_stage("pick_planner", "test_explodes")
    def explodes(obs, box, params):
        raise RuntimeError("boom")

    rep = run_suite(cfg("[task]\nkind = tiling\n[pipeline]\npick_planner = test_explodes\n[harness]\nrepeats = 2\n"))
    assert rep["body"]["failed_trials"] == 2
    assert all(t["status"] == "error" and "boom" in t["error"] for t in rep["body"]["trials"])
    assert rep["body"]["aggregates"]["score"] is None
    check_report(rep)


def test_aggregate_skips_errors():
    ok = {"status": "ok", "result": {m: 1.0 for m in ("score", "mean_iou", "ap", "success_rate", "grasp_time_s",
                                                      "planned_duration_s", "area_rate", "completion",
                                                      "actions_used")} | {"stacking_flag": True}}
    agg = aggregate([ok, {"status": "error"}])
    assert agg["score"]["n"] == 1 and agg["stacking_flag"]["mean"] == 1.0


# ---------------------------------------------------------------- files


def test_write_and_load(tmp_path, report):
    jp, cp = write_report(report, tmp_path / "r.json")
    assert load_report(jp)["body_sha256"] == report["body_sha256"]
    rows = list(csv.DictReader(io.StringIO(cp.read_text())))
    assert len(rows) == 3 and float(rows[0]["score"]) == report["body"]["trials"][0]["result"]["score"]
    assert cp.read_text() == report_csv(report)


@pytest.mark.parametrize("path,value", [
    (("body", "trials", 0, "result", "score"), 0.123),
    (("body", "aggregates", "score", "mean"), 0.5),
    (("body_sha256",), "0" * 64),
])
def test_tamper_detected(report, path, value):
    bad = copy.deepcopy(report)
    node = bad
    for k in path[:-1]:
        node = node[k]
    node[path[-1]] = value
    with pytest.raises(ReportError):
        check_report(bad)


def test_aggregate_tamper_with_rehash(report):
    bad = copy.deepcopy(report)
    bad["body"]["aggregates"]["score"]["mean"] += 0.01
    bad["body_sha256"] = sha256_of(bad["body"])
    with pytest.raises(ReportError):
        check_report(bad)


def test_load_garbage(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{")
    with pytest.raises(ReportError):
        load_report(p)
    p.write_text("{}")
    with pytest.raises(ReportError):
        load_report(p)


# ---------------------------------------------------------------- compare


def test_compare_identical(report):
    cmp = compare([report, report])
    assert all(d["delta"] == 0 and not d["flagged"] for row in cmp["rows"] for d in row["deltas"])
    assert "mean_iou" in format_comparison(cmp)


def test_compare_flags_large_ratio_change(report):
    other = copy.deepcopy(report)
    other["body"]["aggregates"]["mean_iou"]["mean"] -= 0.06
    row = next(r for r in compare([report, other])["rows"] if r["metric"] == "mean_iou")
    assert row["deltas"][0]["flagged"]
    row = next(r for r in compare([report, other], threshold=0.1)["rows"] if r["metric"] == "mean_iou")
    assert not row["deltas"][0]["flagged"]


def test_compare_time_is_relative(report):
    other = copy.deepcopy(report)
    other["body"]["aggregates"]["grasp_time_s"]["mean"] *= 1.04
    row = next(r for r in compare([report, other])["rows"] if r["metric"] == "grasp_time_s")
    assert not row["deltas"][0]["flagged"]
    assert row["deltas"][0]["relative_pct"] == pytest.approx(4.0)


def test_compare_incompatible(report):
    other = run_suite(cfg("[task]\nkind = pick_place\n[harness]\nrepeats = 1\n"))
    with pytest.raises(IncompatibleTasks):
        compare([report, other])


def test_compare_needs_two(report):
    with pytest.raises(ValueError):
        compare([report])


def test_inline_comments_allowed():
    c = parse_config("[task]\nkind = tiling   ; headline task\n[harness]\nrepeats = 2  # short\n")
    assert c.task.kind == "tiling" and c.repeats == 2
