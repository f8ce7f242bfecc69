import json
from dataclasses import replace

import pytest

from lipext.harness import (CRITERIA, SuiteConfig, VerifyReport, calibration_from_report,
                            exhaustive_suite, load_calibration, run_suite, standard_suite,
                            write_calibration)
from lipext.metric import DataError
from lipext.spaces import SpaceSpec

SMALL = SuiteConfig(queries=500, fd_queries=100, w1_pairs=50, lip_pairs=300, w1_instances=10)


@pytest.fixture(scope="module")
def small_report():
    specs = [SpaceSpec("grid", 1, 4), SpaceSpec("grid", 1, 8), SpaceSpec("grid", 2, 4)]
    return run_suite(specs, SMALL, {}, global_rows=False)


def test_suites():
    labels = [s.label for s in standard_suite()]
    assert len(labels) == 12 and "grid-d3-n16" in labels and "cantor-L5" in labels
    from lipext.spaces import generate_space
    assert all(len(generate_space(s)) <= 8 for s in exhaustive_suite())


def test_every_criterion_maps_to_a_report_field(small_report):
    assert sorted(c.id for c in small_report.criteria) == list(range(1, 13))
    d = small_report.to_dict()
    for cid, (_, fld, hard) in CRITERIA.items():
        assert fld in d
        assert small_report.criterion(cid).hard == hard
    assert {c for c in CRITERIA if CRITERIA[c][2]} == {2, 11, 12}


def test_small_suite_statuses(small_report):
    for cid in (1, 2, 3, 4, 12):
        assert small_report.criterion(cid).status == "pass"
    for cid in (6, 7, 8, 11):
        assert small_report.criterion(cid).status == "not-applicable"
    # nothing calibrated: both calibrated rows are reported, not judged
    assert small_report.criterion(9).status == "not-applicable"
    assert any("no calibration" in w for w in small_report.warnings)


def test_singleton_suite_is_vacuous():
    rep = run_suite([SpaceSpec("grid", 1, 1)], SMALL, {}, global_rows=False)
    assert rep.criterion(3).status == "pass"
    for cid in (1, 2, 4, 5, 9, 10):
        assert rep.criterion(cid).status == "vacuous-pass"
    assert rep.exit_code == 0


def test_corrupted_jet_marks_decay_rows_not_applicable():
    rep = run_suite([SpaceSpec("grid", 1, 4)], SMALL.with_overrides({"jet": "random"}), {})
    assert rep.criterion(6).status == "not-applicable"
    assert rep.criterion(7).status == "not-applicable"
    assert any("remainder hypothesis" in w for w in rep.warnings)
    assert rep.criterion(8).status == "pass" and rep.criterion(11).status == "pass"
    assert rep.exit_code == 0


def test_report_is_deterministic(small_report):
    specs = [SpaceSpec("grid", 1, 4), SpaceSpec("grid", 1, 8), SpaceSpec("grid", 2, 4)]
    again = run_suite(specs, SMALL, {}, global_rows=False)
    assert again.to_json(timing=False) == small_report.to_json(timing=False)
    assert "timing" not in json.loads(again.to_json(timing=False))


def test_calibration_round_trip(small_report, tmp_path):
    cal = calibration_from_report(small_report)
    assert set(cal) == {"9", "10"} and "grid-d1-n4" in cal["9"]
    path = write_calibration(cal, tmp_path / "cal.json")
    assert load_calibration(path) == cal
    assert load_calibration(tmp_path / "missing.json") == {}
    specs = [SpaceSpec("grid", 1, 4), SpaceSpec("grid", 1, 8), SpaceSpec("grid", 2, 4)]
    rep = run_suite(specs, SMALL, cal, global_rows=False)
    # values frozen from the same run sit inside the calibration band
    assert "of calibration: none;" in rep.criterion(9).summary
    assert "of calibration: none;" in rep.criterion(10).summary


def test_overrides():
    cfg = SuiteConfig().with_overrides({"fd_step": 1e-6, "queries": 200.0})
    assert cfg.fd_step == 1e-6 and cfg.queries == 200 and isinstance(cfg.queries, int)
    with pytest.raises(DataError):
        SuiteConfig().with_overrides({"nonsense": 1})
    with pytest.raises(DataError):
        SuiteConfig(jet="cubic")


def test_exit_code_reflects_failures(small_report):
    rep = VerifyReport(small_report.suite, small_report.config,
                       criteria=[replace(c) for c in small_report.criteria])
    assert rep.exit_code == 0 or any(c.status == "fail" for c in rep.criteria)
    rep.criteria[0].status = "fail"
    assert rep.exit_code == 3


def test_parallel_report_matches_serial(small_report):
    specs = [SpaceSpec("grid", 1, 4), SpaceSpec("grid", 1, 8), SpaceSpec("grid", 2, 4)]
    par = run_suite(specs, SMALL.with_overrides({"jobs": 2}), {}, global_rows=False)
    assert par.to_json(timing=False) == small_report.to_json(timing=False)
