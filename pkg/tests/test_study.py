import csv
import json
import math

import pytest

from tepkit.io import read_network, read_plans, write_network, write_scenarios
from tepkit.network import CANDIDATE, Bus, Circuit, Network
from tepkit.scenario import Scenario
from tepkit.study import AreaYearResult, ConfigError, PlanReport, StudyConfig, emit_plot_data, run_study


def corridor(tmp_path, loads, cand_limit=60.0):
    circuits = (Circuit("e", "A", "B", 1.0, 60.0),
                Circuit("c1", "A", "B", 1.0, cand_limit, CANDIDATE, cost=5.0, voltage_class="500"),
                Circuit("c2", "A", "B", 1.0, cand_limit, CANDIDATE, cost=9.0, voltage_class="345"))
    write_network(Network((Bus("A"), Bus("B")), circuits, "A"), tmp_path / "net.json")
    files = {}
    for year, load in loads.items():
        files[year] = f"s{year}.csv"
        write_scenarios([Scenario("s", {"B": load}, {"A": load})], tmp_path / files[year])
    return StudyConfig.from_dict({"years": list(loads), "network": "net.json", "scenarios": files,
                                  "method": "heuristic-then-benders", "output": "out", "unit": "M$"}, tmp_path)


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_feasible_at_zero_gives_empty_report(tmp_path):
    cfg = corridor(tmp_path, {2030: 50.0})
    report = run_study(cfg)
    assert report.total == 0.0 and not report.incomplete
    files = emit_plot_data(report, tmp_path / "plots")
    for path in files.values():
        assert len(rows(path)) == 1


def test_promotion_makes_next_year_free(tmp_path):
    cfg = corridor(tmp_path, {2030: 100.0, 2031: 110.0})
    report = run_study(cfg)
    assert report.invested(2030) == ("c1",)
    assert report.year_cost(2031) == 0.0
    dump = read_network(tmp_path / "out" / "network_2030.json")
    assert not dump.circuit("c1").is_candidate and dump.circuit("c1").cost == 0.0
    plans = read_plans(tmp_path / "out" / "plan.csv")
    assert "c1" not in plans["2031"]
    assert math.fsum(c for y in plans.values() for d, c in y.values() if d) == report.total


def test_plot_rows(tmp_path):
    cfg = corridor(tmp_path, {2030: 100.0})
    report = run_study(cfg)
    files = emit_plot_data(report, tmp_path / "plots")
    assert rows(files["cost_by_class"])[1:] == [["2030", "500", "5.0"]]


def test_plot_rows_multi_area(tmp_path):
    report = PlanReport("$", [
        AreaYearResult(1, "A1", "heuristic", ("a", "b"), {"a": 1.0, "b": 2.0}, {"a": "500", "b": "500"}),
        AreaYearResult(1, "A2", "heuristic", ("c",), {"c": 4.0}, {"c": "345"}),
        AreaYearResult(2, "A1", "heuristic", ("d",), {"d": 1.0}, {"d": "345"}),
        AreaYearResult(2, "A2", "heuristic", (), {}, {}),
    ], years=(1, 2))
    files = emit_plot_data(report, tmp_path)
    assert len(rows(files["cost_by_area_class"])) - 1 == 3
    assert len(rows(files["cost_by_area"])) - 1 == 3
    assert rows(files["cost_by_class"])[1] == ["1", "345", "4.0"]
    assert report.total == 8.0
    assert PlanReport.from_dict(json.loads(json.dumps(report.to_dict()))).total == 8.0


def test_unfixable_year_marks_incomplete(tmp_path):
    cfg = corridor(tmp_path, {2030: 100.0, 2031: 500.0, 2032: 10.0})
    report = run_study(cfg)
    assert report.incomplete
    assert report.errors and "2031" in report.errors[0]
    assert {e.year for e in report.entries} == {2030, 2031}


def test_config_checks(tmp_path):
    cfg = corridor(tmp_path, {2030: 1.0, 2031: 1.0})
    cfg.years = (2031, 2030)
    with pytest.raises(ConfigError, match="strictly increasing"):
        cfg.check()
    cfg = corridor(tmp_path, {2030: 1.0})
    cfg.scenarios[2030] = tmp_path / "nope.csv"
    with pytest.raises(ConfigError, match="missing file"):
        cfg.check()
    with pytest.raises(ConfigError, match="unknown config"):
        StudyConfig.from_dict({"years": [1], "network": "n", "scenarios": {}, "bogus": 1})
    cfg = corridor(tmp_path, {2030: 1.0})
    cfg.method = "magic"
    with pytest.raises(ConfigError, match="method"):
        cfg.check()


@pytest.mark.parametrize("method", ["heuristic", "benders"])
def test_methods(tmp_path, method):
    cfg = corridor(tmp_path, {2030: 100.0})
    cfg.method = method
    report = run_study(cfg)
    assert report.total == 5.0
    assert report.entries[0].method == method
