import json

import numpy as np
import pytest

from tepkit.areas import MarginalCostSeries
from tepkit.cases import garver, garver_scenarios
from tepkit.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, main
from tepkit.io import read_cuts, read_plans, write_marginal_costs, write_network, write_scenarios
from tepkit.network import CANDIDATE, Bus, Circuit, Network
from tepkit.scenario import Scenario


@pytest.fixture
def files(tmp_path):
    circuits = (Circuit("e", "A", "B", 1.0, 60.0), Circuit("c1", "A", "B", 1.0, 60.0, CANDIDATE, cost=5.0),
                Circuit("c2", "A", "B", 1.0, 60.0, CANDIDATE, cost=9.0))
    write_network(Network((Bus("A"), Bus("B")), circuits, "A"), tmp_path / "net.json")
    write_scenarios([Scenario("hi", {"B": 100.0}, {"A": 100.0}), Scenario("lo", {"B": 20.0}, {"A": 20.0})],
                    tmp_path / "s.csv")
    return tmp_path


def run(files, *argv):
    code = main([*argv, "--workdir", str(files / "work"), "-q"])
    verb = argv[0]
    summary = json.loads((files / "work" / f"{verb}-summary.json").read_text())
    assert (files / "work" / f"{verb}.log").exists()
    assert summary["exit_code"] == code
    return code, summary


def test_validate(files):
    code, s = run(files, "validate", "--network", str(files / "net.json"), "--scenarios", str(files / "s.csv"))
    assert code == EXIT_OK and s["valid"]
    (files / "bad.json").write_text(json.dumps({"format": "tepkit-network", "version": 1, "reference_bus": "Z",
                                                "buses": [{"id": "A"}], "circuits": []}))
    code, s = run(files, "validate", "--network", str(files / "bad.json"))
    assert code == EXIT_INPUT and s["issues"]


def test_evaluate(files):
    net = ["--network", str(files / "net.json"), "--scenarios", str(files / "s.csv")]
    code, s = run(files, "evaluate", *net, "--scenario", "hi")
    assert code == EXIT_INFEASIBLE and s["z"] == pytest.approx(40.0)
    code, s = run(files, "evaluate", *net, "--scenario", "hi", "--build", "c1")
    assert code == EXIT_OK and s["z"] == 0.0
    code, s = run(files, "evaluate", *net, "--scenario", "nope")
    assert code == EXIT_INPUT


def test_rank(files):
    code, s = run(files, "rank", "--network", str(files / "net.json"), "--scenarios", str(files / "s.csv"))
    assert code == EXIT_OK and s["selection"] == ["hi"]


def test_plan_then_benders(files):
    net = ["--network", str(files / "net.json"), "--scenarios", str(files / "s.csv")]
    code, s = run(files, "plan", *net, "--out", str(files / "plan.csv"), "--cuts-out", str(files / "cuts.json"))
    assert code == EXIT_OK and s["plan"] == ["c1"] and s["cost"] == 5.0
    assert read_plans(files / "plan.csv")["0"]["c1"] == (1, 5.0)
    assert read_cuts(files / "cuts.json")
    code, s = run(files, "benders", *net, "--warm-cuts", str(files / "cuts.json"), "--plan", str(files / "plan.csv"))
    assert code == EXIT_OK and s["cost"] == 5.0 and s["rejected_warm_cuts"] == 0


def test_cluster(files):
    net = garver()
    write_network(net, files / "g.json")
    write_marginal_costs(MarginalCostSeries(net.bus_ids, np.arange(6.0).reshape(6, 1)), files / "mc.csv")
    code, s = run(files, "cluster", "--network", str(files / "g.json"), "--marginal-costs", str(files / "mc.csv"),
                  "--n-areas", "2", "--include-candidates", "--out", str(files / "p.csv"))
    assert code == EXIT_OK and len(s["areas"]) == 2
    code, s = run(files, "cluster", "--network", str(files / "g.json"), "--marginal-costs", str(files / "mc.csv"),
                  "--n-areas", "9")
    assert code == EXIT_INPUT


def test_study_and_report(files):
    (files / "study.json").write_text(json.dumps({"years": [1, 2], "network": "net.json",
                                                  "scenarios": {"1": "s.csv", "2": "s.csv"}, "output": "out"}))
    code, s = run(files, "study", "--config", str(files / "study.json"))
    assert code == EXIT_OK and s["total"] == 5.0
    code, s = run(files, "report", "--report", str(files / "out" / "report.json"), "--output", str(files / "plots"))
    assert code == EXIT_OK and (files / "plots" / "cost_by_class.csv").exists()


def test_missing_input(files):
    code, s = run(files, "plan", "--network", str(files / "none.json"), "--scenarios", str(files / "s.csv"))
    assert code == EXIT_INPUT and "not found" in s["error"]


def test_infeasible_exit(files):
    write_scenarios([Scenario("huge", {"B": 1000.0}, {"A": 1000.0})], files / "h.csv")
    code, _ = run(files, "benders", "--network", str(files / "net.json"), "--scenarios", str(files / "h.csv"))
    assert code == EXIT_INFEASIBLE
