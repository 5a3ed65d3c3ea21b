import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import curtailment_highs
from tepkit.cases import garver, garver_scenarios, two_bus
from tepkit.feasibility import (AssemblyError, Z_TOL, assemble_feasibility_lp, assign_big_m,
                                compute_big_m, ensure_big_m, evaluate, evaluate_many, operation_block)
from tepkit.lp import dual_objective
from tepkit.lp.external import highs
from tepkit.network import CANDIDATE, Bus, Circuit, Network
from tepkit.scenario import ExpansionPlan, Scenario

from conftest import cached_instance


def built_ids(net, x):
    return [c for c, v in zip(net.candidate_ids, x) if v]


def test_two_bus_curtailment():
    net, s = two_bus(limit=60)
    res = evaluate(net, ExpansionPlan.empty(net), s)
    assert res.z_value == pytest.approx(40.0)
    assert res.curtailment["B"] == pytest.approx(40.0)
    assert math.fsum(res.violations.values()) == pytest.approx(40.0)
    assert res.overloaded_circuits


def test_two_bus_within_limit():
    net, s = two_bus(limit=100)
    res = evaluate(net, ExpansionPlan.empty(net), s)
    assert res.z_value == 0.0
    assert not res.overloaded_circuits


def test_dual_objective_equals_z(garver_net, garver_scen):
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.integers(0, 2, 15)
        for s in garver_scen:
            res = evaluate(garver_net, x, s)
            assert res.dual_objective == pytest.approx(res.z_value, abs=1e-6)
            assert res.z_value == pytest.approx(curtailment_highs(garver_net, built_ids(garver_net, x), s), abs=1e-6)


def test_highs_adapter_gives_same_z(garver_net, garver_scen):
    x = np.zeros(15)
    x[[2, 7]] = 1
    for s in garver_scen:
        assert evaluate(garver_net, x, s, solver=highs).z_value == pytest.approx(
            evaluate(garver_net, x, s).z_value, abs=1e-6)


def test_islanded_load_is_unserved():
    # bus 6 has no existing circuit; with nothing built its generation is stranded
    net, scen = ensure_big_m(garver()), garver_scenarios()
    res = evaluate(net, np.zeros(15), scen[0])
    assert res.z_value > 0
    assert res.severity >= res.unserved > 0


def test_building_can_increase_curtailment():
    # parallel low-limit candidate attracts flow and binds first
    buses = (Bus("A"), Bus("B"))
    circuits = (Circuit("e", "A", "B", 1.0, 100.0), Circuit("c", "A", "B", 1.0, 10.0, CANDIDATE, cost=1.0))
    net = ensure_big_m(Network(buses, circuits, "A"))
    s = Scenario("s", {"B": 100.0}, {"A": 100.0})
    assert evaluate(net, [0], s).z_value == pytest.approx(0.0, abs=1e-9)
    assert evaluate(net, [1], s).z_value == pytest.approx(80.0)
    assert curtailment_highs(net, ["c"], s) == pytest.approx(80.0)


def test_big_m_matches_deleted_circuit(garver_net, garver_scen):
    for cand in garver_net.candidates:
        others = [c.id for c in garver_net.candidates if c.id != cand.id]
        for s in garver_scen:
            z = evaluate(garver_net, ExpansionPlan.from_ids(garver_net, others), s).z_value
            assert z == pytest.approx(curtailment_highs(garver_net, others, s), abs=1e-6)


def test_big_m_shortest_path():
    net = garver()
    c = net.circuit("c1-2")
    # e1-2 exists: one hop of limit / F
    e = net.circuit("e1-2")
    F = net.flow_coefficient(c)
    expect = F * e.flow_limit / net.flow_coefficient(e)
    assert compute_big_m(net, c) == pytest.approx(expect)


def test_assign_big_m_keeps_given_values():
    net = garver()
    c = net.circuit("c1-2")
    net2 = net.with_circuits([x if x.id != "c1-2" else type(c)(**{**c.__dict__, "big_m": 7.0}) for x in net.circuits])
    assert assign_big_m(net2).circuit("c1-2").big_m == 7.0
    assert assign_big_m(net2, overwrite=True).circuit("c1-2").big_m != 7.0


def test_bad_plan_vector(garver_net, garver_scen):
    with pytest.raises(AssemblyError):
        assemble_feasibility_lp(garver_net, np.zeros(3), garver_scen[0])
    with pytest.raises(AssemblyError):
        assemble_feasibility_lp(garver_net, np.full(15, 2.0), garver_scen[0])


def test_block_reuse(garver_net, garver_scen):
    blocks = {s.id: operation_block(garver_net, s) for s in garver_scen}
    a = evaluate_many(garver_net, np.zeros(15), garver_scen, blocks=blocks)
    b = evaluate_many(garver_net, np.zeros(15), garver_scen, workers=2)
    assert [r.z_value for r in a] == pytest.approx([r.z_value for r in b])


@given(seed=st.integers(0, 30), bits=st.integers(0, 2 ** 9 - 1), which=st.integers(0, 9))
def test_z_zero_iff_no_violation(seed, bits, which):
    inst = cached_instance(seed)
    net = inst.network
    n = len(net.candidates)
    x = np.array([(bits >> j) & 1 for j in range(n)], dtype=float)
    s = inst.scenarios[which % len(inst.scenarios)]
    res = evaluate(net, x, s)
    assert res.z_value >= 0
    assert res.dual_objective == pytest.approx(res.z_value, abs=1e-6)
    assert (res.z_value <= Z_TOL) == (len(res.overloaded_circuits) == 0 and res.unserved <= Z_TOL)
    assert res.z_value == pytest.approx(curtailment_highs(net, built_ids(net, x), s), abs=1e-5)


@given(seed=st.integers(0, 20), ref=st.integers(0, 11), bits=st.integers(0, 511))
def test_reference_bus_does_not_matter(seed, ref, bits):
    inst = cached_instance(seed)
    net = inst.network
    x = np.array([(bits >> j) & 1 for j in range(len(net.candidates))], dtype=float)
    other = net.replace(reference_bus=net.bus_ids[ref % len(net.buses)])
    for s in inst.scenarios[:2]:
        assert evaluate(other, x, s, diagnose=False).z_value == pytest.approx(
            evaluate(net, x, s, diagnose=False).z_value, abs=1e-6)


def test_z_equals_total_curtailment(garver_net, garver_scen):
    for s in garver_scen:
        res = evaluate(garver_net, np.zeros(15), s)
        assert res.z_value == pytest.approx(sum(res.curtailment.values()), abs=1e-6)
        for b, r in res.curtailment.items():
            assert -1e-9 <= r <= s.load.get(b, 0.0) + 1e-9
