import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import enumerate_optimum, plan_feasible
from tepkit.benders import HEURISTIC_EXPORT, NoFeasiblePlanError
from tepkit.cases import two_bus
from tepkit.feasibility import ensure_big_m, evaluate
from tepkit.heuristic import (DEFAULT_K, HeuristicTrace, RankEntry, eliminate_redundancy, jaccard,
                              plan_year, rank_scenarios, select_diverse, solve_k_milp)
from tepkit.network import CANDIDATE, Bus, Circuit, Network
from tepkit.scenario import ExpansionPlan, Scenario

from conftest import cached_instance


def entry(sid, score, circuits):
    return RankEntry(sid, score, frozenset(circuits))


def test_jaccard():
    assert jaccard(frozenset(), frozenset()) == 1.0
    assert jaccard(frozenset("a"), frozenset("b")) == 0.0
    assert jaccard(frozenset("ab"), frozenset("bc")) == pytest.approx(1 / 3)


def test_select_diverse_skips_similar():
    order = [entry("s1", 10, "ab"), entry("s2", 9, "ab"), entry("s3", 8, "cd")]
    assert select_diverse(order, 2) == ("s1", "s3")


def test_select_diverse_relaxes_threshold():
    order = [entry("s1", 10, "ab"), entry("s2", 9, "ab")]
    assert select_diverse(order, 2) == ("s1", "s2")


def test_select_diverse_size():
    order = [entry(f"s{i}", 10 - i, "ab") for i in range(8)]
    assert len(select_diverse(order, DEFAULT_K)) == DEFAULT_K
    assert len(select_diverse(order[:3], DEFAULT_K)) == 3


@given(seed=st.integers(0, 40), k=st.integers(1, 8))
def test_ranking_size(seed, k):
    inst = cached_instance(seed)
    ranking = rank_scenarios(inst.network, np.zeros(len(inst.network.candidates)), inst.scenarios, k)
    assert len(ranking.selection) == min(k, len(ranking.order))
    assert len(set(ranking.selection)) == len(ranking.selection)
    scores = [e.score for e in ranking.order]
    assert scores == sorted(scores, reverse=True)


def test_ranking_default_k():
    inst = cached_instance(3)
    net, scen = inst.network, inst.scenarios
    r = rank_scenarios(net, np.zeros(len(net.candidates)), scen)
    assert len(r.selection) == min(DEFAULT_K, len(r.order))


def test_k_milp_matches_enumeration():
    inst = cached_instance(1)
    res = solve_k_milp(inst.network, inst.scenarios)
    cost, _ = enumerate_optimum(inst.network, inst.scenarios)
    assert res.objective == cost
    assert plan_feasible(inst.network, res.plan.built, inst.scenarios)
    assert all(c.source == HEURISTIC_EXPORT for c in res.cuts)


def test_k_milp_respects_fixed():
    inst = cached_instance(2)
    first = inst.network.candidate_ids[0]
    res = solve_k_milp(inst.network, inst.scenarios, fixed_built=[first])
    assert first in res.plan.built


def test_k_milp_infeasible_names_scenario():
    buses = (Bus("A"), Bus("B"))
    circuits = (Circuit("e", "A", "B", 1.0, 10.0), Circuit("c", "A", "B", 1.0, 10.0, CANDIDATE, cost=1.0))
    net = ensure_big_m(Network(buses, circuits, "A"))
    s = Scenario("s", {"B": 100.0}, {"A": 100.0})
    with pytest.raises(NoFeasiblePlanError) as info:
        solve_k_milp(net, [s])
    assert s.id in info.value.scenarios


def superfluous_case():
    # c1 alone fixes the overload; c2 is a far more expensive parallel circuit
    buses = (Bus("A"), Bus("B"))
    circuits = (Circuit("e", "A", "B", 1.0, 60.0), Circuit("c1", "A", "B", 1.0, 60.0, CANDIDATE, cost=5.0),
                Circuit("c2", "A", "B", 1.0, 60.0, CANDIDATE, cost=50.0))
    net = ensure_big_m(Network(buses, circuits, "A"))
    return net, [Scenario("s", {"B": 100.0}, {"A": 100.0})]


def test_redundancy_removes_superfluous():
    net, scen = superfluous_case()
    trace = HeuristicTrace()
    out = eliminate_redundancy(net, ExpansionPlan.from_ids(net, ["c1", "c2"]), scen, trace=trace)
    assert out.built == ("c1",)
    assert trace.redundancy[0].candidate == "c2" and trace.redundancy[0].removed


def test_redundancy_tie_order_by_id():
    buses = (Bus("A"), Bus("B"))
    circuits = (Circuit("e", "A", "B", 1.0, 60.0), Circuit("c1", "A", "B", 1.0, 60.0, CANDIDATE, cost=5.0),
                Circuit("c2", "A", "B", 1.0, 60.0, CANDIDATE, cost=5.0))
    net = ensure_big_m(Network(buses, circuits, "A"))
    scen = [Scenario("s", {"B": 100.0}, {"A": 100.0})]
    out = eliminate_redundancy(net, ExpansionPlan.from_ids(net, ["c1", "c2"]), scen)
    # equal costs: the lower id is tried first and dropped
    assert out.built == ("c2",)


def test_redundancy_needs_feasible_plan():
    net, scen = superfluous_case()
    with pytest.raises(ValueError):
        eliminate_redundancy(net, ExpansionPlan.empty(net), scen)


def test_plan_year_feasible_at_zero():
    net, s = two_bus(limit=200)
    plan, trace = plan_year(ensure_big_m(net), [s])
    assert plan.built == ()
    assert trace.iterations == []


@pytest.mark.parametrize("seed", [0, 4, 5])
def test_plan_year_overload_free(seed):
    inst = cached_instance(seed)
    plan, trace = plan_year(inst.network, inst.scenarios)
    assert plan_feasible(inst.network, plan.built, inst.scenarios)
    for cut in trace.cuts:
        assert cut.is_valid_for_generator()
    assert trace.lines()


def test_k_milp_garver_peak(garver_net, garver_scen):
    peak = [s for s in garver_scen if s.id == "peak"]
    cost, _ = enumerate_optimum(garver_net, peak, max_additions=4)
    assert solve_k_milp(garver_net, peak).objective == cost
