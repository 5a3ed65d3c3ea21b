import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tepkit.areas import (MarginalCostSeries, PartitionError, area_balance, area_connected, check_partition,
                          cluster_areas, cut_set, dc_tie_flows, extract_area, make_partition)
from tepkit.cases import garver, garver_scenarios
from tepkit.feasibility import Z_TOL, ensure_big_m, evaluate
from tepkit.network import Bus, Circuit, Network
from tepkit.scenario import TAU_BAL, Scenario

from conftest import cached_instance


def path_network(n=6):
    buses = tuple(Bus(str(i)) for i in range(1, n + 1))
    circuits = tuple(Circuit(f"l{i}", str(i), str(i + 1), 1.0, 100.0) for i in range(1, n))
    return Network(buses, circuits, "1")


def path_costs(values):
    return MarginalCostSeries.from_mapping({str(i + 1): [v] for i, v in enumerate(values)})


def test_path_splits_at_cost_jump():
    p = cluster_areas(path_network(), path_costs([1, 1, 1, 9, 9, 9]), 2)
    assert p.as_sets() == frozenset({frozenset("123"), frozenset("456")})
    assert p.tie_lines == ("l3",)


def test_identity_endpoints():
    net = path_network()
    costs = path_costs([1, 2, 3, 4, 5, 6])
    one = cluster_areas(net, costs, 1)
    assert one.n_areas == 1 and one.tie_lines == ()
    each = cluster_areas(net, costs, 6)
    assert each.as_sets() == frozenset(frozenset([b]) for b in net.bus_ids)


def test_two_cliques():
    buses = tuple(Bus(str(i)) for i in range(1, 7))
    circuits = []
    for grp in (("1", "2", "3"), ("4", "5", "6")):
        for a in range(3):
            for b in range(a + 1, 3):
                circuits.append(Circuit(f"k{grp[a]}{grp[b]}", grp[a], grp[b], 1.0, 100.0))
    circuits.append(Circuit("bridge", "3", "4", 1.0, 100.0))
    net = Network(buses, tuple(circuits), "1")
    p = cluster_areas(net, path_costs([5, 5, 5, 50, 50, 50]), 2)
    assert p.tie_lines == ("bridge",)


def test_out_of_range():
    with pytest.raises(PartitionError, match="between 1 and 6"):
        cluster_areas(path_network(), path_costs([1] * 6), 7)


def test_disconnected_network_quota():
    buses = tuple(Bus(str(i)) for i in range(1, 7))
    circuits = (Circuit("a", "1", "2", 1.0, 1.0), Circuit("b", "2", "3", 1.0, 1.0),
                Circuit("c", "3", "4", 1.0, 1.0), Circuit("d", "5", "6", 1.0, 1.0))
    net = Network(buses, circuits, "1")
    p = cluster_areas(net, path_costs([1, 2, 3, 4, 5, 6]), 3)
    assert not check_partition(net, p)
    with pytest.raises(PartitionError):
        cluster_areas(net, path_costs([1] * 6), 1)


@given(seed=st.integers(0, 30), n=st.integers(1, 6), perm_seed=st.integers(0, 1000))
def test_partition_connected_and_relabel_invariant(seed, n, perm_seed):
    net = cached_instance(seed).network
    rng = np.random.default_rng(seed)
    costs = MarginalCostSeries(net.bus_ids, rng.integers(0, 20, (len(net.buses), 3)).astype(float))
    p = cluster_areas(net, costs, n)
    assert p.n_areas == n
    assert not check_partition(net, p)
    assert set(p.tie_lines) == set(cut_set(net, p.assignment))
    for label in p.labels:
        assert area_connected(net, p.buses(label))
    perm = np.random.default_rng(perm_seed).permutation(len(net.buses))
    shuffled = Network(tuple(net.buses[i] for i in perm), net.circuits, net.reference_bus)
    costs2 = MarginalCostSeries(tuple(net.bus_ids[i] for i in perm), costs.values[perm])
    assert cluster_areas(shuffled, costs2, n).as_sets() == p.as_sets()


def test_single_area_extract_is_whole():
    net, scen = garver(), garver_scenarios()
    p = make_partition(net, {b: "A1" for b in net.bus_ids})
    sub = extract_area(net, p, "A1", scen)
    assert set(sub.network.circuits) == set(net.circuits)
    assert all(not s.boundary for s in sub.scenarios)


def test_two_bus_sign_convention():
    net = Network((Bus("A"), Bus("B")), (Circuit("t", "A", "B", 1.0, 100.0),), "A")
    s = Scenario("s", {"B": 30.0}, {"A": 30.0}, tie_flows={"t": 30.0})
    p = make_partition(net, {"A": "A1", "B": "A2"})
    assert extract_area(net, p, "A2", [s]).scenarios[0].boundary == {"B": 30.0}
    assert extract_area(net, p, "A1", [s]).scenarios[0].boundary == {"A": -30.0}


def test_missing_tie_flow():
    net = Network((Bus("A"), Bus("B")), (Circuit("t", "A", "B", 1.0, 100.0),), "A")
    s = Scenario("s", {"B": 30.0}, {"A": 30.0})
    p = make_partition(net, {"A": "A1", "B": "A2"})
    with pytest.raises(PartitionError, match="t"):
        extract_area(net, p, "A2", [s])


def test_garver_areas_balance_and_bound():
    net = ensure_big_m(garver()).promote(["c2-6", "c3-5", "c4-6"])
    scen = garver_scenarios()
    costs = MarginalCostSeries.from_mapping({b: [float(i % 3), float(i)] for i, b in enumerate(net.bus_ids)})
    p = cluster_areas(net, costs, 2)
    assert not check_partition(net, p)
    for s in scen:
        flows = dc_tie_flows(net, p, s)
        total = 0.0
        whole = evaluate(net, np.zeros(len(net.candidates)), s)
        for label in p.labels:
            sub = extract_area(net, p, label, [s], tie_flows={s.id: flows})
            bal = area_balance(sub.scenarios[0])
            total += bal
            assert abs(bal) <= TAU_BAL * max(1.0, math.fsum(s.load.values()))
            z = evaluate(sub.network, np.zeros(len(sub.network.candidates)), sub.scenarios[0]).z_value
            assert z >= -Z_TOL
        assert abs(total) <= TAU_BAL
        assert whole.z_value >= 0
