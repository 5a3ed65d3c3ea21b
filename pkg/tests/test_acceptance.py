"""Acceptance criteria.

Each test records one PASS/FAIL line per criterion, shown in the terminal
summary. Reference values come from the independent oracles in
``oracles.py`` (scipy HiGHS and brute-force enumeration).
"""

import functools
import itertools
import math
import statistics

import numpy as np
import pytest

from oracles import curtailment_highs, enumerate_optimum, plan_feasible
from tepkit import benders, study
from tepkit.areas import (MarginalCostSeries, area_balance, area_connected, check_partition, cluster_areas,
                          extract_area)
from tepkit.cases import garver, garver_scenarios, random_instance
from tepkit.feasibility import Z_TOL, ensure_big_m, evaluate
from tepkit.heuristic import DEFAULT_K, eliminate_redundancy, plan_year, rank_scenarios, solve_k_milp
from tepkit.io import read_network, read_plans, write_network, write_scenarios
from tepkit.lp import TAU_DUAL, TAU_FEAS, TAU_GAP
from tepkit.network import CANDIDATE, Bus, Circuit, Network
from tepkit.scenario import TAU_BAL, ExpansionPlan, Scenario

from conftest import cached_instance, record

N_RANDOM = 24
SCENARIO_SETS = {1: ("peak",), 2: ("peak", "export"), 3: ("peak", "offpeak", "export")}


def garver_subset(n):
    scen = {s.id: s for s in garver_scenarios()}
    return [scen[i] for i in SCENARIO_SETS[n]]


@functools.lru_cache(maxsize=None)
def garver_oracle(n):
    return enumerate_optimum(garver(), garver_subset(n), max_additions=5)


@functools.lru_cache(maxsize=None)
def random_runs(seed):
    """Heuristic, cold Benders and warm Benders on one random instance."""
    inst = cached_instance(seed)
    h_plan, trace = plan_year(inst.network, inst.scenarios)
    cold, s_cold = benders.solve(inst.network, inst.scenarios)
    warm, s_warm = benders.solve(inst.network, inst.scenarios, trace.cuts, incumbent0=h_plan)
    return h_plan, trace, cold, s_cold, warm, s_warm


@pytest.mark.parametrize("n", [1, 2, 3])
def test_criterion_1_benders_oracle(garver_net, n):
    cost, built = garver_oracle(n)
    plan, state = benders.solve(garver_net, garver_subset(n))
    ok = state.status == benders.CONVERGED and abs(plan.total_cost - cost) <= TAU_GAP
    record(1, ok, f"{n} scenario(s): benders {plan.total_cost} vs oracle {cost}")
    assert ok


@pytest.mark.parametrize("n", [1, 2, 3])
def test_criterion_2_monolithic_oracle(garver_net, n):
    cost, _ = garver_oracle(n)
    res = solve_k_milp(garver_net, garver_subset(n))
    ok = abs(res.objective - cost) <= TAU_GAP and plan_feasible(garver_net, res.plan.built, garver_subset(n))
    record(2, ok, f"{n} scenario(s): milp {res.objective} vs oracle {cost}")
    assert ok


def test_criterion_3_heuristic_quality():
    equal, bad = 0, []
    for seed in range(N_RANDOM):
        inst = cached_instance(seed)
        h_plan, _, cold, _, _, _ = random_runs(seed)
        if h_plan.total_cost < cold.total_cost:
            bad.append(f"seed {seed}: heuristic below benders")
        if not plan_feasible(inst.network, h_plan.built, inst.scenarios):
            bad.append(f"seed {seed}: heuristic plan overloaded")
        equal += h_plan.total_cost == cold.total_cost
    ok = not bad and equal >= 0.5 * N_RANDOM
    record(3, ok, f"{equal}/{N_RANDOM} equal, {len(bad)} violation(s)")
    assert not bad, bad
    assert equal >= 0.5 * N_RANDOM


def test_criterion_4_warm_start():
    cold_it, warm_it, mismatch = [], [], []
    for seed in range(N_RANDOM):
        _, _, cold, s_cold, warm, s_warm = random_runs(seed)
        cold_it.append(s_cold.iteration)
        warm_it.append(s_warm.iteration)
        if cold.total_cost != warm.total_cost:
            mismatch.append(seed)
    ok = statistics.median(warm_it) <= statistics.median(cold_it) and not mismatch
    record(4, ok, f"median iterations warm {statistics.median(warm_it)} vs cold {statistics.median(cold_it)}, "
                  f"{len(mismatch)} cost mismatch(es)")
    assert ok


def feasible_set(inst):
    net = inst.network
    out = []
    for vec in itertools.product((0, 1), repeat=len(net.candidates)):
        built = [c for c, v in zip(net.candidate_ids, vec) if v]
        if all(curtailment_highs(net, built, s) <= Z_TOL for s in inst.scenarios):
            out.append(np.array(vec, dtype=float))
    return out


def test_criterion_5_cut_validity():
    checked, failures = 0, []
    for seed in range(N_RANDOM):
        inst = cached_instance(seed)
        if len(inst.network.candidates) > 12:
            continue
        _, trace, _, s_cold, _, s_warm = random_runs(seed)
        feasible = feasible_set(inst)
        for cut in [*trace.cuts, *s_cold.cuts, *s_warm.cuts]:
            checked += 1
            if cut.plan is None or cut.value(np.array(cut.plan, float)) <= Z_TOL / 2:
                failures.append(f"seed {seed} {cut.origin}: generator not cut off")
            if any(cut.violated_by(x) for x in feasible):
                failures.append(f"seed {seed} {cut.origin}: removes a feasible plan")
    record(5, not failures, f"{checked} cuts checked, {len(failures)} exception(s)")
    assert not failures, failures[:5]


def small_networks():
    nets = [(ensure_big_m(garver()), garver_scenarios())]
    for seed in range(N_RANDOM):
        inst = cached_instance(seed)
        if len(inst.network.buses) <= 10:
            nets.append((inst.network, inst.scenarios))
    return nets


def test_criterion_6_big_m():
    checked, worst = 0, 0.0
    for net, scen in small_networks():
        ids = net.candidate_ids
        for j, cand in enumerate(net.candidates):
            others = [c for c in ids if c != cand.id]
            for rest in ([], others):
                x = np.array([1.0 if c in rest else 0.0 for c in ids])
                for s in scen:
                    z = evaluate(net, x, s, diagnose=False).z_value
                    ref = curtailment_highs(net.drop_circuits([cand.id]), rest, s)
                    worst = max(worst, abs(z - ref))
                    checked += 1
    ok = worst <= TAU_FEAS
    record(6, ok, f"{checked} comparisons, largest difference {worst:.2e}")
    assert ok


def random_calls(n_calls, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n_calls):
        inst = cached_instance(int(rng.integers(0, N_RANDOM)))
        n = len(inst.network.candidates)
        yield inst, rng.integers(0, 2, n).astype(float), inst.scenarios[int(rng.integers(0, len(inst.scenarios)))]


def test_criterion_7_duality_gap():
    worst = 0.0
    for inst, x, s in random_calls(1000):
        res = evaluate(inst.network, x, s, diagnose=False)
        worst = max(worst, abs(res.dual_objective - res.z_value))
    ok = worst <= TAU_DUAL
    record(7, ok, f"duality gap max {worst:.2e} over 1000 calls")
    assert ok


def test_criterion_7_zero_iff_no_violation():
    mismatch = 0
    for inst, x, s in random_calls(1000, seed=1):
        res = evaluate(inst.network, x, s)
        mismatch += (res.z_value <= Z_TOL) != (not res.overloaded_circuits)
    record(7, mismatch == 0, f"z=0 <=> no violation: {mismatch} mismatch(es) in 1000 calls")
    assert mismatch == 0


def test_criterion_7_monotonicity():
    rng = np.random.default_rng(2)
    violations = []
    for k, (inst, x, s) in enumerate(random_calls(500, seed=3)):
        x2 = np.maximum(x, rng.integers(0, 2, x.size))
        z1 = evaluate(inst.network, x, s, diagnose=False).z_value
        z2 = evaluate(inst.network, x2, s, diagnose=False).z_value
        if z2 > z1 + TAU_FEAS:
            # confirm with the independent oracle before counting it
            ids = inst.network.candidate_ids
            r1 = curtailment_highs(inst.network, [c for c, v in zip(ids, x) if v], s)
            r2 = curtailment_highs(inst.network, [c for c, v in zip(ids, x2) if v], s)
            violations.append((k, z1, z2, r1, r2))
    record(7, not violations, f"monotonicity: {len(violations)}/500 pairs with z(x') > z(x) "
                              f"(oracle agrees on {sum(r2 > r1 + TAU_FEAS for *_, r1, r2 in violations)})")
    assert not violations, violations[:3]


def with_superfluous(inst, plan):
    """Add an expensive parallel candidate to a feasible plan."""
    base = inst.network.existing[0]
    cost = float(max(inst.network.candidate_costs)) + 100.0
    extra = Circuit("cx", base.from_bus, base.to_bus, base.susceptance, base.flow_limit, CANDIDATE, cost=cost)
    net = ensure_big_m(inst.network.with_circuits(tuple(inst.network.circuits) + (extra,)))
    return net, ExpansionPlan.from_ids(net, [*plan.built, "cx"])


def test_criterion_8_redundancy():
    runs, removed, problems = 0, 0, []
    for seed in range(N_RANDOM):
        inst = cached_instance(seed)
        _, _, cold, _, _, _ = random_runs(seed)
        net, seeded = with_superfluous(inst, cold)
        if not plan_feasible(net, seeded.built, inst.scenarios):
            continue
        out = eliminate_redundancy(net, seeded, inst.scenarios)
        runs += 1
        removed += "cx" not in out.built
        if "cx" in out.built:
            problems.append(f"seed {seed}: superfluous candidate kept")
        if not plan_feasible(net, out.built, inst.scenarios):
            problems.append(f"seed {seed}: result overloaded")
        if out.total_cost > seeded.total_cost:
            problems.append(f"seed {seed}: cost increased")
        everything = ExpansionPlan.from_ids(inst.network, inst.network.candidate_ids)
        out2 = eliminate_redundancy(inst.network, everything, inst.scenarios)
        runs += 1
        if out2.total_cost > everything.total_cost or not plan_feasible(inst.network, out2.built, inst.scenarios):
            problems.append(f"seed {seed}: all-built run failed")
    ok = not problems and removed > 0
    record(8, ok, f"{runs} runs, superfluous candidate removed {removed} time(s), {len(problems)} problem(s)")
    assert ok, problems


def test_criterion_9_areas():
    problems, partitions = [], 0
    path = Network(tuple(Bus(str(i)) for i in range(1, 7)),
                   tuple(Circuit(f"l{i}", str(i), str(i + 1), 1.0, 100.0) for i in range(1, 6)), "1")
    costs = MarginalCostSeries.from_mapping({str(i + 1): [v] for i, v in enumerate([1, 1, 1, 9, 9, 9])})
    split = cluster_areas(path, costs, 2)
    if split.as_sets() != frozenset({frozenset("123"), frozenset("456")}):
        problems.append(f"path split {split.areas()}")
    for seed in range(N_RANDOM):
        inst = cached_instance(seed)
        net = inst.network
        rng = np.random.default_rng(seed)
        series = MarginalCostSeries(net.bus_ids, rng.normal(50, 20, (len(net.buses), 8)))
        for n in range(1, min(5, len(net.buses)) + 1):
            p = cluster_areas(net, series, n)
            partitions += 1
            if check_partition(net, p) or not all(area_connected(net, p.buses(a)) for a in p.labels):
                problems.append(f"seed {seed} n={n}: disconnected area")
            for s in inst.scenarios[:3]:
                for label in p.labels:
                    sub = extract_area(net, p, label, [s], fallback=True)
                    bal = area_balance(sub.scenarios[0])
                    if abs(bal) > TAU_BAL * max(1.0, math.fsum(s.load.values())):
                        problems.append(f"seed {seed} n={n} {label}/{s.id}: balance {bal:.3g}")
    ok = not problems
    record(9, ok, f"{partitions} partitions, {len(problems)} problem(s)")
    assert ok, problems[:5]


def test_criterion_10_multi_year(tmp_path):
    net = garver()
    write_network(net, tmp_path / "net.json")
    year1 = garver_scenarios()
    year2 = [s.scaled(1.1) for s in year1]
    write_scenarios(year1, tmp_path / "y1.csv")
    write_scenarios(year2, tmp_path / "y2.csv")
    cfg = study.StudyConfig(years=(2030, 2031), network=tmp_path / "net.json",
                            scenarios={2030: tmp_path / "y1.csv", 2031: tmp_path / "y2.csv"},
                            method="heuristic-then-benders", output=tmp_path / "out")
    report = study.run_study(cfg)
    first = set(report.invested(2030))
    dump = read_network(tmp_path / "out" / "network_2030.json")
    promoted_ok = all(not dump.circuit(c).is_candidate and dump.circuit(c).cost == 0.0 for c in first)
    plans = read_plans(tmp_path / "out" / "plan.csv")
    excluded_ok = not first & set(plans["2031"])
    cost2, _ = enumerate_optimum(dump, year2)
    ok = (not report.incomplete and promoted_ok and excluded_ok and report.year_cost(2031) == cost2
          and report.total == math.fsum(c for y in plans.values() for d, c in y.values() if d))
    record(10, ok, f"year 1 {sorted(first)} cost {report.year_cost(2030)}; year 2 cost {report.year_cost(2031)} "
                   f"vs oracle {cost2}")
    assert ok


def test_criterion_11_default_k():
    rng = np.random.default_rng(11)
    bad, trials = [], 0
    for seed in range(N_RANDOM):
        inst = cached_instance(seed)
        for _ in range(5):
            x = (rng.random(len(inst.network.candidates)) < 0.3).astype(float)
            ranking = rank_scenarios(inst.network, x, inst.scenarios)
            k = int(rng.integers(1, 9))
            ranking_k = rank_scenarios(inst.network, x, inst.scenarios, k)
            trials += 2
            if len(ranking.selection) != min(DEFAULT_K, len(ranking.order)):
                bad.append(f"seed {seed}: default k gave {len(ranking.selection)}")
            if len(ranking_k.selection) != min(k, len(ranking_k.order)):
                bad.append(f"seed {seed}: k={k} gave {len(ranking_k.selection)}")
    ok = DEFAULT_K == 5 and not bad
    record(11, ok, f"{trials} rankings, {len(bad)} mismatch(es)")
    assert ok, bad[:5]
