"""Area decomposition by clustering bus marginal costs.

Buses with similar marginal-cost profiles are not separated by congestion,
so grouping them yields areas that can be planned independently. Clusters
grow by merging adjacent groups only, which keeps every area connected.
Each area is then planned on its own with tie-line flows replaced by fixed
boundary injections.
"""

from __future__ import annotations

import dataclasses
import heapq
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .feasibility import Z_TOL, evaluate
from .network import Bus, Network, id_key
from .scenario import TAU_BAL, ExpansionPlan, Scenario

log = logging.getLogger(__name__)


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class MarginalCostSeries:
    """Marginal cost ($/MWh) of each bus across simulation snapshots.

    ``values[i, t]`` belongs to ``bus_ids[i]`` at snapshot ``t``.
    """

    bus_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.ndim != 2 or values.shape[0] != len(self.bus_ids):
            raise ValueError("marginal costs need one row per bus")
        if values.shape[1] < 1:
            raise ValueError("marginal costs need at least one snapshot")
        if len(set(self.bus_ids)) != len(self.bus_ids):
            raise ValueError("duplicate bus in marginal cost series")
        object.__setattr__(self, "bus_ids", tuple(str(b) for b in self.bus_ids))
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Sequence[float]]) -> "MarginalCostSeries":
        rows = [np.atleast_1d(np.asarray(v, dtype=float)) for v in data.values()]
        lengths = {r.size for r in rows}
        if len(lengths) > 1:
            raise ValueError(f"buses have different snapshot counts {sorted(lengths)}")
        return cls(tuple(str(k) for k in data), np.vstack(rows) if rows else np.zeros((0, 1)))

    @property
    def snapshots(self) -> int:
        return self.values.shape[1]

    def for_buses(self, bus_ids: Sequence[str]) -> np.ndarray:
        index = {b: i for i, b in enumerate(self.bus_ids)}
        missing = [b for b in bus_ids if b not in index]
        if missing:
            raise ValueError(f"no marginal costs for bus(es) {', '.join(missing)}")
        return self.values[[index[b] for b in bus_ids]]

    def means(self) -> "MarginalCostSeries":
        return MarginalCostSeries(self.bus_ids, self.values.mean(axis=1, keepdims=True))


@dataclass(frozen=True)
class AreaPartition:
    """Bus-to-area assignment with the circuits it cuts."""

    assignment: Mapping[str, str]
    tie_lines: tuple[str, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.assignment.values()), key=id_key))

    @property
    def n_areas(self) -> int:
        return len(self.labels)

    def buses(self, label: str) -> tuple[str, ...]:
        return tuple(sorted((b for b, a in self.assignment.items() if a == label), key=id_key))

    def areas(self) -> dict[str, tuple[str, ...]]:
        return {label: self.buses(label) for label in self.labels}

    def as_sets(self) -> frozenset[frozenset[str]]:
        return frozenset(frozenset(v) for v in self.areas().values())


def cut_set(network: Network, assignment: Mapping[str, str]) -> tuple[str, ...]:
    return tuple(c.id for c in network.circuits if assignment[c.from_bus] != assignment[c.to_bus])


def make_partition(network: Network, assignment: Mapping[str, str]) -> AreaPartition:
    assignment = {str(b): str(a) for b, a in assignment.items()}
    missing = [b for b in network.bus_ids if b not in assignment]
    if missing:
        raise PartitionError(f"bus(es) without area: {', '.join(missing)}")
    return AreaPartition(dict(sorted(assignment.items(), key=lambda kv: id_key(kv[0]))),
                         cut_set(network, assignment))


def area_connected(network: Network, buses: Sequence[str], include_candidates: bool = False) -> bool:
    """True if ``buses`` induce a connected subgraph."""
    members = set(buses)
    if not members:
        return False
    adj: dict[str, set[str]] = {b: set() for b in members}
    for c in network.circuits:
        if c.is_candidate and not include_candidates:
            continue
        if c.from_bus in members and c.to_bus in members:
            adj[c.from_bus].add(c.to_bus)
            adj[c.to_bus].add(c.from_bus)
    start = next(iter(members))
    seen = {start}
    stack = [start]
    while stack:
        for v in adj[stack.pop()]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen == members


def check_partition(network: Network, partition: AreaPartition, include_candidates: bool = False) -> list[str]:
    """Problems with ``partition``: disconnected areas or a wrong tie-line list."""
    issues = []
    for label, buses in partition.areas().items():
        if not area_connected(network, buses, include_candidates):
            issues.append(f"area {label} is not connected")
    if set(partition.tie_lines) != set(cut_set(network, partition.assignment)):
        issues.append("tie-line list differs from the cut set")
    return issues


def _quotas(sizes: list[int], n_areas: int) -> list[int]:
    """Split ``n_areas`` over components in proportion to size (largest remainder)."""
    total = sum(sizes)
    raw = [n_areas * s / total for s in sizes]
    quota = [min(s, max(1, math.floor(r))) for s, r in zip(sizes, raw)]
    while sum(quota) < n_areas:
        room = [i for i in range(len(sizes)) if quota[i] < sizes[i]]
        k = max(room, key=lambda i: (raw[i] - quota[i], -i))
        quota[k] += 1
    while sum(quota) > n_areas:
        room = [i for i in range(len(sizes)) if quota[i] > 1]
        k = max(room, key=lambda i: (quota[i] - raw[i], -i))
        quota[k] -= 1
    return quota


def _agglomerate(buses: list[str], edges: set[tuple[str, str]], costs: np.ndarray, target: int) -> list[list[str]]:
    """Merge adjacent clusters with the closest mean cost vectors until ``target`` remain."""
    clusters: dict[int, list[str]] = {i: [b] for i, b in enumerate(buses)}
    sums = {i: costs[i].copy() for i in range(len(buses))}
    pos = {b: i for i, b in enumerate(buses)}
    adj: dict[int, set[int]] = {i: set() for i in clusters}
    for a, b in edges:
        ia, ib = pos[a], pos[b]
        if ia != ib:
            adj[ia].add(ib)
            adj[ib].add(ia)
    version = {i: 0 for i in clusters}

    def key_of(i):
        return id_key(min(clusters[i], key=id_key))

    def entry(i, j):
        if key_of(j) < key_of(i):
            i, j = j, i
        dist = float(np.linalg.norm(sums[i] / len(clusters[i]) - sums[j] / len(clusters[j])))
        return (dist, key_of(i), key_of(j), i, j, version[i], version[j])

    heap = [entry(i, j) for i in adj for j in adj[i] if i < j]
    heapq.heapify(heap)
    while len(clusters) > target and heap:
        dist, _, _, i, j, vi, vj = heapq.heappop(heap)
        if i not in clusters or j not in clusters or version[i] != vi or version[j] != vj:
            continue
        clusters[i].extend(clusters.pop(j))
        sums[i] = sums[i] + sums.pop(j)
        version[i] += 1
        version.pop(j)
        for k in adj.pop(j):
            if k != i:
                adj[k].discard(j)
                adj[k].add(i)
                adj[i].add(k)
        adj[i].discard(j)
        adj[i].discard(i)
        for k in adj[i]:
            heapq.heappush(heap, entry(i, k))
    return [sorted(c, key=id_key) for c in clusters.values()]


def cluster_areas(network: Network, costs: MarginalCostSeries, n_areas: int, *,
                  include_candidates: bool = False, statistic: str = "series") -> AreaPartition:
    """Partition buses into ``n_areas`` connected areas of similar marginal cost.

    Parameters
    ----------
    network : Network
    costs : MarginalCostSeries
        Per-bus snapshot vectors; ``statistic="mean"`` clusters on their means.
    n_areas : int
        Number of areas. A network with several components gets a share of
        the areas per component, proportional to its bus count.
    include_candidates : bool
        Count candidate circuits as adjacency (default: existing only).

    Raises
    ------
    PartitionError
        If ``n_areas`` lies outside the achievable range.
    """
    if statistic == "mean":
        costs = costs.means()
    elif statistic != "series":
        raise ValueError(f"unknown statistic {statistic!r}")
    comps = network.components(include_candidates=include_candidates)
    n_bus = len(network.buses)
    if not len(comps) <= n_areas <= n_bus:
        raise PartitionError(f"n_areas must be between {len(comps)} and {n_bus} for this network, got {n_areas}")
    edges = {(c.from_bus, c.to_bus) for c in network.circuits if include_candidates or not c.is_candidate}
    quotas = _quotas([len(c) for c in comps], n_areas)
    groups: list[list[str]] = []
    for comp, quota in zip(comps, quotas):
        members = set(comp)
        comp_edges = {e for e in edges if e[0] in members}
        groups.extend(_agglomerate(list(comp), comp_edges, costs.for_buses(comp), quota))
    groups.sort(key=lambda g: id_key(g[0]))
    assignment = {b: f"A{k + 1}" for k, g in enumerate(groups) for b in g}
    return make_partition(network, assignment)


# -- extraction --------------------------------------------------------------

@dataclass
class AreaProblem:
    label: str
    network: Network
    scenarios: list[Scenario]
    excluded_candidates: tuple[str, ...]


def dc_tie_flows(network: Network, partition: AreaPartition, scenario: Scenario,
                 plan: ExpansionPlan | None = None) -> dict[str, float]:
    """Tie-line flows from a whole-network DC solve with internal limits relaxed.

    Existing tie-lines keep their limits; unbuilt candidates are out of
    service and built candidates of ``plan`` count as existing. If the tie-line limits alone force curtailment, the solve is
    repeated without them so that every area still balances.
    """
    ties = set(partition.tie_lines)
    built = set(plan.built) if plan is not None else set()
    # in-service network only: unbuilt candidates would still bind angles through their big-M rows
    in_service = network.drop_circuits(c for c in network.candidate_ids if c not in built).promote(built)

    def solve(keep_ties):
        relaxed = [c if (keep_ties and c.id in ties) else dataclasses.replace(c, monitored=False)
                   for c in in_service.circuits]
        return evaluate(in_service.with_circuits(relaxed), np.zeros(0), scenario, diagnose=False)

    res = solve(True)
    if res.z_value > Z_TOL:
        log.warning("scenario %s: tie-line limits force %.6g MW curtailment; using unconstrained tie flows",
                    scenario.id, res.z_value)
        res = solve(False)
    return {cid: res.flows_existing[cid] for cid in partition.tie_lines if not network.circuit(cid).is_candidate}


def extract_area(network: Network, partition: AreaPartition, label: str, scenarios: Sequence[Scenario], *,
                 tie_flows: Mapping[str, Mapping[str, float]] | None = None,
                 fallback: bool = False) -> AreaProblem:
    """Sub-network of one area with tie-line flows turned into boundary injections.

    A tie-line carrying ``f`` MW from its from-bus to its to-bus injects
    ``-f`` at an internal from-bus and ``+f`` at an internal to-bus.
    Flows come from ``scenario.tie_flows``, then ``tie_flows[scenario.id]``,
    then (with ``fallback``) a DC solve of the whole network. Candidates
    crossing the area border are left out of the sub-problem.

    Raises
    ------
    PartitionError
        If the label is unknown or a tie-line flow is missing.
    """
    members = set(partition.buses(label))
    if not members:
        raise PartitionError(f"unknown area {label!r}")
    existing_ties = [network.circuit(c) for c in partition.tie_lines if not network.circuit(c).is_candidate]
    touching = [c for c in existing_ties if c.from_bus in members or c.to_bus in members]
    boundary_buses = {c.from_bus for c in touching if c.from_bus in members}
    boundary_buses |= {c.to_bus for c in touching if c.to_bus in members}
    buses = tuple(Bus(b.id, label, b.is_boundary or b.id in boundary_buses)
                  for b in network.buses if b.id in members)
    inside = [c for c in network.circuits if c.from_bus in members and c.to_bus in members]
    excluded = tuple(c.id for c in network.candidates
                     if (c.from_bus in members) != (c.to_bus in members))
    ref = network.reference_bus if network.reference_bus in members else None
    sub = Network(buses, tuple(inside), ref, network.mva_base, f"{network.name}:{label}" if network.name else label)

    out = []
    for s in scenarios:
        flows = dict(s.tie_flows)
        if tie_flows and s.id in tie_flows:
            for k, v in tie_flows[s.id].items():
                flows.setdefault(k, v)
        missing = [c.id for c in touching if c.id not in flows]
        if missing and fallback:
            computed = dc_tie_flows(network, partition, s)
            for k in missing:
                flows[k] = computed[k]
            missing = []
        if missing:
            raise PartitionError(f"scenario {s.id} has no flow for tie-line(s) {', '.join(missing)}")
        inj = {b: v for b, v in s.boundary.items() if b in members}
        for c in touching:
            f = flows[c.id]
            if c.from_bus in members:
                inj[c.from_bus] = inj.get(c.from_bus, 0.0) - f
            if c.to_bus in members:
                inj[c.to_bus] = inj.get(c.to_bus, 0.0) + f
        out.append(Scenario(
            s.id,
            {b: v for b, v in s.load.items() if b in members},
            {b: v for b, v in s.generation.items() if b in members},
            inj,
            {k: v for k, v in s.tie_flows.items()},
            s.weight,
        ))
    return AreaProblem(label, sub, out, excluded)


def area_balance(scenario: Scenario) -> float:
    """Generation plus boundary injection minus load (MW)."""
    return math.fsum(scenario.generation.values()) + math.fsum(scenario.boundary.values()) - math.fsum(
        scenario.load.values())


def balance_ok(scenario: Scenario, tau_bal: float = TAU_BAL) -> bool:
    return abs(area_balance(scenario)) <= tau_bal * max(math.fsum(scenario.load.values()), 1.0)

