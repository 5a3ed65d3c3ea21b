"""Built-in test systems and a seeded random instance generator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import CANDIDATE, EXISTING, Bus, Circuit, Network
from .scenario import Scenario

# corridor: (reactance p.u., limit MW, cost, existing circuits)
GARVER_CORRIDORS = {
    (1, 2): (0.40, 100, 40, 1),
    (1, 3): (0.38, 100, 38, 0),
    (1, 4): (0.60, 80, 60, 1),
    (1, 5): (0.20, 100, 20, 1),
    (1, 6): (0.68, 70, 68, 0),
    (2, 3): (0.20, 100, 20, 1),
    (2, 4): (0.40, 100, 40, 1),
    (2, 5): (0.31, 100, 31, 0),
    (2, 6): (0.30, 100, 30, 0),
    (3, 4): (0.59, 82, 59, 0),
    (3, 5): (0.20, 100, 20, 1),
    (3, 6): (0.48, 100, 48, 0),
    (4, 5): (0.63, 75, 63, 0),
    (4, 6): (0.30, 100, 30, 0),
    (5, 6): (0.61, 78, 61, 0),
}
GARVER_LOAD = {1: 80.0, 2: 240.0, 3: 40.0, 4: 160.0, 5: 240.0, 6: 0.0}
GARVER_GENERATION = {1: 50.0, 3: 165.0, 6: 545.0}


def garver(candidates_per_corridor: int = 1) -> Network:
    """Garver 6-bus system with ``candidates_per_corridor`` candidates on each of the 15 corridors.

    Existing circuit ids are ``e{i}-{j}``; candidate ids ``c{i}-{j}`` (or
    ``c{i}-{j}.{k}`` when several candidates share a corridor).
    """
    buses = [Bus(str(b)) for b in range(1, 7)]
    circuits = []
    for (i, j), (x, limit, cost, n0) in GARVER_CORRIDORS.items():
        for k in range(n0):
            suffix = "" if n0 == 1 else f".{k + 1}"
            circuits.append(Circuit(f"e{i}-{j}{suffix}", str(i), str(j), 1.0 / x, limit, EXISTING))
        for k in range(candidates_per_corridor):
            suffix = "" if candidates_per_corridor == 1 else f".{k + 1}"
            circuits.append(Circuit(f"c{i}-{j}{suffix}", str(i), str(j), 1.0 / x, limit,
                                    CANDIDATE, cost=float(cost)))
    return Network(tuple(buses), tuple(circuits), reference_bus="1", mva_base=100.0, name="garver6")


def _garver_scenario(name: str, load_factor: float, generation: dict[int, float]) -> Scenario:
    load = {str(b): v * load_factor for b, v in GARVER_LOAD.items() if v}
    total = sum(load.values())
    gsum = sum(generation.values())
    gen = {str(b): v * total / gsum for b, v in generation.items()}
    return Scenario(name, load, gen)


def garver_scenarios() -> list[Scenario]:
    """Synthetic peak, off-peak and export-shifted operating points.

    Loads follow the original Garver profile scaled per scenario; generation
    is rescaled to balance the load exactly.
    """
    return [
        _garver_scenario("peak", 0.8, {1: 150, 3: 300, 6: 310}),
        _garver_scenario("offpeak", 0.5, {1: 150, 3: 300, 6: 310}),
        _garver_scenario("export", 0.5, {1: 50, 3: 150, 6: 560}),
    ]


def two_bus(limit: float = 100.0, load: float = 100.0) -> tuple[Network, Scenario]:
    net = Network((Bus("A"), Bus("B")), (Circuit("L1", "A", "B", 0.1, limit),), reference_bus="A")
    return net, Scenario("s1", {"B": load}, {"A": load})


# -- random instances --------------------------------------------------------

@dataclass
class Instance:
    network: Network
    scenarios: list[Scenario]
    seed: int


def _dc_loading(network: Network, built: set[str], injection: np.ndarray) -> np.ndarray:
    """|flow| / limit of every circuit in service under an unconstrained DC flow."""
    circuits = [c for c in network.circuits if not c.is_candidate or c.id in built]
    index = network.bus_index
    n = len(index)
    L = np.zeros((n, n))
    for c in circuits:
        i, j = index[c.from_bus], index[c.to_bus]
        w = network.flow_coefficient(c)
        L[i, i] += w
        L[j, j] += w
        L[i, j] -= w
        L[j, i] -= w
    theta = np.zeros(n)
    theta[1:] = np.linalg.solve(L[1:, 1:], injection[1:])
    out = []
    for c in circuits:
        f = network.flow_coefficient(c) * (theta[index[c.from_bus]] - theta[index[c.to_bus]])
        out.append(abs(f) / c.flow_limit)
    return np.array(out)


def random_instance(seed: int, n_bus: tuple[int, int] = (6, 12), n_cand: tuple[int, int] = (5, 9),
                    n_scen: tuple[int, int] = (4, 10), max_tries: int = 200) -> Instance:
    """Random connected network whose scenarios overload it but are fixable.

    The existing grid is a random spanning tree plus a few chords. Candidates
    duplicate existing corridors or open new ones. Every scenario is scaled so
    that building all candidates removes its overloads, and at least one
    scenario is overloaded with nothing built.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        inst = _try_instance(rng, seed, n_bus, n_cand, n_scen)
        if inst is not None:
            return inst
    raise RuntimeError(f"could not build a random instance from seed {seed}")


def _try_instance(rng, seed, n_bus, n_cand, n_scen):
    nb = int(rng.integers(n_bus[0], n_bus[1] + 1))
    ids = [str(i + 1) for i in range(nb)]
    edges = []
    for k in range(1, nb):
        edges.append((int(rng.integers(0, k)), k))
    for _ in range(int(rng.integers(1, max(2, nb // 2) + 1))):
        a, b = rng.choice(nb, 2, replace=False)
        if (min(a, b), max(a, b)) not in edges:
            edges.append((int(min(a, b)), int(max(a, b))))
    params = {e: (float(rng.choice([2.0, 2.5, 3.0, 4.0, 5.0])), float(rng.choice([60, 80, 100, 120])))
              for e in edges}
    circuits = [Circuit(f"e{k + 1}", ids[a], ids[b], params[(a, b)][0], params[(a, b)][1])
                for k, (a, b) in enumerate(edges)]

    nc = int(rng.integers(n_cand[0], n_cand[1] + 1))
    n_new = int(rng.integers(1, 3))
    cands = []
    for k in range(nc):
        if k < nc - n_new:
            a, b = edges[int(rng.integers(0, len(edges)))]
            sus, lim = params[(a, b)]
        else:
            a, b = (int(v) for v in sorted(rng.choice(nb, 2, replace=False)))
            sus, lim = float(rng.choice([2.0, 3.0, 4.0])), float(rng.choice([80, 100]))
        cost = float(rng.integers(5, 60))
        cands.append(Circuit(f"c{k + 1}", ids[a], ids[b], sus, lim, CANDIDATE, cost=cost))
    net = Network(tuple(Bus(i) for i in ids), tuple(circuits + cands), reference_bus="1", name=f"random{seed}")

    all_built = {c.id for c in cands}
    scenarios = []
    overloaded_any = False
    ns = int(rng.integers(n_scen[0], n_scen[1] + 1))
    for s in range(ns):
        load = rng.uniform(0, 60, nb) * (rng.random(nb) < 0.7)
        n_gen = max(1, nb // 3)
        gen_buses = rng.choice(nb, n_gen, replace=False)
        share = rng.dirichlet(np.ones(n_gen))
        if load.sum() <= 0:
            continue
        gen = np.zeros(nb)
        gen[gen_buses] = share * load.sum()
        p = gen - load
        ratio_full = _dc_loading(net, all_built, p).max()
        scale = float(rng.uniform(0.75, 0.98)) / ratio_full
        load, gen = np.round(load * scale, 3), np.zeros(nb)
        gen[gen_buses] = np.round(share * load.sum(), 3)
        gen[gen_buses[-1]] += round(load.sum() - gen.sum(), 6)
        if gen[gen_buses[-1]] < 0:
            continue
        p = gen - load
        if _dc_loading(net, all_built, p).max() >= 0.995:
            continue
        if _dc_loading(net, set(), p).max() > 1.0:
            overloaded_any = True
        scenarios.append(Scenario(
            f"s{s + 1}",
            {ids[i]: float(v) for i, v in enumerate(load) if v > 0},
            {ids[i]: float(v) for i, v in enumerate(gen) if v > 0},
        ))
    if not overloaded_any or len(scenarios) < n_scen[0]:
        return None
    return Instance(net, scenarios, seed)
