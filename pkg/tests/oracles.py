"""Independent reference computations used by the tests.

Nothing here imports the package's solver: LPs go to scipy's HiGHS and
plans are checked by brute force.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog


def curtailment_highs(network, built, scenario):
    """Minimum curtailment with only existing and ``built`` circuits in service.

    Straight DC model on the reduced network: no disjunction, no big-M.
    """
    built = set(built)
    circuits = [c for c in network.circuits if not c.is_candidate or c.id in built]
    buses = list(network.bus_ids)
    index = {b: i for i, b in enumerate(buses)}
    nb, nl = len(buses), len(circuits)
    # variables: flows (nl), theta (nb), r (nb), spill (nb)
    n = nl + 3 * nb
    c = np.zeros(n)
    c[nl + nb:nl + 2 * nb] = 1.0
    A_eq, b_eq = [], []
    d = np.array([scenario.load.get(b, 0.0) for b in buses])
    g = np.array([scenario.generation.get(b, 0.0) for b in buses])
    inj = np.array([scenario.boundary.get(b, 0.0) for b in buses])
    for bi, b in enumerate(buses):
        row = np.zeros(n)
        for k, circ in enumerate(circuits):
            if circ.from_bus == b:
                row[k] += 1
            if circ.to_bus == b:
                row[k] -= 1
        row[nl + nb + bi] = -1
        row[nl + 2 * nb + bi] = 1
        A_eq.append(row)
        b_eq.append(g[bi] + inj[bi] - d[bi])
    for k, circ in enumerate(circuits):
        row = np.zeros(n)
        w = network.mva_base * circ.susceptance
        row[k] = 1
        row[nl + index[circ.from_bus]] -= w
        row[nl + index[circ.to_bus]] += w
        A_eq.append(row)
        b_eq.append(0.0)
    bounds = []
    for circ in circuits:
        lim = circ.flow_limit if circ.monitored else None
        bounds.append((-lim if lim is not None else None, lim))
    # one reference per component of the in-service graph
    parent = list(range(nb))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i
    for circ in circuits:
        a, b = find(index[circ.from_bus]), find(index[circ.to_bus])
        if a != b:
            parent[max(a, b)] = min(a, b)
    for bi in range(nb):
        bounds.append((0, 0) if find(bi) == bi else (None, None))
    bounds += [(0, v) for v in d] + [(0, v) for v in g]
    res = linprog(c, A_eq=np.array(A_eq), b_eq=np.array(b_eq), bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def plan_feasible(network, built, scenarios, tol=1e-6):
    return all(curtailment_highs(network, built, s) <= tol for s in scenarios)


def enumerate_optimum(network, scenarios, max_additions=None, tol=1e-6):
    """Cheapest overload-free plan by brute force.

    Plans are scanned by (cost, decision vector) so the first feasible one is
    the optimum with the lexicographically smallest vector among ties.
    Returns ``(cost, built ids)`` or ``None``.
    """
    cands = network.candidates
    n = len(cands)
    limit = n if max_additions is None else max_additions
    plans = []
    for vec in itertools.product((0, 1), repeat=n):
        if sum(vec) <= limit:
            cost = sum(c.cost for c, v in zip(cands, vec) if v)
            plans.append((cost, vec))
    plans.sort()
    for cost, vec in plans:
        built = [c.id for c, v in zip(cands, vec) if v]
        if plan_feasible(network, built, scenarios, tol):
            return cost, tuple(built)
    return None


def all_plans(n):
    return [np.array(v, dtype=float) for v in itertools.product((0, 1), repeat=n)]
