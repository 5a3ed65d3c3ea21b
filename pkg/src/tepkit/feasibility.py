"""Minimum-curtailment feasibility LP for one scenario and one expansion plan.

The LP measures how much load must be shed so that a DC power flow of the
scenario respects every flow limit when the plan's candidates are built.
Variables per scenario, in column order:

* ``f_e`` existing-circuit flows, bounded by their limits;
* ``f_c`` candidate flows, bounded by ``limit * x``;
* ``theta`` bus angles, free except one zero reference per component;
* ``r`` curtailment, ``0 <= r <= d``, the only priced variables;
* ``sigma`` generation spill, ``0 <= sigma <= g``, free of cost.

Rows: bus balance, angle law of existing circuits, and the two halves of
the candidate disjunction ``|f_c - F_c (theta_i - theta_j)| <= M_c (1 - x)``.
"""

from __future__ import annotations

import dataclasses
import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import lp as lpcore
from .lp import EQ, LE, LinearProgram, LpSolution
from .network import Circuit, Network, NetworkError
from .scenario import ExpansionPlan, Scenario

Z_TOL = 1e-6
"""Curtailment (MW) below which a scenario counts as overload-free."""

VIOLATION_TOL = 1e-6
BINDING_TOL = 1e-9
DEFAULT_UNMONITORED_SPAN = math.pi / 2
"""Angle span (rad) assumed across an unmonitored circuit when sizing big-M."""


class FeasibilityError(RuntimeError):
    """The feasibility LP did not solve to optimality, which valid inputs never cause."""


InternalConsistencyError = FeasibilityError


class AssemblyError(ValueError):
    """Inputs to the LP assembly have inconsistent dimensions."""


# -- big-M -----------------------------------------------------------------

def _span_weight(network: Network, circuit: Circuit, transfer_bound: float | None) -> float:
    coef = network.flow_coefficient(circuit)
    if circuit.monitored and math.isfinite(circuit.flow_limit):
        return circuit.flow_limit / coef
    if transfer_bound is not None:
        return float(transfer_bound) / coef
    return DEFAULT_UNMONITORED_SPAN


def _shortest_span(network: Network, source: str, target: str, weights: dict[str, float]) -> float:
    adj: dict[str, list[tuple[str, float]]] = {}
    for c in network.existing:
        w = weights[c.id]
        adj.setdefault(c.from_bus, []).append((c.to_bus, w))
        adj.setdefault(c.to_bus, []).append((c.from_bus, w))
    dist = {source: 0.0}
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == target:
            return d
        if d > dist.get(u, math.inf):
            continue
        for v, w in adj.get(u, ()):
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return math.inf


def compute_big_m(network: Network, candidate: Circuit | str, transfer_bound: float | None = None) -> float:
    """Disjunctive constant ``M_c`` (MW) for one candidate.

    ``M_c = F_c * span`` where ``F_c`` is the candidate's MW-per-radian
    coefficient and ``span`` bounds the angle difference between its
    endpoints in any operating point: the shortest path between them over
    existing circuits, each weighted by the angle it spans at its limit.
    Without such a path the span falls back to the sum of those weights over
    every existing and candidate circuit, a bound on any simple path.

    Parameters
    ----------
    network : Network
    candidate : Circuit or str
        The candidate circuit or its id.
    transfer_bound : float, optional
        MW bound used for unmonitored existing circuits when weighting paths.
        Without it such circuits span ``pi/2`` radians.
    """
    if isinstance(candidate, str):
        candidate = network.circuit(candidate)
    weights = {c.id: _span_weight(network, c, transfer_bound) for c in network.existing}
    span = _shortest_span(network, candidate.from_bus, candidate.to_bus, weights)
    if not math.isfinite(span):
        span = math.fsum(weights.values())
        span += math.fsum(_span_weight(network, c, transfer_bound) for c in network.candidates)
    coef = network.flow_coefficient(candidate)
    return max(coef * span, 1e-6 * max(coef, 1.0))


def assign_big_m(network: Network, transfer_bound: float | None = None, overwrite: bool = False) -> Network:
    """Return a network whose candidates all carry a big-M constant."""
    changed = []
    for c in network.circuits:
        if c.is_candidate and (overwrite or c.big_m is None):
            c = dataclasses.replace(c, big_m=compute_big_m(network, c, transfer_bound))
        changed.append(c)
    return network.with_circuits(changed)


def ensure_big_m(network: Network) -> Network:
    if all(c.big_m is not None for c in network.candidates):
        return network
    return assign_big_m(network)


# -- assembly --------------------------------------------------------------

@dataclass(frozen=True)
class Layout:
    """Column and row positions of the blocks of one scenario's LP."""

    n_bus: int
    n_existing: int
    n_candidate: int

    @property
    def fe(self) -> slice:
        return slice(0, self.n_existing)

    @property
    def fc(self) -> slice:
        return slice(self.n_existing, self.n_existing + self.n_candidate)

    @property
    def theta(self) -> slice:
        s = self.n_existing + self.n_candidate
        return slice(s, s + self.n_bus)

    @property
    def r(self) -> slice:
        s = self.n_existing + self.n_candidate + self.n_bus
        return slice(s, s + self.n_bus)

    @property
    def sigma(self) -> slice:
        s = self.n_existing + self.n_candidate + 2 * self.n_bus
        return slice(s, s + self.n_bus)

    @property
    def n_vars(self) -> int:
        return self.n_existing + self.n_candidate + 3 * self.n_bus

    @property
    def balance(self) -> slice:
        return slice(0, self.n_bus)

    @property
    def angle_law(self) -> slice:
        return slice(self.n_bus, self.n_bus + self.n_existing)

    @property
    def disj_upper(self) -> slice:
        s = self.n_bus + self.n_existing
        return slice(s, s + self.n_candidate)

    @property
    def disj_lower(self) -> slice:
        s = self.n_bus + self.n_existing + self.n_candidate
        return slice(s, s + self.n_candidate)

    @property
    def n_rows(self) -> int:
        return self.n_bus + self.n_existing + 2 * self.n_candidate


@dataclass(frozen=True)
class OperationBlock:
    """Scenario LP with the plan left symbolic.

    Row right-hand sides are ``b + B @ x`` and candidate flow bounds are
    ``-limit * x <= f_c <= limit * x``; ``lower``/``upper`` hold the bounds of
    all other columns (candidate columns carry ``[-limit, limit]``).
    """

    layout: Layout
    c: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    b: np.ndarray
    B: sp.csr_matrix
    lower: np.ndarray
    upper: np.ndarray
    cand_limit: np.ndarray
    big_m: np.ndarray
    var_names: list[str]
    row_names: list[str]


def operation_block(network: Network, scenario: Scenario) -> OperationBlock:
    """Build the plan-independent part of the feasibility LP."""
    network = ensure_big_m(network)
    existing, cands = network.existing, network.candidates
    nb, ne, nc = len(network.buses), len(existing), len(cands)
    lay = Layout(nb, ne, nc)
    index = network.bus_index
    d, g, inj = scenario.vectors(network)

    rows, cols, vals = [], [], []

    def put(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    for k, circ in enumerate(existing + cands):
        col = k  # f_e then f_c are contiguous
        i, j = index[circ.from_bus], index[circ.to_bus]
        put(i, col, 1.0)
        put(j, col, -1.0)
    for b in range(nb):
        put(b, lay.r.start + b, -1.0)
        put(b, lay.sigma.start + b, 1.0)

    th = lay.theta.start
    for k, circ in enumerate(existing):
        row = lay.angle_law.start + k
        coef = network.flow_coefficient(circ)
        put(row, lay.fe.start + k, 1.0)
        put(row, th + index[circ.from_bus], -coef)
        put(row, th + index[circ.to_bus], coef)
    big_m = np.array([c.big_m for c in cands], dtype=float)
    for k, circ in enumerate(cands):
        coef = network.flow_coefficient(circ)
        i, j = th + index[circ.from_bus], th + index[circ.to_bus]
        up, lo = lay.disj_upper.start + k, lay.disj_lower.start + k
        put(up, lay.fc.start + k, 1.0)
        put(up, i, -coef)
        put(up, j, coef)
        put(lo, lay.fc.start + k, -1.0)
        put(lo, i, coef)
        put(lo, j, -coef)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(lay.n_rows, lay.n_vars))

    b = np.zeros(lay.n_rows)
    b[lay.balance] = g + inj - d
    b[lay.disj_upper] = big_m
    b[lay.disj_lower] = big_m
    sense = np.array([EQ] * (nb + ne) + [LE] * (2 * nc), dtype=object)
    if nc:
        Bm = sp.csr_matrix(
            (np.concatenate([-big_m, -big_m]),
             (np.concatenate([np.arange(lay.disj_upper.start, lay.disj_upper.stop),
                              np.arange(lay.disj_lower.start, lay.disj_lower.stop)]),
              np.concatenate([np.arange(nc), np.arange(nc)]))),
            shape=(lay.n_rows, nc))
    else:
        Bm = sp.csr_matrix((lay.n_rows, 0))

    lower = np.full(lay.n_vars, -np.inf)
    upper = np.full(lay.n_vars, np.inf)
    lim_e = np.array([c.limit for c in existing], dtype=float)
    lower[lay.fe], upper[lay.fe] = -lim_e, lim_e
    lim_c = np.array([c.flow_limit for c in cands], dtype=float)
    lower[lay.fc], upper[lay.fc] = -lim_c, lim_c
    refs = {index[bus] for bus in network.reference_buses()}
    for b_ in refs:
        lower[th + b_] = upper[th + b_] = 0.0
    lower[lay.r], upper[lay.r] = 0.0, d
    lower[lay.sigma], upper[lay.sigma] = 0.0, g

    c = np.zeros(lay.n_vars)
    c[lay.r] = 1.0
    var_names = ([f"f_{x.id}" for x in existing] + [f"f_{x.id}" for x in cands]
                 + [f"theta_{x}" for x in network.bus_ids] + [f"r_{x}" for x in network.bus_ids]
                 + [f"spill_{x}" for x in network.bus_ids])
    row_names = ([f"bal_{x}" for x in network.bus_ids] + [f"kvl_{x.id}" for x in existing]
                 + [f"dup_{x.id}" for x in cands] + [f"dlo_{x.id}" for x in cands])
    return OperationBlock(lay, c, A, sense, b, Bm, lower, upper, lim_c, big_m, var_names, row_names)


def _plan_vector(network: Network, plan) -> np.ndarray:
    if isinstance(plan, ExpansionPlan):
        if plan.candidate_ids != network.candidate_ids:
            raise AssemblyError(
                f"plan decisions cover {len(plan.candidate_ids)} candidates "
                f"{list(plan.candidate_ids)[:5]}... but the network has {len(network.candidates)}")
        return plan.vector
    x = np.asarray(plan, dtype=float).ravel()
    if x.size != len(network.candidates):
        raise AssemblyError(f"plan decisions vector has {x.size} entries, expected {len(network.candidates)}")
    if not np.all(np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        raise AssemblyError("plan decisions vector must lie in [0, 1]")
    return x


def fixed_plan_lp(block: OperationBlock, x: np.ndarray) -> LinearProgram:
    b = block.b + block.B @ x
    lower, upper = block.lower.copy(), block.upper.copy()
    fc = block.layout.fc
    lower[fc] = -block.cand_limit * x
    upper[fc] = block.cand_limit * x
    return LinearProgram(block.c, block.A, block.sense, b, lower, upper,
                         var_names=block.var_names, row_names=block.row_names)


def assemble_feasibility_lp(network: Network, plan, scenario: Scenario) -> LinearProgram:
    """Feasibility LP of ``scenario`` with the plan's decisions fixed.

    Raises
    ------
    AssemblyError
        If the plan does not match the network's candidate list.
    """
    x = _plan_vector(network, plan)
    return fixed_plan_lp(operation_block(network, scenario), x)


# -- evaluation ------------------------------------------------------------

@dataclass
class FeasibilityResult:
    """Outcome of one scenario evaluation.

    ``binding`` lists circuits whose flow-limit multiplier is nonzero at the
    curtailment optimum; ``violations`` maps circuits to the MW by which an
    overload-minimizing dispatch without curtailment still exceeds their
    limit. ``unserved`` is load that cannot be reached at all (islanded or
    short of supply) in that second problem.
    """

    scenario_id: str
    plan: np.ndarray
    z_value: float
    curtailment: dict[str, float]
    spill: dict[str, float]
    flows_existing: dict[str, float]
    flows_candidate: dict[str, float]
    angles: dict[str, float]
    binding: frozenset[str]
    violations: dict[str, float]
    duals: dict[str, np.ndarray]
    unserved: float = 0.0
    dual_objective: float = math.nan
    lp: LinearProgram | None = field(default=None, repr=False)
    solution: LpSolution | None = field(default=None, repr=False)

    @property
    def feasible(self) -> bool:
        return self.z_value <= Z_TOL

    @property
    def overloaded_circuits(self) -> frozenset[str]:
        return frozenset(self.binding) | frozenset(self.violations)

    @property
    def severity(self) -> float:
        """Total overflow (MW) plus unserved load of the diagnostic dispatch."""
        return math.fsum(self.violations.values()) + self.unserved


def _multiplier_nonzero(value: float) -> bool:
    return abs(value) > BINDING_TOL


def _violation_lp(block: OperationBlock, x: np.ndarray, n_monitored: int) -> tuple[LinearProgram, np.ndarray]:
    """Elastic version of the fixed-plan LP: limits become penalized overflow.

    Disjunction rows of unbuilt candidates are dropped: their big-M only
    bounds angle spans reachable within the flow limits, which no longer hold.
    """
    base = fixed_plan_lp(block, x)
    lay = block.layout
    unbuilt = np.flatnonzero(x <= 0.5)
    drop = np.r_[lay.disj_upper.start + unbuilt, lay.disj_lower.start + unbuilt]
    keep = np.setdiff1d(np.arange(base.m), drop)
    base = LinearProgram(base.c, base.A[keep], base.sense[keep], base.b[keep], base.lower, base.upper)
    lo, up = base.lower.copy(), base.upper.copy()
    flows = np.r_[np.arange(lay.fe.start, lay.fe.stop), np.arange(lay.fc.start, lay.fc.stop)]
    limits = np.r_[up[lay.fe], block.cand_limit]
    built = np.r_[np.ones(lay.n_existing, bool), x > 0.5]
    elastic = np.flatnonzero(built & np.isfinite(limits))
    cols = flows[elastic]
    lo[cols], up[cols] = -np.inf, np.inf
    k = elastic.size
    # f - v_up <= limit and -f - v_lo <= limit, one pair per elastic circuit
    rows = np.r_[np.arange(k), np.arange(k, 2 * k), np.arange(k), np.arange(k, 2 * k)]
    colsx = np.r_[cols, cols, base.n + np.arange(k), base.n + k + np.arange(k)]
    vals = np.r_[np.ones(k), -np.ones(k), -np.ones(k), -np.ones(k)]
    extra = sp.csr_matrix((vals, (rows, colsx)), shape=(2 * k, base.n + 2 * k))
    A = sp.vstack([sp.hstack([base.A, sp.csr_matrix((base.m, 2 * k))]), extra], format="csr")
    c = np.r_[np.zeros(base.n), np.ones(2 * k)]
    c[lay.r] = 2.0 * n_monitored + 1.0
    lp = LinearProgram(c, A, np.r_[base.sense, np.array([LE] * (2 * k), dtype=object)],
                       np.r_[base.b, limits[elastic], limits[elastic]],
                       np.r_[lo, np.zeros(2 * k)], np.r_[up, np.full(2 * k, np.inf)])
    return lp, elastic


def evaluate(network: Network, plan, scenario: Scenario, *, solver: Callable | None = None,
             diagnose: bool = True, block: OperationBlock | None = None) -> FeasibilityResult:
    """Solve the feasibility LP and diagnose overloads.

    Parameters
    ----------
    network : Network
        Validated network; missing big-M constants are computed on the fly.
    plan : ExpansionPlan or array_like
        Build decisions aligned with ``network.candidate_ids``.
    scenario : Scenario
    solver : callable, optional
        ``LinearProgram -> LpSolution``; defaults to the built-in simplex.
    diagnose : bool
        Also solve the elastic overflow LP that fills ``violations``.
    block : OperationBlock, optional
        Pre-built scenario block, reused across plans.

    Raises
    ------
    FeasibilityError
        If either LP fails to reach an optimum.
    """
    network = ensure_big_m(network)
    x = _plan_vector(network, plan)
    if block is None:
        block = operation_block(network, scenario)
    solve = solver or lpcore.solve
    lp = fixed_plan_lp(block, x)
    sol = solve(lp)
    if not sol.optimal:
        raise FeasibilityError(
            f"feasibility LP for scenario {scenario.id} ended {sol.status.value}: {sol.message}")
    lay = block.layout
    xs = sol.x
    z = float(sol.objective)
    if z <= Z_TOL * 1e-3:
        z = 0.0
    bus_ids = network.bus_ids
    rc = sol.reduced_costs
    y = sol.duals
    binding: set[str] = set()
    if z > Z_TOL:
        for k, circ in enumerate(network.existing):
            if math.isfinite(circ.limit) and _multiplier_nonzero(rc[lay.fe.start + k]):
                binding.add(circ.id)
        for k, circ in enumerate(network.candidates):
            if x[k] > 0.5 and _multiplier_nonzero(rc[lay.fc.start + k]):
                binding.add(circ.id)

    violations: dict[str, float] = {}
    unserved = 0.0
    if diagnose and z > Z_TOL:
        n_mon = sum(math.isfinite(c.limit) for c in network.existing) + int((x > 0.5).sum())
        vlp, elastic = _violation_lp(block, x, n_mon)
        vsol = solve(vlp)
        if not vsol.optimal:
            raise FeasibilityError(
                f"overload diagnosis LP for scenario {scenario.id} ended {vsol.status.value}")
        circuits = network.existing + network.candidates
        k = elastic.size
        over = vsol.x[lp.n:lp.n + k] + vsol.x[lp.n + k:lp.n + 2 * k]
        for pos, amount in zip(elastic, over):
            if amount > VIOLATION_TOL:
                violations[circuits[pos].id] = float(amount)
        unserved = float(vsol.x[lay.r].sum())
        if unserved <= VIOLATION_TOL:
            unserved = 0.0

    duals = {
        "balance": y[lay.balance].copy(),
        "angle_law": y[lay.angle_law].copy(),
        "disjunction_upper": y[lay.disj_upper].copy(),
        "disjunction_lower": y[lay.disj_lower].copy(),
        "flow_existing": rc[lay.fe].copy(),
        "flow_candidate": rc[lay.fc].copy(),
        "curtailment": rc[lay.r].copy(),
        "spill": rc[lay.sigma].copy(),
    }
    fe_ids = [c.id for c in network.existing]
    return FeasibilityResult(
        scenario_id=scenario.id,
        plan=x.copy(),
        z_value=z,
        curtailment=dict(zip(bus_ids, xs[lay.r].tolist())),
        spill=dict(zip(bus_ids, xs[lay.sigma].tolist())),
        flows_existing=dict(zip(fe_ids, xs[lay.fe].tolist())),
        flows_candidate=dict(zip(network.candidate_ids, xs[lay.fc].tolist())),
        angles=dict(zip(bus_ids, xs[lay.theta].tolist())),
        binding=frozenset(binding),
        violations=violations,
        duals=duals,
        unserved=unserved,
        dual_objective=lpcore.dual_objective(lp, y, rc),
        lp=lp,
        solution=sol,
    )


def evaluate_many(network: Network, plan, scenarios: Sequence[Scenario], *, workers: int = 1,
                  solver: Callable | None = None, diagnose: bool = True,
                  blocks: Mapping[str, OperationBlock] | None = None) -> list[FeasibilityResult]:
    """Evaluate ``plan`` on every scenario, optionally on a thread pool.

    Each call is independent; the compiled kernel releases the GIL while
    pivoting, so threads overlap the heavy part of the work.
    """
    network = ensure_big_m(network)

    def one(s):
        blk = blocks.get(s.id) if blocks else None
        return evaluate(network, plan, s, solver=solver, diagnose=diagnose, block=blk)

    if workers <= 1 or len(scenarios) <= 1:
        return [one(s) for s in scenarios]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, scenarios))


def curtailment(network: Network, plan, scenario: Scenario, **kwargs) -> float:
    """Shortcut for ``evaluate(...).z_value`` without the overload diagnosis."""
    return evaluate(network, plan, scenario, diagnose=False, **kwargs).z_value


def overload_free(network: Network, plan, scenarios: Iterable[Scenario], **kwargs) -> bool:
    return all(curtailment(network, plan, s, **kwargs) <= Z_TOL for s in scenarios)
