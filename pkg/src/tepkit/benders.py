"""Benders decomposition with feasibility cuts.

The master problem chooses investments ``x`` at least cost subject to the
cuts collected so far; each scenario's curtailment LP then either certifies
the plan or yields a cut that removes it. Because curtailment is a convex
function of the (relaxed) plan, the LP duals give a subgradient ``lam`` with
``z(x) >= z(xh) + lam'(x - xh)`` for every ``x`` in the unit box, so the cut
``z(xh) + lam'(x - xh) <= 0`` never removes an overload-free plan.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import lp as lpcore
from .feasibility import (Z_TOL, FeasibilityResult, OperationBlock, ensure_big_m, evaluate_many,
                          operation_block)
from .lp import LE, LinearProgram
from .network import Network
from .scenario import ExpansionPlan, Scenario

log = logging.getLogger(__name__)

C_MAX = 30
HEURISTIC_EXPORT = "heuristic-export"
BENDERS = "benders"

CONVERGED = "converged"
ITERATING = "iterating"
TIME_LIMIT = "time-limit"

CUT_SLACK = 1e-7
"""Absolute allowance added to every cut's right-hand side in the master."""


class NoFeasiblePlanError(RuntimeError):
    """No combination of candidates removes the overloads of some scenarios."""

    def __init__(self, message: str, scenarios: Sequence[str] = ()):
        super().__init__(message)
        self.scenarios = tuple(scenarios)


@dataclass(frozen=True)
class FeasibilityCut:
    """``sum_j coefficients[j] * x_j + constant <= 0``.

    ``plan`` is the decision vector that produced the cut, kept so the cut
    can be re-checked against it.
    """

    candidate_ids: tuple[str, ...]
    coefficients: tuple[float, ...]
    constant: float
    scenario_id: str
    iteration: int | None = None
    source: str = BENDERS
    plan: tuple[int, ...] | None = None

    @property
    def origin(self) -> str:
        if self.source == HEURISTIC_EXPORT:
            return f"{HEURISTIC_EXPORT}:{self.scenario_id}"
        return f"{self.scenario_id}@{self.iteration}"

    @property
    def lam(self) -> np.ndarray:
        return np.array(self.coefficients, dtype=float)

    def value(self, x) -> float:
        x = x.vector if isinstance(x, ExpansionPlan) else np.asarray(x, dtype=float)
        return float(self.lam @ x + self.constant)

    def tolerance(self) -> float:
        return CUT_SLACK + 1e-9 * float(np.abs(self.lam).sum())

    def violated_by(self, x) -> bool:
        return self.value(x) > self.tolerance()

    def is_valid_for_generator(self) -> bool:
        """The generating plan (if recorded) must violate the cut."""
        if not all(math.isfinite(v) for v in self.coefficients) or not math.isfinite(self.constant):
            return False
        if self.plan is None:
            return True
        return self.value(np.array(self.plan, dtype=float)) > Z_TOL * 0.5

    def remap(self, candidate_ids: Sequence[str], fixed_built: Iterable[str] = ()) -> "FeasibilityCut | None":
        """Express the cut over another candidate list.

        Candidates listed in ``fixed_built`` are substituted as built; the cut
        is dropped (``None``) if it mentions a candidate that is neither.
        """
        target = {c: i for i, c in enumerate(candidate_ids)}
        built = set(fixed_built)
        coef = np.zeros(len(candidate_ids))
        const = self.constant
        for cid, a in zip(self.candidate_ids, self.coefficients):
            if cid in target:
                coef[target[cid]] += a
            elif cid in built:
                const += a
            elif a != 0.0:
                return None
        return FeasibilityCut(tuple(candidate_ids), tuple(coef.tolist()), const, self.scenario_id,
                              self.iteration, self.source, None)


def derive_cut(result: FeasibilityResult, network: Network, plan, scenario: Scenario | str | None = None,
               *, iteration: int | None = None, source: str = BENDERS) -> FeasibilityCut:
    """Feasibility cut from an evaluation with positive curtailment.

    Raises
    ------
    ValueError
        If ``result.z_value`` is not positive.
    """
    if not result.z_value > 0:
        raise ValueError(f"cut requested for scenario {result.scenario_id} whose curtailment is {result.z_value}")
    network = ensure_big_m(network)
    x = plan.vector if isinstance(plan, ExpansionPlan) else np.asarray(plan, dtype=float)
    cands = network.candidates
    big_m = np.array([c.big_m for c in cands], dtype=float)
    limit = np.array([c.flow_limit for c in cands], dtype=float)
    y = result.duals
    d = y["flow_candidate"]
    # rhs M(1 - x) of both disjunction rows, bounds -limit*x <= f_c <= limit*x
    lam = -big_m * (y["disjunction_upper"] + y["disjunction_lower"])
    lam += limit * np.minimum(d, 0.0) - limit * np.maximum(d, 0.0)
    lam[np.abs(lam) < 1e-12] = 0.0
    constant = result.z_value - float(lam @ x)
    sid = scenario.id if isinstance(scenario, Scenario) else (scenario or result.scenario_id)
    return FeasibilityCut(network.candidate_ids, tuple(lam.tolist()), constant, str(sid), iteration,
                          source, tuple(int(round(v)) for v in x))


@dataclass
class IterationLog:
    iteration: int
    lower_bound: float
    plan_cost: float
    violated: int
    cuts_added: int
    seconds: float


@dataclass
class BendersState:
    """Progress of one Benders run."""

    iteration: int = 0
    cuts: list[FeasibilityCut] = field(default_factory=list)
    incumbent: ExpansionPlan | None = None
    lower_bound: float = 0.0
    status: str = ITERATING
    history: list[IterationLog] = field(default_factory=list)
    rejected_warm_cuts: int = 0

    @property
    def upper_bound(self) -> float:
        return self.incumbent.total_cost if self.incumbent is not None else math.inf


def master_problem(network: Network, cuts: Sequence[FeasibilityCut], fixed_built: Iterable[str] = ()) -> LinearProgram:
    """Least-cost binary plan satisfying every cut."""
    n = len(network.candidates)
    cost = network.candidate_costs
    lower = np.zeros(n)
    fixed = set(fixed_built)
    for j, cid in enumerate(network.candidate_ids):
        if cid in fixed:
            lower[j] = 1.0
    if cuts:
        A = np.array([c.coefficients for c in cuts], dtype=float)
        b = np.array([-c.constant + c.tolerance() for c in cuts])
    else:
        A, b = np.zeros((0, n)), np.zeros(0)
    return LinearProgram(cost, A, np.array([LE] * len(b), dtype=object), b, lower, np.ones(n),
                         integer=np.ones(n, dtype=bool), var_names=[f"x_{c}" for c in network.candidate_ids])


def _irreparable(network, scenarios, blocks, workers):
    everything = np.ones(len(network.candidates))
    results = evaluate_many(network, everything, scenarios, workers=workers, diagnose=False, blocks=blocks)
    return [r.scenario_id for r in results if r.z_value > Z_TOL]


def solve(network: Network, scenarios: Sequence[Scenario], warm_cuts: Iterable[FeasibilityCut] = (), *,
          max_iterations: int = 500, time_limit: float | None = None,
          incumbent0: ExpansionPlan | None = None, c_max: int = C_MAX, workers: int = 1,
          mip_options: dict | None = None) -> tuple[ExpansionPlan | None, BendersState]:
    """Least-cost plan removing all overloads in every scenario.

    Parameters
    ----------
    network : Network
    scenarios : sequence of Scenario
    warm_cuts : iterable of FeasibilityCut
        Cuts known in advance (for instance exported by the heuristic).
        Cuts that fail the generator check or cannot be mapped onto the
        candidate list are discarded.
    max_iterations, time_limit : optional budgets
        When exhausted the best known feasible plan is returned with status
        ``"time-limit"`` (``incumbent0`` if nothing better was found, ``None``
        if no feasible plan is known).
    incumbent0 : ExpansionPlan, optional
        Known feasible plan; the run stops as soon as the master bound
        reaches its cost.
    c_max : int
        Maximum cuts added per iteration, most violated scenarios first.
    workers : int
        Threads for the per-iteration scenario sweep.

    Raises
    ------
    NoFeasiblePlanError
        If the master problem becomes infeasible.
    """
    start = time.monotonic()
    network = ensure_big_m(network)
    state = BendersState()
    ids = network.candidate_ids
    if not scenarios:
        state.incumbent = ExpansionPlan.empty(network)
        state.status = CONVERGED
        return state.incumbent, state

    for cut in warm_cuts:
        mapped = cut if cut.candidate_ids == ids else cut.remap(ids)
        if mapped is None or not cut.is_valid_for_generator():
            state.rejected_warm_cuts += 1
            continue
        state.cuts.append(mapped)

    blocks: dict[str, OperationBlock] = {s.id: operation_block(network, s) for s in scenarios}
    order = {s.id: i for i, s in enumerate(scenarios)}
    mip_options = dict(mip_options or {})

    def sweep(plan_vec, iteration):
        results = evaluate_many(network, plan_vec, scenarios, workers=workers, diagnose=False, blocks=blocks)
        bad = [r for r in results if r.z_value > Z_TOL]
        bad.sort(key=lambda r: (-r.z_value, order[r.scenario_id]))
        return bad

    if incumbent0 is not None:
        bad = sweep(incumbent0.vector, 0)
        if not bad:
            state.incumbent = incumbent0
        else:
            for r in bad[:c_max]:
                state.cuts.append(derive_cut(r, network, incumbent0.vector, r.scenario_id, iteration=0))

    while True:
        if state.iteration >= max_iterations or (time_limit is not None and time.monotonic() - start > time_limit):
            state.status = TIME_LIMIT
            break
        t0 = time.monotonic()
        state.iteration += 1
        master = master_problem(network, state.cuts)
        sol = lpcore.solve(master, **mip_options)
        if sol.status == lpcore.Status.INFEASIBLE:
            names = _irreparable(network, scenarios, blocks, workers) or sorted(
                {c.scenario_id for c in state.cuts}, key=lambda s: order.get(s, 0))
            raise NoFeasiblePlanError(
                "no candidate combination removes the overloads of scenario(s) " + ", ".join(names), names)
        if not sol.optimal:
            state.status = TIME_LIMIT
            break
        x = np.round(sol.x)
        state.lower_bound = max(state.lower_bound, float(network.candidate_costs @ x))
        plan = ExpansionPlan.from_vector(network, x)
        if state.incumbent is not None and state.incumbent.total_cost <= state.lower_bound + lpcore.TAU_GAP:
            state.status = CONVERGED
            state.history.append(IterationLog(state.iteration, state.lower_bound, plan.total_cost, 0, 0,
                                              time.monotonic() - t0))
            break
        bad = sweep(x, state.iteration)
        added = 0
        for r in bad[:c_max]:
            cut = derive_cut(r, network, x, r.scenario_id, iteration=state.iteration)
            state.cuts.append(cut)
            added += 1
        state.history.append(IterationLog(state.iteration, state.lower_bound, plan.total_cost, len(bad), added,
                                          time.monotonic() - t0))
        log.info("benders iteration %d: bound %.6g, %d scenario(s) overloaded", state.iteration,
                 state.lower_bound, len(bad))
        if not bad:
            state.incumbent = plan
            state.status = CONVERGED
            break
    return state.incumbent, state
