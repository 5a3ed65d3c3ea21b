"""Greedy scenario-ranking heuristic for robust expansion planning.

Each iteration evaluates every scenario at the current plan, ranks the
overloaded ones by severity while favouring scenarios whose overloads sit on
different circuits, and solves a small robust MILP over the ``k`` selected
scenarios. Chosen reinforcements are kept for the rest of the year. When no
overload remains, reinforcements are removed again in decreasing cost order
if the plan stays feasible without them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import lp as lpcore
from .benders import HEURISTIC_EXPORT, FeasibilityCut, NoFeasiblePlanError, derive_cut
from .feasibility import (Z_TOL, FeasibilityResult, OperationBlock, ensure_big_m, evaluate,
                          evaluate_many, operation_block)
from .lp import LE, LinearProgram
from .network import Network, id_key
from .scenario import ExpansionPlan, Scenario

log = logging.getLogger(__name__)

DEFAULT_K = 5
THETA_DIV = 0.5
I_MAX = 50


class HeuristicError(RuntimeError):
    """The heuristic stopped with overloads left; ``trace`` holds its history."""

    def __init__(self, message: str, trace: "HeuristicTrace"):
        super().__init__(message)
        self.trace = trace


# -- ranking -----------------------------------------------------------------

@dataclass(frozen=True)
class RankEntry:
    scenario_id: str
    score: float
    circuits: frozenset[str]


@dataclass(frozen=True)
class ScenarioRanking:
    """Overloaded scenarios by decreasing severity, plus the diverse selection."""

    order: tuple[RankEntry, ...]
    selection: tuple[str, ...]

    def __len__(self):
        return len(self.order)


def jaccard(a: frozenset, b: frozenset) -> float:
    """Set overlap in [0, 1]; two empty sets count as identical."""
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def select_diverse(order: Sequence[RankEntry], k: int, theta_div: float = THETA_DIV) -> tuple[str, ...]:
    """Greedy pick: highest score first, then the best entry dissimilar to all picks.

    When no entry is within ``theta_div`` of every pick the threshold is
    doubled until one qualifies; it restarts from ``theta_div`` for each pick.
    """
    chosen: list[RankEntry] = []
    remaining = list(order)
    while remaining and len(chosen) < k:
        threshold = theta_div
        pick = None
        while pick is None:
            for entry in remaining:
                if all(jaccard(entry.circuits, c.circuits) <= threshold for c in chosen):
                    pick = entry
                    break
            threshold *= 2.0
        chosen.append(pick)
        remaining.remove(pick)
    return tuple(e.scenario_id for e in chosen)


def rank_scenarios(network: Network, plan, scenarios: Sequence[Scenario], k: int | None = None, *,
                   results: Mapping[str, FeasibilityResult] | None = None, theta_div: float = THETA_DIV,
                   workers: int = 1) -> ScenarioRanking:
    """Rank overloaded scenarios and select ``min(k, #overloaded)`` of them.

    Parameters
    ----------
    network, plan, scenarios
        The plan is evaluated on each scenario unless ``results`` already
        holds the evaluations (keyed by scenario id).
    k : int, optional
        Selection size; 5 when not given.
    theta_div : float
        Jaccard similarity threshold between overloaded-circuit sets.
    """
    k = DEFAULT_K if k is None else int(k)
    if k < 1:
        raise ValueError("k must be at least 1")
    if results is None:
        evaluated = evaluate_many(network, plan, scenarios, workers=workers)
        results = {r.scenario_id: r for r in evaluated}
    entries = []
    for pos, s in enumerate(scenarios):
        r = results[s.id]
        if r.z_value > Z_TOL:
            entries.append((pos, RankEntry(s.id, r.severity, r.overloaded_circuits)))
    entries.sort(key=lambda t: (-t[1].score, t[0]))
    order = tuple(e for _, e in entries)
    return ScenarioRanking(order, select_diverse(order, k, theta_div))


# -- robust MILP over k scenarios --------------------------------------------

@dataclass
class KMilpResult:
    plan: ExpansionPlan
    objective: float
    cuts: list[FeasibilityCut]
    nodes: int = 0
    iterations: int = 0


def robust_milp(network: Network, scenarios: Sequence[Scenario], fixed_built: Iterable[str] = (),
                cuts: Sequence[FeasibilityCut] = (), blocks: Mapping[str, OperationBlock] | None = None
                ) -> LinearProgram:
    """Monolithic MILP: binaries ``x`` plus one curtailment-free copy of the operation LP per scenario.

    Columns are ``x`` followed by the scenario blocks in order. Curtailment
    columns are fixed at zero; spill stays available.
    """
    network = ensure_big_m(network)
    nc = len(network.candidates)
    fixed = set(fixed_built)
    col_blocks = [sp.csr_matrix((0, nc))]
    rows_x, rows_y, senses, rhs = [], [], [], []
    c_parts = [network.candidate_costs]
    lo_parts = [np.array([1.0 if cid in fixed else 0.0 for cid in network.candidate_ids])]
    up_parts = [np.ones(nc)]
    blocks_used = []
    for s in scenarios:
        blk = blocks.get(s.id) if blocks else None
        blk = blk or operation_block(network, s)
        blocks_used.append(blk)
    widths = [b.layout.n_vars for b in blocks_used]
    total = nc + sum(widths)
    offset = nc
    mats = []
    for blk, width in zip(blocks_used, widths):
        lay = blk.layout
        left = -blk.B
        right = blk.A
        pad_l = sp.csr_matrix((blk.A.shape[0], offset - nc))
        pad_r = sp.csr_matrix((blk.A.shape[0], total - offset - width))
        mats.append(sp.hstack([left, pad_l, right, pad_r], format="csr"))
        senses.append(blk.sense)
        rhs.append(blk.b)
        if nc:
            # -limit*x <= f_c <= limit*x as two rows per candidate
            fc_cols = offset + np.arange(lay.fc.start, lay.fc.stop)
            lim = blk.cand_limit
            r = np.arange(2 * nc)
            cols = np.r_[fc_cols, fc_cols, np.arange(nc), np.arange(nc)]
            vals = np.r_[np.ones(nc), -np.ones(nc), -lim, -lim]
            mats.append(sp.csr_matrix((vals, (np.r_[r[:nc], r[nc:], r[:nc], r[nc:]], cols)), shape=(2 * nc, total)))
            senses.append(np.array([LE] * (2 * nc), dtype=object))
            rhs.append(np.zeros(2 * nc))
        c_parts.append(np.zeros(width))
        lo, up = blk.lower.copy(), blk.upper.copy()
        lo[lay.r], up[lay.r] = 0.0, 0.0
        lo_parts.append(lo)
        up_parts.append(up)
        offset += width
    for cut in cuts:
        row = np.zeros(total)
        row[:nc] = cut.coefficients
        mats.append(sp.csr_matrix(row))
        senses.append(np.array([LE], dtype=object))
        rhs.append(np.array([-cut.constant + cut.tolerance()]))
    A = sp.vstack(mats, format="csr") if mats else sp.csr_matrix((0, total))
    integer = np.zeros(total, dtype=bool)
    integer[:nc] = True
    return LinearProgram(np.concatenate(c_parts), A, np.concatenate(senses) if senses else np.array([], dtype=object),
                         np.concatenate(rhs) if rhs else np.zeros(0), np.concatenate(lo_parts),
                         np.concatenate(up_parts), integer)


def _export_cuts(network, scenarios, plans, blocks, tag_iteration=None):
    cuts = []
    seen = set()
    for x in plans:
        key = tuple(int(v) for v in x)
        if key in seen:
            continue
        seen.add(key)
        for s in scenarios:
            r = evaluate(network, x, s, diagnose=False, block=blocks.get(s.id) if blocks else None)
            if r.z_value > Z_TOL:
                cut = derive_cut(r, network, x, s, iteration=tag_iteration, source=HEURISTIC_EXPORT)
                if cut.is_valid_for_generator():
                    cuts.append(cut)
    return cuts


def solve_k_milp(network: Network, scenarios_k: Sequence[Scenario], warm_cuts: Iterable[FeasibilityCut] = (), *,
                 fixed_built: Iterable[str] = (), export_cuts: bool = True,
                 blocks: Mapping[str, OperationBlock] | None = None,
                 mip_options: dict | None = None) -> KMilpResult:
    """Cheapest plan that is overload-free for every scenario in ``scenarios_k``.

    ``fixed_built`` candidates are forced into the plan. Warm cuts belonging
    to the selected scenarios are added to the MILP. Exported cuts come from
    evaluating the selected scenarios at the starting plan and at the
    rounded-down root relaxation; they are tagged ``"heuristic-export"``.

    Raises
    ------
    NoFeasiblePlanError
        If no plan makes every selected scenario overload-free.
    """
    network = ensure_big_m(network)
    fixed = [c for c in fixed_built]
    ids = set(s.id for s in scenarios_k)
    use_cuts = [c for c in warm_cuts if c.scenario_id in ids and c.candidate_ids == network.candidate_ids]
    milp = robust_milp(network, scenarios_k, fixed, use_cuts, blocks)
    sol = lpcore.solve(milp, **(mip_options or {}))
    nc = len(network.candidates)
    start = np.array([1.0 if cid in set(fixed) else 0.0 for cid in network.candidate_ids])
    if not sol.optimal:
        if sol.status == lpcore.Status.INFEASIBLE:
            everything = np.ones(nc)
            bad = [s.id for s in scenarios_k
                   if evaluate(network, everything, s, diagnose=False).z_value > Z_TOL]
            detail = ", ".join(bad) if bad else ", ".join(s.id for s in scenarios_k) + " (jointly)"
            raise NoFeasiblePlanError(f"candidates cannot remove the overloads of scenario(s) {detail}",
                                      bad or [s.id for s in scenarios_k])
        raise RuntimeError(f"robust MILP stopped early: {sol.status.value}")
    x = np.round(sol.x[:nc])
    plan = ExpansionPlan.from_vector(network, x)
    cuts: list[FeasibilityCut] = []
    if export_cuts:
        plans = [start]
        root = sol.extra.get("root_x")
        if root is not None:
            plans.append(np.maximum(np.floor(root[:nc] + 1e-9), start))
        cuts = _export_cuts(network, scenarios_k, plans, blocks)
    return KMilpResult(plan, float(network.candidate_costs @ x), cuts, sol.nodes, sol.iterations)


# -- yearly driver -------------------------------------------------------------

@dataclass
class IterationRecord:
    iteration: int
    selected: tuple[str, ...]
    milp_objective: float
    added: tuple[str, ...]
    overloaded_before: int
    overloaded_after: int | None = None


@dataclass
class RedundancyRecord:
    candidate: str
    cost: float
    removed: bool
    reason: str


@dataclass
class HeuristicTrace:
    iterations: list[IterationRecord] = field(default_factory=list)
    redundancy: list[RedundancyRecord] = field(default_factory=list)
    cuts: list[FeasibilityCut] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = []
        for it in self.iterations:
            out.append(
                f"iteration {it.iteration}: {it.overloaded_before} overloaded, selected {','.join(it.selected)}; "
                f"milp cost {it.milp_objective:.6g}; added {','.join(it.added) or '-'}")
        for rec in self.redundancy:
            verb = "removed" if rec.removed else "kept"
            out.append(f"redundancy: {verb} {rec.candidate} (cost {rec.cost:.6g}): {rec.reason}")
        return out


def eliminate_redundancy(network: Network, plan: ExpansionPlan, scenarios: Sequence[Scenario], *,
                         trace: HeuristicTrace | None = None, workers: int = 1,
                         blocks: Mapping[str, OperationBlock] | None = None,
                         protected: Iterable[str] = ()) -> ExpansionPlan:
    """Drop investments whose removal leaves every scenario overload-free.

    Invested candidates are tried in decreasing cost order, ties by id
    ascending. ``protected`` candidates are never removed.

    Raises
    ------
    ValueError
        If ``plan`` is not overload-free to begin with.
    """
    network = ensure_big_m(network)
    results = evaluate_many(network, plan, scenarios, workers=workers, diagnose=False, blocks=blocks)
    bad = [r.scenario_id for r in results if r.z_value > Z_TOL]
    if bad:
        raise ValueError("redundancy elimination needs a feasible plan; overloaded: " + ", ".join(bad))
    keep = set(protected)
    cost = dict(zip(plan.candidate_ids, plan.costs))
    order = sorted((c for c in plan.built if c not in keep), key=lambda c: (-cost[c], id_key(c)))
    current = plan
    for cid in order:
        trial = current.with_decision(cid, 0)
        failing = None
        for s in scenarios:
            blk = blocks.get(s.id) if blocks else None
            if evaluate(network, trial, s, diagnose=False, block=blk).z_value > Z_TOL:
                failing = s.id
                break
        if failing is None:
            current = trial
            if trace is not None:
                trace.redundancy.append(RedundancyRecord(cid, cost[cid], True, "no scenario overloaded without it"))
        elif trace is not None:
            trace.redundancy.append(RedundancyRecord(cid, cost[cid], False, f"scenario {failing} overloads"))
    return current


def plan_year(network: Network, scenarios: Sequence[Scenario], k: int | None = None, *,
              i_max: int = I_MAX, theta_div: float = THETA_DIV, workers: int = 1,
              eliminate: bool = True, mip_options: dict | None = None) -> tuple[ExpansionPlan, HeuristicTrace]:
    """Run the heuristic for one planning year.

    Returns the final plan (overload-free for every scenario) and the trace,
    whose ``cuts`` hold every cut harvested along the way.

    Raises
    ------
    HeuristicError
        If overloads remain after ``i_max`` iterations.
    NoFeasiblePlanError
        If a selected subset cannot be fixed by any candidates.
    """
    k = DEFAULT_K if k is None else int(k)
    network = ensure_big_m(network)
    trace = HeuristicTrace()
    blocks = {s.id: operation_block(network, s) for s in scenarios}
    plan = ExpansionPlan.empty(network)
    by_id = {s.id: s for s in scenarios}
    iteration = 0
    while True:
        results = evaluate_many(network, plan, scenarios, workers=workers, blocks=blocks)
        overloaded = [r for r in results if r.z_value > Z_TOL]
        if trace.iterations:
            trace.iterations[-1].overloaded_after = len(overloaded)
        for r in overloaded:
            cut = derive_cut(r, network, plan, r.scenario_id, iteration=iteration, source=HEURISTIC_EXPORT)
            if cut.is_valid_for_generator():
                trace.cuts.append(cut)
        if not overloaded:
            break
        if iteration >= i_max:
            raise HeuristicError(f"{len(overloaded)} scenario(s) still overloaded after {i_max} iterations", trace)
        iteration += 1
        ranking = rank_scenarios(network, plan, scenarios, k, results={r.scenario_id: r for r in results},
                                 theta_div=theta_div)
        chosen = [by_id[sid] for sid in ranking.selection]
        res = solve_k_milp(network, chosen, trace.cuts, fixed_built=plan.built, blocks=blocks,
                           mip_options=mip_options)
        trace.cuts.extend(res.cuts)
        added = tuple(c for c in res.plan.built if c not in set(plan.built))
        trace.iterations.append(IterationRecord(iteration, ranking.selection, res.objective, added, len(overloaded)))
        log.info("heuristic iteration %d: %d overloaded, added %s", iteration, len(overloaded), ",".join(added))
        plan = res.plan
    if eliminate and plan.built:
        plan = eliminate_redundancy(network, plan, scenarios, trace=trace, workers=workers, blocks=blocks)
    final = evaluate_many(network, plan, scenarios, workers=workers, diagnose=False, blocks=blocks)
    left = [r.scenario_id for r in final if r.z_value > Z_TOL]
    if left:
        raise HeuristicError("final plan leaves scenario(s) overloaded: " + ", ".join(left), trace)
    return plan, trace
