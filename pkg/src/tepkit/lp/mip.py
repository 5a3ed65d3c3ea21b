"""Branch-and-bound for linear programs with binary variables.

Best-bound node selection (ties by node id), most-fractional branching (ties
by lowest variable index), children warm-started from the parent basis.
Among optimal plans the lexicographically smallest binary vector is
returned: after the optimum is proven, binaries are fixed to 0 one at a time
in index order whenever an equally cheap completion exists.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .model import TAU_GAP, TAU_INT, LinearProgram, LpSolution, Status
from .simplex import SimplexSolver

log = logging.getLogger(__name__)


@dataclass
class _Outcome:
    status: Status
    x: np.ndarray | None
    objective: float
    solution: LpSolution | None
    nodes: int
    bound: float


class _BranchAndBound:
    def __init__(self, lp: LinearProgram, kernel=None, gap=TAU_GAP, int_tol=TAU_INT,
                 node_limit=200_000, deadline=None):
        self.lp = lp
        self.engine = SimplexSolver(lp.relaxation(), kernel=kernel)
        self.binaries = np.flatnonzero(lp.integer)
        self.gap = gap
        self.int_tol = int_tol
        self.node_limit = node_limit
        self.deadline = deadline
        self.nodes = 0
        self.iterations = 0
        self.root: LpSolution | None = None

    def _lp(self, lower, upper, warm):
        sol = self.engine.solve(lower, upper, warm=warm)
        self.iterations += sol.iterations
        self.nodes += 1
        return sol

    def _fractional(self, x):
        vals = x[self.binaries]
        frac = np.abs(vals - np.round(vals))
        return frac

    def _integral_point(self, sol, lower, upper):
        """Fix binaries at their rounded values and re-solve; None if that fails."""
        lo, up = lower.copy(), upper.copy()
        r = np.round(sol.x[self.binaries])
        lo[self.binaries] = r
        up[self.binaries] = r
        fixed = self._lp(lo, up, sol.basis)
        if fixed.status != Status.OPTIMAL:
            return None
        fixed.x[self.binaries] = r
        return fixed

    def run(self, lower, upper, cutoff=math.inf, first_feasible=False) -> _Outcome:
        """Minimise over the box ``[lower, upper]``.

        Only solutions with objective ``<= cutoff`` are accepted. With
        ``first_feasible`` the search stops at the first accepted solution.
        """
        best_obj = cutoff
        best: LpSolution | None = None
        accept_below = cutoff + self.gap if math.isfinite(cutoff) else math.inf

        root = self._lp(lower, upper, None)
        if self.root is None:
            self.root = root
        if root.status == Status.INFEASIBLE:
            return _Outcome(Status.INFEASIBLE, None, math.inf, None, self.nodes, math.inf)
        if root.status == Status.UNBOUNDED:
            return _Outcome(Status.UNBOUNDED, None, -math.inf, None, self.nodes, -math.inf)
        if root.status != Status.OPTIMAL:
            return _Outcome(Status.ITERATION_LIMIT, None, math.inf, None, self.nodes, -math.inf)

        counter = 0
        heap = [(root.objective, counter, lower, upper, root)]
        limited = False
        lost = False

        def improves(value):
            if best is None:
                return value <= accept_below
            return value < best_obj - self.gap

        while heap:
            if self.nodes >= self.node_limit or (self.deadline and time.monotonic() > self.deadline):
                limited = True
                break
            bound, _, lo, up, sol = heapq.heappop(heap)
            if not improves(bound):
                continue
            frac = self._fractional(sol.x)
            pick = -1
            if frac.size and frac.max() > self.int_tol:
                score = np.minimum(frac, 1 - frac)
                pick = int(self.binaries[int(np.argmax(score))])
            else:
                point = self._integral_point(sol, lo, up)
                if point is None:
                    if frac.size and frac.max() > 0:
                        pick = int(self.binaries[int(np.argmax(frac))])
                    else:
                        continue
                else:
                    value = float(self.lp.c @ point.x)
                    if improves(value):
                        best, best_obj = point, value
                        if first_feasible:
                            break
                    continue
            for branch_value in (0.0, 1.0):
                clo, cup = lo.copy(), up.copy()
                clo[pick] = branch_value
                cup[pick] = branch_value
                child = self._lp(clo, cup, sol.basis)
                if child.status == Status.ITERATION_LIMIT:
                    log.warning("node LP hit its iteration limit; search is no longer exhaustive")
                    lost = True
                    continue
                if child.status != Status.OPTIMAL or not improves(child.objective):
                    continue
                counter += 1
                heapq.heappush(heap, (child.objective, counter, clo, cup, child))

        open_bound = min((h[0] for h in heap), default=math.inf)
        if best is None:
            status = Status.ITERATION_LIMIT if (limited or lost) else Status.INFEASIBLE
            return _Outcome(status, None, math.inf, None, self.nodes, open_bound)
        bound = min(open_bound, best_obj)
        if lost or (limited and open_bound < best_obj - self.gap):
            return _Outcome(Status.ITERATION_LIMIT, best.x, best_obj, best, self.nodes, bound)
        return _Outcome(Status.OPTIMAL, best.x, best_obj, best, self.nodes, best_obj)


def solve_mip(lp: LinearProgram, *, kernel: str | None = None, gap: float = TAU_GAP,
              int_tol: float = TAU_INT, node_limit: int = 200_000, time_limit: float | None = None,
              lexicographic: bool = True) -> LpSolution:
    """Solve a mixed-binary program to proven optimality (or until a limit hits).

    On a limit the best incumbent is returned with status
    ``ITERATION_LIMIT`` and ``gap`` set to incumbent minus best open bound.
    """
    deadline = time.monotonic() + time_limit if time_limit else None
    if not lp.is_mip:
        from .simplex import solve_lp
        return solve_lp(lp, kernel=kernel)
    bb = _BranchAndBound(lp, kernel=kernel, gap=gap, int_tol=int_tol,
                         node_limit=node_limit, deadline=deadline)
    out = bb.run(lp.lower.copy(), lp.upper.copy())
    if out.solution is None:
        return LpSolution(out.status, iterations=bb.iterations, nodes=bb.nodes,
                          message="no integer solution found" if out.status != Status.UNBOUNDED else "",
                          extra=_root_info(bb))

    best = out.solution
    best_obj = out.objective
    if lexicographic and out.status == Status.OPTIMAL:
        lo, up = lp.lower.copy(), lp.upper.copy()
        for j in bb.binaries:
            if best.x[j] < 0.5:
                up[j] = 0.0
                continue
            if lo[j] >= 1.0:
                continue
            trial_up = up.copy()
            trial_up[j] = 0.0
            alt = bb.run(lo, trial_up, cutoff=best_obj, first_feasible=True)
            if alt.solution is not None:
                best = alt.solution
                best_obj = min(best_obj, alt.objective)
                up[j] = 0.0
            else:
                lo[j] = 1.0
            if deadline and time.monotonic() > deadline:
                break

    sol = LpSolution(
        out.status, x=best.x, objective=float(lp.c @ best.x), duals=best.duals,
        reduced_costs=best.reduced_costs, iterations=bb.iterations, basis=best.basis,
        nodes=bb.nodes, gap=max(0.0, float(lp.c @ best.x) - out.bound) if math.isfinite(out.bound) else math.inf,
        extra=_root_info(bb),
    )
    return sol


def _root_info(bb: _BranchAndBound) -> dict:
    root = bb.root
    if root is None or root.x is None:
        return {}
    return {"root_x": root.x, "root_objective": root.objective}
