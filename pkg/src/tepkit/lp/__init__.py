"""Self-contained LP/MIP solver core.

Everything above this package calls :func:`solve`, a ``LinearProgram ->
LpSolution`` function; any callable with that signature (for example
:func:`tepkit.lp.external.highs`) can be passed in its place.
"""

from typing import Callable

from .kernel import BACKEND
from .lpfile import write_lp
from .mip import solve_mip
from .model import (EQ, GE, LE, TAU_DUAL, TAU_FEAS, TAU_GAP, TAU_INT, Basis, LinearProgram,
                    LpSolution, ModelError, Status, check_farkas, dual_objective,
                    primal_residual)
from .simplex import SimplexSolver, solve_lp

SolveFn = Callable[[LinearProgram], LpSolution]


def solve(lp: LinearProgram, **options) -> LpSolution:
    """Solve ``lp`` with the built-in core, branching only if it has binaries."""
    if lp.is_mip:
        return solve_mip(lp, **options)
    return solve_lp(lp, **options)


__all__ = [
    "BACKEND", "EQ", "GE", "LE", "TAU_DUAL", "TAU_FEAS", "TAU_GAP", "TAU_INT", "Basis",
    "LinearProgram", "LpSolution", "ModelError", "SimplexSolver", "SolveFn", "Status",
    "check_farkas", "dual_objective", "primal_residual", "solve", "solve_lp", "solve_mip",
    "write_lp",
]
