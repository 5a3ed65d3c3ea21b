"""Adapter for scipy's HiGHS bindings.

Drop-in replacement for :func:`tepkit.lp.solve`. Handy as a cross-check of
the built-in core and for larger instances.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .model import EQ, GE, LE, LinearProgram, LpSolution, Status

_STATUS = {0: Status.OPTIMAL, 1: Status.ITERATION_LIMIT, 2: Status.INFEASIBLE, 3: Status.UNBOUNDED}


def highs(lp: LinearProgram, **_ignored) -> LpSolution:
    """Solve with HiGHS; duals follow the core's sign convention (``c = A'y + rc``)."""
    if lp.is_mip:
        cons = [LinearConstraint(lp.A, *lp.row_bounds())] if lp.m else []
        res = milp(lp.c, constraints=cons, integrality=lp.integer.astype(int),
                   bounds=Bounds(lp.lower, lp.upper))
        status = _STATUS.get(res.status, Status.ITERATION_LIMIT)
        if res.x is None:
            return LpSolution(status, message=res.message)
        return LpSolution(status, np.asarray(res.x), float(res.fun), message=res.message)

    le, ge, eq = (lp.sense == LE), (lp.sense == GE), (lp.sense == EQ)
    A = lp.A.tocsr()
    A_ub = sp.vstack([A[np.flatnonzero(le)], -A[np.flatnonzero(ge)]]).tocsr()
    b_ub = np.concatenate([lp.b[le], -lp.b[ge]])
    A_eq, b_eq = A[np.flatnonzero(eq)], lp.b[eq]
    res = linprog(lp.c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if b_ub.size else None,
                  A_eq=A_eq if A_eq.shape[0] else None, b_eq=b_eq if b_eq.size else None,
                  bounds=list(zip(lp.lower, lp.upper)), method="highs")
    status = _STATUS.get(res.status, Status.ITERATION_LIMIT)
    if status != Status.OPTIMAL:
        return LpSolution(status, message=res.message)
    y = np.zeros(lp.m)
    n_le = int(le.sum())
    if A_ub.shape[0]:
        m_ub = res.ineqlin.marginals
        y[np.flatnonzero(le)] = m_ub[:n_le]
        y[np.flatnonzero(ge)] = -m_ub[n_le:]
    if A_eq.shape[0]:
        y[np.flatnonzero(eq)] = res.eqlin.marginals
    rc = res.lower.marginals + res.upper.marginals
    return LpSolution(status, np.asarray(res.x), float(res.fun), y, rc, iterations=int(res.nit),
                      message=res.message)
