"""Bounded-variable primal and dual simplex on a dense tableau.

Constraints are rewritten in computational form ``A x - w = 0`` where the
row activity ``w`` carries the row bounds, so every constraint becomes a
bounded variable. A cold start puts feasible rows' ``w`` in the basis and
adds one artificial per violated row; phase 1 minimises the artificials and,
when it cannot reach zero, its duals are the Farkas certificate. Warm starts
(branch-and-bound children) reuse a parent basis, which stays dual feasible
after bound changes, and run the dual simplex.

Rows and columns are equilibrated by powers of two before solving.
"""

from __future__ import annotations

import logging

import numpy as np

from . import kernel as _kernel
from .kernel import AT_LOWER, AT_UPPER, BASIC, FREE
from .model import TAU_FEAS, Basis, LinearProgram, LpSolution, ModelError, Status

log = logging.getLogger(__name__)

TOL_P = 1e-9
TOL_D = 1e-9
TOL_PIV = 1e-9
CHECK_TOL = TAU_FEAS


def _pow2(v: np.ndarray) -> np.ndarray:
    out = np.ones_like(v)
    nz = v > 0
    out[nz] = np.exp2(np.round(-np.log2(v[nz])))
    return out


class SimplexSolver:
    """Simplex engine bound to one constraint matrix.

    Bounds may change between :meth:`solve` calls, which is what
    branch-and-bound does; the scaled matrix is built once.
    """

    def __init__(self, lp: LinearProgram, kernel: str | None = None, scale: bool = True):
        self.lp = lp
        self.kernel = _kernel.get(kernel)
        A = lp.A.toarray() if lp.m else np.zeros((0, lp.n))
        m, n = A.shape
        self.m, self.n = m, n
        if scale and A.size:
            self.rs = _pow2(np.abs(A).max(axis=1))
            As = A * self.rs[:, None]
            self.cs = _pow2(np.abs(As).max(axis=0))
            As = As * self.cs[None, :]
        else:
            self.rs = np.ones(m)
            self.cs = np.ones(n)
            As = A
        self.M = np.hstack([As, -np.eye(m)])
        self.cost = np.concatenate([lp.c * self.cs, np.zeros(m)])
        rl, ru = lp.row_bounds()
        self.wl = rl * self.rs
        self.wu = ru * self.rs

    # -- public -------------------------------------------------------------

    def solve(self, lower=None, upper=None, warm: Basis | None = None,
              max_iter: int | None = None) -> LpSolution:
        lower = self.lp.lower if lower is None else np.asarray(lower, dtype=float)
        upper = self.lp.upper if upper is None else np.asarray(upper, dtype=float)
        if np.any(lower > upper):
            return LpSolution(Status.INFEASIBLE, message="crossed variable bounds")
        lo = np.concatenate([lower / self.cs, self.wl])
        up = np.concatenate([upper / self.cs, self.wu])
        budget = max_iter or (50 * (self.m + self.n) + 1000)
        run = _Run(self, lo, up, budget)
        if warm is not None:
            sol = run.warm(warm)
            if sol is not None:
                return sol
            run = _Run(self, lo, up, budget)
        return run.cold()


class _Run:
    """State of one simplex solve (a tableau, values, bounds and basis)."""

    def __init__(self, eng: SimplexSolver, lo, up, budget):
        self.eng = eng
        self.lo0, self.up0 = lo, up
        self.budget = budget
        self.iterations = 0

    # -- setup --------------------------------------------------------------

    def _initial_nonbasic(self, lo, up, N):
        x = np.zeros(N)
        state = np.full(N, FREE, dtype=np.intc)
        has_lo = np.isfinite(lo)
        has_up = np.isfinite(up)
        x[has_lo] = lo[has_lo]
        state[has_lo] = AT_LOWER
        only_up = ~has_lo & has_up
        x[only_up] = up[only_up]
        state[only_up] = AT_UPPER
        return x, state

    def cold(self) -> LpSolution:
        eng = self.eng
        m, n = eng.m, eng.n
        nm = n + m
        lo, up = self.lo0.copy(), self.up0.copy()
        x, state = self._initial_nonbasic(lo, up, nm)
        act = eng.M[:, :n] @ x[:n]
        art_rows = []
        diag = np.empty(m)
        basis = np.empty(m, dtype=np.intc)
        for i in range(m):
            if lo[n + i] - TOL_P <= act[i] <= up[n + i] + TOL_P:
                basis[i] = n + i
                x[n + i] = act[i]
                state[n + i] = BASIC
                diag[i] = -1.0
            else:
                target = lo[n + i] if act[i] < lo[n + i] else up[n + i]
                x[n + i] = target
                state[n + i] = AT_LOWER if (target == lo[n + i]) else AT_UPPER
                art_rows.append(i)
        k = len(art_rows)
        N = nm + k
        M = np.zeros((m, N))
        M[:, :nm] = eng.M
        x = np.concatenate([x, np.zeros(k)])
        state = np.concatenate([state, np.full(k, BASIC, dtype=np.intc)])
        lo = np.concatenate([lo, np.zeros(k)])
        up = np.concatenate([up, np.full(k, np.inf)])
        for a, i in enumerate(art_rows):
            sign = 1.0 if x[n + i] > act[i] else -1.0
            M[i, nm + a] = sign
            diag[i] = sign
            basis[i] = nm + a
            x[nm + a] = abs(x[n + i] - act[i])
        self.M = M
        self.T = np.ascontiguousarray(M / diag[:, None]) if m else np.zeros((0, N))
        self.x, self.state, self.basis = x, state, basis
        self.lo, self.up = lo, up
        self.n_art = k

        if k:
            c1 = np.zeros(N)
            c1[nm:] = 1.0
            self.c = c1
            self._reprice()
            code = self._iterate("primal")
            if code == _kernel.ITER_LIMIT:
                return self._result(Status.ITERATION_LIMIT)
            self._reinvert()
            if np.max(self.x[nm:]) > CHECK_TOL:
                # phase 1 duals certify infeasibility
                self._polish("primal")
                if np.max(self.x[nm:]) > CHECK_TOL:
                    y = self._duals()
                    return self._result(Status.INFEASIBLE, farkas=y * eng.rs)
            self.lo[nm:] = 0.0
            self.up[nm:] = 0.0
        self.c = np.concatenate([eng.cost, np.zeros(k)])
        self._reprice()
        return self._phase2("primal")

    def warm(self, basis: Basis) -> LpSolution | None:
        eng = self.eng
        nm = eng.n + eng.m
        lo, up = self.lo0.copy(), self.up0.copy()
        state = np.asarray(basis.state, dtype=np.intc).copy()
        if state.size != nm or len(basis.basic) != eng.m:
            return None
        x = np.zeros(nm)
        for j in range(nm):
            if state[j] == BASIC:
                continue
            s = state[j]
            if s == AT_UPPER and np.isfinite(up[j]):
                x[j] = up[j]
            elif s in (AT_LOWER, AT_UPPER) and np.isfinite(lo[j]):
                x[j] = lo[j]
                state[j] = AT_LOWER
            elif np.isfinite(up[j]):
                x[j] = up[j]
                state[j] = AT_UPPER
            else:
                state[j] = FREE
        self.M = eng.M
        self.x, self.state = x, state
        self.basis = np.asarray(basis.basic, dtype=np.intc).copy()
        self.lo, self.up = lo, up
        self.n_art = 0
        self.c = eng.cost.copy()
        if not self._reinvert():
            return None
        if self._dual_feasible():
            code = self._iterate("dual")
            if code == _kernel.INFEASIBLE:
                self._reinvert()
                if self._dual_feasible() and self._primal_violation() > CHECK_TOL:
                    return self._result(Status.INFEASIBLE)
                return None
            if code == _kernel.ITER_LIMIT:
                return None
            sol = self._phase2("primal")
            return None if sol.status == Status.ITERATION_LIMIT else sol
        if self._primal_violation() <= CHECK_TOL:
            return self._phase2("primal")
        return None

    # -- iteration machinery ------------------------------------------------

    def _reprice(self):
        cb = self.c[self.basis]
        self.d = self.c - cb @ self.T if self.T.shape[0] else self.c.copy()

    def _reinvert(self) -> bool:
        m = self.eng.m
        if m == 0:
            self.T = np.zeros((0, self.M.shape[1]))
            self._reprice()
            return True
        B = self.M[:, self.basis]
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(Binv)):
            return False
        self.T = np.ascontiguousarray(Binv @ self.M)
        nonbasic = self.state != BASIC
        xn = np.where(nonbasic, self.x, 0.0)
        self.x[self.basis] = -(Binv @ (self.M @ xn))
        self._reprice()
        return True

    def _iterate(self, which: str) -> int:
        m = self.eng.m
        chunk = max(100, m)
        fn = self.eng.kernel.primal if which == "primal" else self.eng.kernel.dual
        while True:
            left = self.budget - self.iterations
            if left <= 0:
                return _kernel.ITER_LIMIT
            code, its, idx = fn(self.T, self.x, self.d, self.lo, self.up, self.state,
                                self.basis, min(chunk, left), TOL_P, TOL_D, TOL_PIV)
            self.iterations += its
            self.last_index = idx
            if code != _kernel.ITER_LIMIT:
                return code
            if not self._reinvert():
                return _kernel.ITER_LIMIT

    def _primal_violation(self) -> float:
        if self.x.size == 0:
            return 0.0
        v = np.maximum(self.lo - self.x, self.x - self.up)
        return float(np.max(v, initial=0.0))

    def _dual_violation(self) -> float:
        s, d = self.state, self.d
        movable = self.lo < self.up
        v = np.zeros_like(d)
        v = np.where((s == AT_LOWER) & movable, np.maximum(-d, 0), v)
        v = np.where((s == AT_UPPER) & movable, np.maximum(d, 0), v)
        v = np.where(s == FREE, np.abs(d), v)
        return float(np.max(v, initial=0.0))

    def _dual_feasible(self) -> bool:
        return self._dual_violation() <= CHECK_TOL

    def _polish(self, first: str) -> int:
        """Re-solve from a fresh factorization until both residuals are clean."""
        code = _kernel.OPTIMAL
        for _ in range(6):
            if not self._reinvert():
                return _kernel.ITER_LIMIT
            pv, dv = self._primal_violation(), self._dual_violation()
            if pv <= CHECK_TOL and dv <= CHECK_TOL:
                return _kernel.OPTIMAL
            if pv > CHECK_TOL and dv <= CHECK_TOL:
                code = self._iterate("dual")
                if code == _kernel.INFEASIBLE:
                    return code
            else:
                code = self._iterate("primal")
                if code == _kernel.UNBOUNDED:
                    return code
            if code == _kernel.ITER_LIMIT:
                return code
        return code

    def _phase2(self, first: str) -> LpSolution:
        code = self._iterate(first)
        if code == _kernel.UNBOUNDED:
            return self._result(Status.UNBOUNDED)
        if code == _kernel.ITER_LIMIT:
            return self._result(Status.ITERATION_LIMIT)
        code = self._polish(first)
        if code == _kernel.UNBOUNDED:
            return self._result(Status.UNBOUNDED)
        if code == _kernel.INFEASIBLE:
            return self._result(Status.INFEASIBLE)
        if code == _kernel.ITER_LIMIT:
            return self._result(Status.ITERATION_LIMIT)
        return self._result(Status.OPTIMAL)

    def _duals(self) -> np.ndarray:
        """Row duals in the scaled space, ``y = c_B B^-1``."""
        n, m = self.eng.n, self.eng.m
        if m == 0:
            return np.zeros(0)
        binv = -self.T[:, n:n + m]
        return self.c[self.basis] @ binv

    def _result(self, status: Status, farkas=None) -> LpSolution:
        eng = self.eng
        n, m = eng.n, eng.m
        nm = n + m
        basic = self.basis.copy()
        state = self.state[:nm].copy()
        # artificials left in the basis are swapped for their row's activity column
        for r, col in enumerate(basic):
            if col >= nm:
                row = int(np.flatnonzero(self.M[:, col])[0])
                basic[r] = n + row
                state[n + row] = BASIC
        sol = LpSolution(status, iterations=self.iterations,
                         basis=Basis(basic.astype(np.intc), state.astype(np.intc)))
        if farkas is not None:
            sol.farkas = farkas
        if status == Status.OPTIMAL:
            x = self.x[:n] * eng.cs
            # snap to bounds that the scaled solve sits on
            lo, up = eng.lp.lower, eng.lp.upper
            with np.errstate(invalid="ignore"):
                near_lo = np.isfinite(lo) & (np.abs(x - lo) <= 1e-12 * (1 + np.abs(lo)))
                near_up = np.isfinite(up) & (np.abs(x - up) <= 1e-12 * (1 + np.abs(up)))
            x = np.where(near_lo, lo, np.where(near_up, up, x))
            y = _project(self._duals(), self.state[n:nm], self.lo[n:nm], self.up[n:nm]) * eng.rs
            rc = _project(self.d[:n], self.state[:n], self.lo[:n], self.up[:n]) / eng.cs
            sol.x = x
            sol.duals = y
            sol.reduced_costs = rc
            sol.objective = float(eng.lp.c @ x)
        return sol


def _project(mult, state, lo, up):
    """Zero multipliers of basic columns and clip round-off of the wrong sign.

    A column resting on its only finite bound gets a one-signed multiplier;
    fixed columns keep either sign.
    """
    out = np.where(state == BASIC, 0.0, mult)
    out = np.where(state == FREE, 0.0, out)
    at_lo = (state == AT_LOWER) & np.isinf(up)
    at_up = (state == AT_UPPER) & np.isinf(lo)
    out = np.where(at_lo, np.maximum(out, 0.0), out)
    out = np.where(at_up, np.minimum(out, 0.0), out)
    return out


def solve_lp(lp: LinearProgram, *, kernel: str | None = None, warm: Basis | None = None,
             max_iter: int | None = None) -> LpSolution:
    """Solve a continuous linear program.

    Raises :class:`ModelError` when ``lp`` carries integrality markers; use
    :func:`tepkit.lp.solve_mip` (or ``lp.relaxation()``) instead.
    """
    if lp.is_mip:
        raise ModelError("solve_lp got integer variables; call solve_mip or relax first")
    return SimplexSolver(lp, kernel=kernel).solve(warm=warm, max_iter=max_iter)
