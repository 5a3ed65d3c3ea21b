"""Pure numpy simplex iterations on a dense bounded-variable tableau.

Mirror of ``_kernel.pyx``; both expose ``primal`` and ``dual`` with the same
arguments, return codes and pivoting rules. The arrays are updated in place:

``T``      (m, N) tableau ``B^-1 M`` of the computational matrix ``M``
``x``      (N,)   current value of every column (basic and nonbasic)
``d``      (N,)   reduced costs
``lo, up`` (N,)   column bounds, +/-inf allowed
``state``  (N,)   BASIC, AT_LOWER, AT_UPPER or FREE (nonbasic, no bounds)
``basis``  (m,)   column basic in each row

Both functions return ``(code, iterations, index)``; ``index`` is the
entering column for UNBOUNDED and the leaving row for INFEASIBLE.
"""

import numpy as np

BASIC, AT_LOWER, AT_UPPER, FREE = 0, 1, 2, 3
OPTIMAL, UNBOUNDED, INFEASIBLE, ITER_LIMIT = 0, 1, 2, 3

STALL_LIMIT = 50
DEGENERATE_STEP = 1e-11


def _pivot(T, d, r, j):
    prow = T[r] / T[r, j]
    T[r] = prow
    col = T[:, j].copy()
    col[r] = 0.0
    nz = np.flatnonzero(col)
    if nz.size:
        T[nz] -= np.outer(col[nz], prow)
    dj = d[j]
    if dj != 0.0:
        d -= dj * prow
    d[j] = 0.0
    T[:, j] = 0.0
    T[r, j] = 1.0


def primal(T, x, d, lo, up, state, basis, max_iter, tol_p, tol_d, tol_piv):
    m = T.shape[0]
    movable = lo < up
    stall = 0
    it = 0
    while it < max_iter:
        bland = stall > STALL_LIMIT
        # pricing
        elig = np.zeros(d.size, dtype=bool)
        elig |= (state == AT_LOWER) & (d < -tol_d)
        elig |= (state == AT_UPPER) & (d > tol_d)
        elig |= (state == FREE) & (np.abs(d) > tol_d)
        elig &= movable
        cand = np.flatnonzero(elig)
        if cand.size == 0:
            return OPTIMAL, it, -1
        if bland:
            j = int(cand[0])
        else:
            j = int(cand[np.argmax(np.abs(d[cand]))])
        direction = 1.0 if d[j] < 0 else -1.0

        # ratio test
        alpha = direction * T[:, j]
        xb = x[basis]
        lb = lo[basis]
        ub = up[basis]
        dec = (alpha > tol_piv) & np.isfinite(lb)
        inc = (alpha < -tol_piv) & np.isfinite(ub)
        ratio = np.full(m, np.inf)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio[dec] = (xb[dec] - lb[dec]) / alpha[dec]
            ratio[inc] = (ub[inc] - xb[inc]) / (-alpha[inc])
        rows = np.flatnonzero(dec | inc)
        flip = up[j] - lo[j]
        if rows.size == 0 and not np.isfinite(flip):
            return UNBOUNDED, it, j

        r = -1
        if rows.size:
            if bland:
                best = np.min(ratio[rows])
                ties = rows[ratio[rows] <= best + 1e-12]
                r = int(ties[np.argmin(basis[ties])])
                theta = best
            else:
                relaxed = np.full(m, np.inf)
                relaxed[dec] = (xb[dec] - lb[dec] + tol_p) / alpha[dec]
                relaxed[inc] = (ub[inc] - xb[inc] + tol_p) / (-alpha[inc])
                theta = np.min(relaxed[rows])
                ok = rows[ratio[rows] <= theta]
                r = int(ok[np.argmax(np.abs(alpha[ok]))])
            if flip <= theta:
                r = -1

        if r < 0:
            t = flip
            if t > 0:
                x[basis] -= t * alpha
            if direction > 0:
                x[j] = up[j]
                state[j] = AT_UPPER
            else:
                x[j] = lo[j]
                state[j] = AT_LOWER
        else:
            t = max(ratio[r], 0.0)
            if t > 0:
                x[basis] -= t * alpha
            x[j] += direction * t
            leave = basis[r]
            if alpha[r] > 0:
                x[leave] = lo[leave]
                state[leave] = AT_LOWER
            else:
                x[leave] = up[leave]
                state[leave] = AT_UPPER
            _pivot(T, d, r, j)
            basis[r] = j
            state[j] = BASIC
        stall = stall + 1 if t <= DEGENERATE_STEP else 0
        it += 1
    return ITER_LIMIT, it, -1


def dual(T, x, d, lo, up, state, basis, max_iter, tol_p, tol_d, tol_piv):
    movable = lo < up
    stall = 0
    it = 0
    while it < max_iter:
        bland = stall > STALL_LIMIT
        xb = x[basis]
        below = lo[basis] - xb
        above = xb - up[basis]
        infeas = np.maximum(below, above)
        if infeas.size == 0 or infeas.max() <= tol_p:
            return OPTIMAL, it, -1
        if bland:
            rows = np.flatnonzero(infeas > tol_p)
            r = int(rows[np.argmin(basis[rows])])
        else:
            r = int(np.argmax(infeas))
        leave = basis[r]
        to_lower = below[r] > 0
        bound = lo[leave] if to_lower else up[leave]
        delta = x[leave] - bound

        row = T[r]
        sgn = -1.0 if to_lower else 1.0
        s_row = sgn * row
        elig = movable & (state != BASIC)
        elig &= (((state == AT_LOWER) & (s_row > tol_piv))
                 | ((state == AT_UPPER) & (s_row < -tol_piv))
                 | ((state == FREE) & (np.abs(row) > tol_piv)))
        cand = np.flatnonzero(elig)
        if cand.size == 0:
            return INFEASIBLE, it, r
        absa = np.abs(row[cand])
        absd = np.abs(d[cand])
        exact = absd / absa
        if bland:
            best = exact.min()
            j = int(cand[exact <= best + 1e-12][0])
        else:
            theta = np.min((absd + tol_d) / absa)
            ok = exact <= theta
            j = int(cand[ok][np.argmax(absa[ok])])
        stall = stall + 1 if abs(d[j]) / abs(row[j]) <= DEGENERATE_STEP else 0

        step = delta / row[j]
        x[basis] -= step * T[:, j]
        x[j] += step
        x[leave] = bound
        state[leave] = AT_LOWER if to_lower else AT_UPPER
        _pivot(T, d, r, j)
        basis[r] = j
        state[j] = BASIC
        it += 1
    return ITER_LIMIT, it, -1
