# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simplex iterations; same contract as ``_pykernel``."""

from libc.math cimport fabs, INFINITY

cdef enum:
    BASIC = 0
    AT_LOWER = 1
    AT_UPPER = 2
    FREE = 3

cdef enum:
    C_OPTIMAL = 0
    C_UNBOUNDED = 1
    C_INFEASIBLE = 2
    C_ITER_LIMIT = 3

OPTIMAL, UNBOUNDED, INFEASIBLE, ITER_LIMIT = 0, 1, 2, 3

cdef int STALL_LIMIT = 50
cdef double DEGENERATE_STEP = 1e-11


cdef inline void _pivot(double[:, ::1] T, double[::1] d, Py_ssize_t r, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t m = T.shape[0], N = T.shape[1], i, k
    cdef double inv = 1.0 / T[r, j], f
    for k in range(N):
        T[r, k] *= inv
    T[r, j] = 1.0
    for i in range(m):
        if i == r:
            continue
        f = T[i, j]
        if f != 0.0:
            for k in range(N):
                T[i, k] -= f * T[r, k]
            T[i, j] = 0.0
    f = d[j]
    if f != 0.0:
        for k in range(N):
            d[k] -= f * T[r, k]
    d[j] = 0.0


def primal(double[:, ::1] T, double[::1] x, double[::1] d, double[::1] lo, double[::1] up,
           int[::1] state, int[::1] basis, long max_iter, double tol_p, double tol_d, double tol_piv):
    cdef Py_ssize_t m = T.shape[0], N = T.shape[1]
    cdef Py_ssize_t i, k, j, r, b
    cdef long it = 0
    cdef int stall = 0, bland, code = -1
    cdef double best, score, dk, direction, a, ratio, theta, flip, t, best_a, lb, ub
    with nogil:
        while it < max_iter:
            bland = stall > STALL_LIMIT
            j = -1
            best = 0.0
            for k in range(N):
                if state[k] == BASIC or not (lo[k] < up[k]):
                    continue
                dk = d[k]
                score = 0.0
                if state[k] == AT_LOWER:
                    if dk < -tol_d:
                        score = -dk
                elif state[k] == AT_UPPER:
                    if dk > tol_d:
                        score = dk
                elif fabs(dk) > tol_d:
                    score = fabs(dk)
                if score > 0.0:
                    if bland:
                        j = k
                        break
                    if score > best:
                        best = score
                        j = k
            if j < 0:
                code = C_OPTIMAL
                break
            direction = 1.0 if d[j] < 0 else -1.0

            flip = up[j] - lo[j]
            r = -1
            theta = INFINITY
            if bland:
                for i in range(m):
                    a = direction * T[i, j]
                    b = basis[i]
                    if a > tol_piv and lo[b] > -INFINITY:
                        ratio = (x[b] - lo[b]) / a
                    elif a < -tol_piv and up[b] < INFINITY:
                        ratio = (up[b] - x[b]) / (-a)
                    else:
                        continue
                    if ratio < theta:
                        theta = ratio
                if theta < INFINITY:
                    for i in range(m):
                        a = direction * T[i, j]
                        b = basis[i]
                        if a > tol_piv and lo[b] > -INFINITY:
                            ratio = (x[b] - lo[b]) / a
                        elif a < -tol_piv and up[b] < INFINITY:
                            ratio = (up[b] - x[b]) / (-a)
                        else:
                            continue
                        if ratio <= theta + 1e-12 and (r < 0 or basis[i] < basis[r]):
                            r = i
            else:
                for i in range(m):
                    a = direction * T[i, j]
                    b = basis[i]
                    if a > tol_piv and lo[b] > -INFINITY:
                        ratio = (x[b] - lo[b] + tol_p) / a
                    elif a < -tol_piv and up[b] < INFINITY:
                        ratio = (up[b] - x[b] + tol_p) / (-a)
                    else:
                        continue
                    if ratio < theta:
                        theta = ratio
                if theta < INFINITY:
                    best_a = 0.0
                    for i in range(m):
                        a = direction * T[i, j]
                        b = basis[i]
                        if a > tol_piv and lo[b] > -INFINITY:
                            ratio = (x[b] - lo[b]) / a
                        elif a < -tol_piv and up[b] < INFINITY:
                            ratio = (up[b] - x[b]) / (-a)
                        else:
                            continue
                        if ratio <= theta and fabs(a) > best_a:
                            best_a = fabs(a)
                            r = i
            if r < 0 and not (flip < INFINITY):
                code = C_UNBOUNDED
                break
            if r >= 0 and flip <= theta:
                r = -1

            if r < 0:
                t = flip
                if t > 0:
                    for i in range(m):
                        x[basis[i]] -= t * direction * T[i, j]
                if direction > 0:
                    x[j] = up[j]
                    state[j] = AT_UPPER
                else:
                    x[j] = lo[j]
                    state[j] = AT_LOWER
            else:
                b = basis[r]
                a = direction * T[r, j]
                if a > 0:
                    t = (x[b] - lo[b]) / a
                else:
                    t = (up[b] - x[b]) / (-a)
                if t < 0:
                    t = 0.0
                if t > 0:
                    for i in range(m):
                        x[basis[i]] -= t * direction * T[i, j]
                x[j] += direction * t
                if a > 0:
                    x[b] = lo[b]
                    state[b] = AT_LOWER
                else:
                    x[b] = up[b]
                    state[b] = AT_UPPER
                _pivot(T, d, r, j)
                basis[r] = <int>j
                state[j] = BASIC
            if t <= DEGENERATE_STEP:
                stall += 1
            else:
                stall = 0
            it += 1
    if code < 0:
        return ITER_LIMIT, it, -1
    if code == C_UNBOUNDED:
        return UNBOUNDED, it, j
    return code, it, -1


def dual(double[:, ::1] T, double[::1] x, double[::1] d, double[::1] lo, double[::1] up,
         int[::1] state, int[::1] basis, long max_iter, double tol_p, double tol_d, double tol_piv):
    cdef Py_ssize_t m = T.shape[0], N = T.shape[1]
    cdef Py_ssize_t i, k, j, r, leave
    cdef long it = 0
    cdef int code = -1, to_lower, stall = 0, bland
    cdef double best, v, a, sa, theta, bound, delta, step, best_a, ratio
    with nogil:
        while it < max_iter:
            bland = stall > STALL_LIMIT
            r = -1
            best = tol_p
            for i in range(m):
                k = basis[i]
                v = lo[k] - x[k]
                if x[k] - up[k] > v:
                    v = x[k] - up[k]
                if bland:
                    if v > tol_p and (r < 0 or basis[i] < basis[r]):
                        r = i
                elif v > best:
                    best = v
                    r = i
            if r < 0:
                code = C_OPTIMAL
                break
            leave = basis[r]
            to_lower = x[leave] < lo[leave]
            bound = lo[leave] if to_lower else up[leave]
            delta = x[leave] - bound

            theta = INFINITY
            for k in range(N):
                if state[k] == BASIC or not (lo[k] < up[k]):
                    continue
                a = T[r, k]
                sa = -a if to_lower else a
                if state[k] == AT_LOWER:
                    if not (sa > tol_piv):
                        continue
                elif state[k] == AT_UPPER:
                    if not (sa < -tol_piv):
                        continue
                elif not (fabs(a) > tol_piv):
                    continue
                if bland:
                    ratio = fabs(d[k]) / fabs(a)
                else:
                    ratio = (fabs(d[k]) + tol_d) / fabs(a)
                if ratio < theta:
                    theta = ratio
            if not (theta < INFINITY):
                code = C_INFEASIBLE
                break
            j = -1
            best_a = 0.0
            for k in range(N):
                if state[k] == BASIC or not (lo[k] < up[k]):
                    continue
                a = T[r, k]
                sa = -a if to_lower else a
                if state[k] == AT_LOWER:
                    if not (sa > tol_piv):
                        continue
                elif state[k] == AT_UPPER:
                    if not (sa < -tol_piv):
                        continue
                elif not (fabs(a) > tol_piv):
                    continue
                if bland:
                    if fabs(d[k]) / fabs(a) <= theta + 1e-12:
                        j = k
                        break
                elif fabs(d[k]) / fabs(a) <= theta and fabs(a) > best_a:
                    best_a = fabs(a)
                    j = k
            if fabs(d[j]) / fabs(T[r, j]) <= DEGENERATE_STEP:
                stall += 1
            else:
                stall = 0

            step = delta / T[r, j]
            for i in range(m):
                x[basis[i]] -= step * T[i, j]
            x[j] += step
            x[leave] = bound
            state[leave] = AT_LOWER if to_lower else AT_UPPER
            _pivot(T, d, r, j)
            basis[r] = <int>j
            state[j] = BASIC
            it += 1
    if code < 0:
        return ITER_LIMIT, it, -1
    if code == C_INFEASIBLE:
        return INFEASIBLE, it, r
    return code, it, -1
