"""Linear program containers shared by the simplex and branch-and-bound code."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "<=", "==", ">="
_SENSES = {"<=": LE, "<": LE, "L": LE, "==": EQ, "=": EQ, "E": EQ, ">=": GE, ">": GE, "G": GE}

TAU_FEAS = 1e-7
TAU_DUAL = 1e-6
TAU_INT = 1e-6
TAU_GAP = 1e-9


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"


class ModelError(ValueError):
    pass


@dataclass
class LinearProgram:
    """``min c'x`` subject to ``A x (sense) b`` and ``lower <= x <= upper``.

    Variables default to ``[0, inf)``. ``integer`` marks binary variables;
    their bounds must lie within ``[0, 1]``.
    """

    c: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    b: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    integer: np.ndarray | None = None
    var_names: Sequence[str] | None = None
    row_names: Sequence[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        A = self.A
        if not sp.issparse(A):
            A = np.asarray(A, dtype=float)
            if A.ndim == 2 and A.shape[1] == n:
                pass
            elif A.size == 0:
                A = np.zeros((A.shape[0] if A.ndim == 2 and n == 0 else 0, n))
            else:
                A = np.atleast_2d(A)
        self.A = sp.csr_matrix(A, dtype=float)
        if self.A.shape[0] == 0:
            self.A = sp.csr_matrix((0, n))
        m = self.A.shape[0]
        if self.A.shape[1] != n:
            raise ModelError(f"constraint width {self.A.shape[1]} != objective length {n}")
        try:
            self.sense = np.array([_SENSES[s] for s in np.asarray(self.sense, dtype=object).ravel()], dtype=object)
        except KeyError as exc:
            raise ModelError(f"unknown constraint sense {exc.args[0]!r}") from None
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.sense.size != m or self.b.size != m:
            raise ModelError(f"{m} rows but {self.sense.size} senses and {self.b.size} right-hand sides")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).ravel().copy()
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).ravel().copy()
        if self.lower.size != n or self.upper.size != n:
            raise ModelError("bound vectors must match the number of variables")
        if np.any(self.lower > self.upper):
            bad = int(np.flatnonzero(self.lower > self.upper)[0])
            raise ModelError(f"variable {bad}: lower bound {self.lower[bad]} > upper bound {self.upper[bad]}")
        if self.integer is None:
            self.integer = np.zeros(n, dtype=bool)
        else:
            self.integer = np.asarray(self.integer, dtype=bool).ravel()
            if self.integer.size != n:
                raise ModelError("integrality markers must match the number of variables")
            if np.any(self.lower[self.integer] < 0) or np.any(self.upper[self.integer] > 1):
                raise ModelError("integer variables are binary and need bounds within [0, 1]")

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def is_mip(self) -> bool:
        return bool(self.integer.any())

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Range form: ``row_lower <= A x <= row_upper``."""
        lo = np.where(self.sense == LE, -np.inf, self.b)
        hi = np.where(self.sense == GE, np.inf, self.b)
        return lo.astype(float), hi.astype(float)

    def with_bounds(self, lower=None, upper=None) -> "LinearProgram":
        return LinearProgram(
            self.c, self.A, self.sense, self.b,
            self.lower if lower is None else lower,
            self.upper if upper is None else upper,
            self.integer, self.var_names, self.row_names,
        )

    def relaxation(self) -> "LinearProgram":
        return LinearProgram(self.c, self.A, self.sense, self.b, self.lower, self.upper,
                             None, self.var_names, self.row_names)


@dataclass
class Basis:
    """Final simplex basis, reusable as a warm start on the same matrix.

    ``basic`` lists column indices in the computational form ``[A, -I]``
    (structurals first, then one row-activity column per constraint).
    ``state`` gives the nonbasic position of every column.
    """

    basic: np.ndarray
    state: np.ndarray


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray | None = None
    objective: float = math.nan
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    farkas: np.ndarray | None = None
    iterations: int = 0
    basis: Basis | None = None
    gap: float = math.nan
    nodes: int = 0
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL


def primal_residual(lp: LinearProgram, x: np.ndarray) -> float:
    """Largest violation of rows or bounds at ``x``."""
    ax = lp.A @ x
    lo, hi = lp.row_bounds()
    viol = [0.0]
    if lp.m:
        viol.append(float(np.max(np.maximum(lo - ax, 0))))
        viol.append(float(np.max(np.maximum(ax - hi, 0))))
    if lp.n:
        viol.append(float(np.max(np.maximum(lp.lower - x, 0))))
        viol.append(float(np.max(np.maximum(x - lp.upper, 0))))
    return max(viol)


def dual_objective(lp: LinearProgram, duals: np.ndarray, reduced_costs: np.ndarray) -> float:
    """Dual objective of ``(duals, reduced_costs)``; ``-inf`` if a multiplier prices an infinite bound."""
    lo, hi = lp.row_bounds()
    total = 0.0
    for y, l, u in zip(duals, lo, hi):
        if y > 0:
            total += y * l
        elif y < 0:
            total += y * u
    for d, l, u in zip(reduced_costs, lp.lower, lp.upper):
        if d > 0:
            total += d * l
        elif d < 0:
            total += d * u
    return -math.inf if math.isnan(total) else total


def check_farkas(lp: LinearProgram, y: np.ndarray, tol: float = 1e-9) -> bool:
    """True if ``y`` proves the constraint system of ``lp`` empty.

    ``y`` follows the dual sign convention (``>= 0`` on ``>=`` rows, ``<= 0``
    on ``<=`` rows), so ``y'A x >= y'b`` holds for every feasible ``x``; the
    certificate is valid when ``max y'A x`` over the variable box is below
    ``y'b``.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y[lp.sense == GE] < -tol) or np.any(y[lp.sense == LE] > tol):
        return False
    a = lp.A.T @ y
    box_max = 0.0
    for aj, l, u in zip(a, lp.lower, lp.upper):
        if abs(aj) <= tol:
            continue
        bound = u if aj > 0 else l
        if math.isinf(bound):
            return False
        box_max += aj * bound
    return box_max < float(y @ lp.b) - tol * (1 + float(np.abs(y).sum()))
