"""Dense linear programming layer.

Every geometric predicate in the package (emptiness, containment, support,
redundancy) reduces to a small dense LP of the form

    minimize    c . x
    subject to  A x <= b,  lo <= x <= hi  (entries of lo/hi may be +-inf)

Problems here are tiny (a handful of variables, at most a few hundred rows),
so a single robust solver is used for everything: scipy's HiGHS backend.
Solves are deterministic for identical inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import (
    EmptySetError,
    MalformedLpError,
    UnboundedDirectionError,
)

# Feasibility and reduced-cost tolerances used when checking solver output.
FEAS_TOL = 1e-9
OPT_TOL = 1e-9


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """min c.x  s.t.  A x <= b  and per-variable bounds.

    ``bounds`` is a sequence of (lo, hi) pairs, one per variable; use
    ``None`` (or +-inf) for a free side. ``bounds=None`` means all
    variables are free.
    """

    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray
    bounds: tuple[tuple[float | None, float | None], ...] | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.objective, dtype=float))
        A = np.asarray(self.constraint_matrix, dtype=float)
        b = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        if A.ndim != 2:
            raise MalformedLpError("constraint matrix must be 2-D")
        m, n = A.shape
        if c.shape != (n,):
            raise MalformedLpError(
                f"objective length {c.shape} does not match {n} columns")
        if b.shape != (m,):
            raise MalformedLpError(
                f"rhs length {b.shape} does not match {m} rows")
        if not (np.isfinite(c).all() and np.isfinite(A).all()
                and np.isfinite(b).all()):
            raise MalformedLpError("matrix entries must be finite")
        bounds = self.bounds
        if bounds is not None:
            bounds = tuple((lo, hi) for lo, hi in bounds)
            if len(bounds) != n:
                raise MalformedLpError(
                    f"{len(bounds)} bound pairs for {n} variables")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "constraint_matrix", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "bounds", bounds)

    @property
    def num_variables(self) -> int:
        return self.constraint_matrix.shape[1]


@dataclass(frozen=True)
class LpOutcome:
    """Result of an LP solve.

    ``optimal_value`` and ``solution`` are present iff status is OPTIMAL.
    ``dual_inequalities`` carries the row marginals (d objective / d rhs)
    when the backend reports them; used by sensitivity checks.
    """

    status: LpStatus
    optimal_value: float | None = None
    solution: np.ndarray | None = None
    dual_inequalities: np.ndarray | None = None


def solve(lp: LinearProgram) -> LpOutcome:
    """Solve a dense LP, classifying the outcome.

    Raises MalformedLpError only at construction time; a well-formed
    LinearProgram always yields one of the three statuses.
    """
    bounds = lp.bounds if lp.bounds is not None else [(None, None)] * lp.num_variables
    res = linprog(
        lp.objective,
        A_ub=lp.constraint_matrix,
        b_ub=lp.rhs,
        bounds=list(bounds),
        method="highs",
    )
    if res.status == 0:
        x = np.asarray(res.x, dtype=float)
        duals = None
        if getattr(res, "ineqlin", None) is not None:
            duals = np.asarray(res.ineqlin.marginals, dtype=float)
        return LpOutcome(
            status=LpStatus.OPTIMAL,
            optimal_value=float(lp.objective @ x),
            solution=x,
            dual_inequalities=duals,
        )
    if res.status == 2:
        return LpOutcome(status=LpStatus.INFEASIBLE)
    if res.status == 3:
        return LpOutcome(status=LpStatus.UNBOUNDED)
    raise RuntimeError(f"LP solver returned unexpected status {res.status}: {res.message}")


def support_value(H: np.ndarray, h: np.ndarray, direction: Sequence[float]) -> float:
    """max direction . w  over  {w : H w <= h}.

    Raises EmptySetError when the constraint set is infeasible and
    UnboundedDirectionError when the maximum does not exist.
    """
    d = np.atleast_1d(np.asarray(direction, dtype=float))
    outcome = solve(LinearProgram(objective=-d, constraint_matrix=H, rhs=h))
    if outcome.status is LpStatus.INFEASIBLE:
        raise EmptySetError("support query over an empty set")
    if outcome.status is LpStatus.UNBOUNDED:
        raise UnboundedDirectionError(
            f"set is unbounded along direction {d.tolist()}")
    return -outcome.optimal_value


def feasible_point(H: np.ndarray, h: np.ndarray) -> np.ndarray | None:
    """A point of {x : H x <= h}, or None if the set is empty."""
    H = np.asarray(H, dtype=float)
    outcome = solve(LinearProgram(
        objective=np.zeros(H.shape[1]), constraint_matrix=H, rhs=h))
    if outcome.status is LpStatus.OPTIMAL:
        return outcome.solution
    return None
