"""Time-varying disturbance schedules.

A schedule is a list of M polytopes in state space; the bound that
applies j steps after the last state measurement is ``sets[j]``. Each
set is interpreted as the *cumulative* deviation bound accumulated
since that measurement (the uncertainty resets when a fresh measurement
arrives), so constraint tightening subtracts a single support value per
prediction step and earlier disturbances are not re-propagated through
the dynamics.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import exp
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatchError
from .polytope import Polytope, contains

_ORIGIN_TOL = 1e-12


@dataclass(frozen=True)
class DisturbanceSchedule:
    """Cyclic bounds W[0], ..., W[M-1] on accumulated deviation."""

    sets: tuple[Polytope, ...]

    def __post_init__(self):
        sets = tuple(self.sets)
        if not sets:
            raise ValueError("schedule needs at least one set")
        dim = sets[0].dim
        for j, P in enumerate(sets):
            if P.dim != dim:
                raise DimensionMismatchError(
                    f"set {j} has dim {P.dim}, expected {dim}")
            Pn = P.normalized()
            if np.any(Pn.h < -_ORIGIN_TOL):
                raise ValueError(
                    f"set {j} does not contain the origin (fresh measurements "
                    "carry zero accumulated error)")
        object.__setattr__(self, "sets", sets)

    @property
    def M(self) -> int:
        return len(self.sets)

    @property
    def dim(self) -> int:
        return self.sets[0].dim

    def is_nested(self, tol: float = 1e-9) -> bool:
        """Whether W[j] is contained in W[j+1] for every j (bounds grow
        between measurements). Builders in this module guarantee it;
        user-supplied schedules should be checked, not assumed."""
        return all(contains(self.sets[j + 1], self.sets[j], tol)
                   for j in range(self.M - 1))

    def to_dict(self) -> dict:
        return {"M": self.M, "sets": [P.to_dict() for P in self.sets]}

    @classmethod
    def from_dict(cls, data: dict) -> "DisturbanceSchedule":
        if "box_radii" in data:
            return box_radii_schedule(data["box_radii"])
        return cls(tuple(Polytope.from_dict(d) for d in data["sets"]))


def box_schedule(radii_fn: Callable[[int], Sequence[float]], M: int
                 ) -> DisturbanceSchedule:
    """Schedule of axis-aligned boxes; radii_fn(j) gives W[j]'s radii."""
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    sets = []
    for j in range(M):
        r = np.atleast_1d(np.asarray(radii_fn(j), dtype=float))
        if np.any(r < 0):
            raise ValueError(f"negative radius at step {j}")
        sets.append(Polytope.from_box(-r, r))
    return DisturbanceSchedule(tuple(sets))


def box_radii_schedule(radii: Sequence[Sequence[float]]) -> DisturbanceSchedule:
    """Schedule from an explicit per-step list of box radii."""
    radii = [np.atleast_1d(np.asarray(r, dtype=float)) for r in radii]
    return box_schedule(lambda j: radii[j], len(radii))


def zero_schedule(dim: int, M: int) -> DisturbanceSchedule:
    """Degenerate schedule W[j] = {0}: robustness reduces to the nominal case."""
    return box_schedule(lambda j: np.zeros(dim), M)


def taylor_error_bound(Ts: float, j: int) -> float:
    """Accumulated linearization error bound (exp(j Ts) - 1) / 6.

    This is the closed-form bound for the sine-drift system modeled by
    its linearization about the origin: on |x| <= 1 the neglected terms
    are bounded by 1/6, and integrating the error dynamics gives the
    exponential envelope; j counts base sampling periods since the last
    measurement, so j = 0 (a fresh measurement) carries zero error.
    """
    if Ts <= 0:
        raise ValueError(f"Ts must be positive, got {Ts}")
    if j < 0:
        raise ValueError(f"step index must be >= 0, got {j}")
    return (exp(j * Ts) - 1.0) / 6.0


def sine_example_schedule(Ts: float, M: int) -> DisturbanceSchedule:
    """1-D schedule for the sine-drift system: W[j] has radius
    taylor_error_bound(Ts, j + 1), the bound one base period ahead of
    the block index (the deviation a prediction can accumulate by the
    time it is checked)."""
    return box_schedule(lambda j: [taylor_error_bound(Ts, j + 1)], M)
