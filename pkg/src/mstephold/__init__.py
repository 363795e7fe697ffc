"""Maximal M-step hold control invariant sets for constrained LTI systems.

An M-step hold controller may change its input only every M base
sampling periods. This package computes the maximal sets of states from
which such a controller can satisfy polytopic state and input
constraints at every base sample, forever, together with robust
counterparts that tighten constraints against time-varying model and
discretization error bounds. Independent grid, replay and
true-dynamics oracles cross-check the results.
"""

from .disturbance import (
    DisturbanceSchedule,
    box_radii_schedule,
    box_schedule,
    sine_example_schedule,
    taylor_error_bound,
    zero_schedule,
)
from .invariance import (
    FixedPointOptions,
    InvariantSetResult,
    LiftedConstraintSystem,
    build_lifted,
    compute_cinf,
    compute_rcinf,
    feasible_hold_input,
    pre_m,
    pre_m_robust,
)
from .lti import (
    ContinuousLtiModel,
    DiscreteLtiModel,
    euler_discretize,
    exact_discretize,
    intersample_trajectory,
    simulate,
    upsample_inputs,
)
from .polytope import (
    Polytope,
    chebyshev_center,
    contains,
    contains_point,
    intersect,
    is_empty,
    project_out_last,
    remove_redundant,
    set_equal,
    support,
    vertices_2d,
)

__version__ = "0.1.0"

__all__ = [
    "ContinuousLtiModel",
    "DiscreteLtiModel",
    "DisturbanceSchedule",
    "FixedPointOptions",
    "InvariantSetResult",
    "LiftedConstraintSystem",
    "Polytope",
    "box_radii_schedule",
    "box_schedule",
    "build_lifted",
    "chebyshev_center",
    "compute_cinf",
    "compute_rcinf",
    "contains",
    "contains_point",
    "euler_discretize",
    "exact_discretize",
    "feasible_hold_input",
    "intersample_trajectory",
    "intersect",
    "is_empty",
    "pre_m",
    "pre_m_robust",
    "project_out_last",
    "remove_redundant",
    "set_equal",
    "simulate",
    "sine_example_schedule",
    "support",
    "taylor_error_bound",
    "upsample_inputs",
    "vertices_2d",
    "zero_schedule",
]
