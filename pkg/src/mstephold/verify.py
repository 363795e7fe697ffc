"""Independent oracles and scenario checks for the invariant-set machinery.

Nothing here reuses the polytope fixed-point path it is checking: the
grid oracle runs backward reachability on a lattice with gridded inputs,
the counterexample search replays an up-sampled coarse plan against the
fine and continuous models, and the truth check integrates the actual
nonlinear sine dynamics with RK4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .disturbance import DisturbanceSchedule, sine_example_schedule
from .errors import (
    DimensionMismatchError,
    EmptySetError,
    ResolutionTooCoarseError,
    SetsNestedError,
)
from .invariance import _hold_matrices, feasible_hold_input
from .lti import (
    ContinuousLtiModel,
    DiscreteLtiModel,
    exact_discretize,
    intersample_trajectory,
    simulate,
    upsample_inputs,
)
from .polytope import (
    Polytope,
    bounding_box,
    contains,
    contains_point,
    is_empty,
    vertices_2d,
)


# ---------------------------------------------------------------------------
# Grid oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridOracleResult:
    """Lattice fixed point: which cell centers admit a held input keeping
    their M-step trajectory inside the surviving cells."""

    resolution: float
    member_grid: np.ndarray  # boolean, one entry per lattice point
    iterations: int
    axes: tuple[np.ndarray, ...]

    @property
    def alive_count(self) -> int:
        return int(self.member_grid.sum())

    def cell_centers(self) -> np.ndarray:
        """All lattice points as an (N, n) array, C-order like member_grid."""
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "iterations": self.iterations,
            "shape": list(self.member_grid.shape),
            "axes": [a.tolist() for a in self.axes],
            "alive_count": self.alive_count,
            "member_grid": self.member_grid.astype(int).ravel().tolist(),
        }


def _input_grid(U: Polytope, samples_per_dim: int) -> np.ndarray:
    lo, hi = bounding_box(U)
    axes = [np.linspace(lo[i], hi[i], samples_per_dim) for i in range(U.dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    cand = np.stack([g.ravel() for g in grids], axis=1)
    Un = U.normalized()
    keep = np.all(cand @ Un.H.T <= Un.h + 1e-9, axis=1)
    return cand[keep]


def _coarse_to_fine_order(n: int) -> np.ndarray:
    """Permutation of range(n) whose prefixes spread evenly (bit-reversed
    index order), so sweeps over a fine grid try a coarse subgrid first."""
    bits = max(n - 1, 1).bit_length()
    rev = np.array([int(format(i, f"0{bits}b")[::-1], 2) for i in range(n)])
    return np.argsort(rev, kind="stable")


def grid_oracle_cinf(X: Polytope, U: Polytope, md: DiscreteLtiModel, M: int,
                     resolution: float, input_samples: int = 41,
                     max_iterations: int = 1000) -> GridOracleResult:
    """Backward-reachability fixed point on a lattice over X's bounding box.

    Trajectory membership is by nearest cell; inputs are gridded with
    ``input_samples`` points per input dimension. Only sensible at desk
    scale (state dimension <= 2).
    """
    if md.state_dim > 2:
        raise DimensionMismatchError("grid oracle supports state dim <= 2")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    inputs = _input_grid(U, input_samples) if input_samples >= 1 else np.zeros((0, U.dim))
    if inputs.shape[0] == 0:
        raise ResolutionTooCoarseError("input grid is empty")

    lo, hi = bounding_box(X)
    axes = tuple(
        lo[i] + resolution * np.arange(
            int(math.ceil((hi[i] - lo[i]) / resolution - 1e-9)) + 1)
        for i in range(md.state_dim))
    shape = tuple(a.size for a in axes)
    grids = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([g.ravel() for g in grids], axis=1)

    Xn = X.normalized()
    alive = np.all(centers @ Xn.H.T <= Xn.h + 1e-9, axis=1)

    A_pows, G = _hold_matrices(md, M)
    A_T = [Ak.T.copy() for Ak in A_pows]

    def cell_index(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Flat nearest-cell indices and an in-bounds mask."""
        idx = np.empty((pts.shape[0], len(axes)), dtype=np.int64)
        ok = np.ones(pts.shape[0], dtype=bool)
        for d in range(len(axes)):
            j = np.rint((pts[:, d] - lo[d]) / resolution).astype(np.int64)
            ok &= (j >= 0) & (j < shape[d])
            idx[:, d] = np.clip(j, 0, shape[d] - 1)
        flat = idx[:, 0]
        for d in range(1, len(axes)):
            flat = flat * shape[d] + idx[:, d]
        return flat, ok

    def held_ok(idx: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Which of the cells idx stay in alive cells for all M steps under u."""
        pts = centers[idx]
        ok = np.ones(idx.size, dtype=bool)
        for k in range(M):
            xk = pts @ A_T[k] + (G[k] @ u)
            flat, inb = cell_index(xk)
            ok &= inb & alive[flat]
            if not ok.any():
                break
        return ok

    # Sweeping inputs coarse-to-fine and re-trying each cell's last
    # successful input first keeps full sweeps confined to hard cells.
    sweep_order = _coarse_to_fine_order(inputs.shape[0])
    witness = np.full(centers.shape[0], -1, dtype=np.int64)

    iterations = 0
    for _ in range(max_iterations):
        alive_idx = np.flatnonzero(alive)
        if alive_idx.size == 0:
            break
        survived = np.zeros(centers.shape[0], dtype=bool)
        with_wit = alive_idx[witness[alive_idx] >= 0]
        for w in np.unique(witness[with_wit]):
            grp = with_wit[witness[with_wit] == w]
            ok = held_ok(grp, inputs[w])
            survived[grp[ok]] = True
        remaining = alive_idx[~survived[alive_idx]]
        for ui in sweep_order:
            if remaining.size == 0:
                break
            ok = held_ok(remaining, inputs[ui])
            hit = remaining[ok]
            survived[hit] = True
            witness[hit] = ui
            remaining = remaining[~ok]
        iterations += 1
        if remaining.size == 0:
            break  # every alive cell survived: fixed point
        alive = survived

    return GridOracleResult(
        resolution=resolution,
        member_grid=alive.reshape(shape),
        iterations=iterations,
        axes=axes,
    )


def oracle_agreement(oracle: GridOracleResult, P: Polytope) -> dict:
    """Compare the lattice fixed point against a polytope.

    Marked cells must lie in P within one cell diagonal; lattice points
    deeper inside P than one cell diagonal must be marked.
    """
    centers = oracle.cell_centers()
    alive = oracle.member_grid.ravel()
    Pn = P.normalized()
    margins = (centers @ Pn.H.T - Pn.h).max(axis=1)
    diag = oracle.resolution * math.sqrt(len(oracle.axes))
    marked_outside = int(np.sum(alive & (margins > diag)))
    deep = margins <= -diag
    deep_unmarked = int(np.sum(deep & ~alive))
    return {
        "cell_diagonal": diag,
        "marked_cells": int(alive.sum()),
        "marked_outside_polytope": marked_outside,
        "max_marked_margin": float(margins[alive].max()) if alive.any() else float("-inf"),
        "deep_interior_points": int(deep.sum()),
        "deep_unmarked": deep_unmarked,
        "agrees": marked_outside == 0 and deep_unmarked == 0,
    }


# ---------------------------------------------------------------------------
# Counterexample pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CounterexampleReport:
    """A coarse-plan witness whose up-sampled execution leaves the state set."""

    x0: np.ndarray
    coarse_inputs: np.ndarray
    violation_step: int | None       # first fine sample outside X
    violation_time: float | None     # first continuous time outside X
    violated_constraint: int | None  # row of X attaining the fine violation
    margin_fine: float
    margin_continuous: float
    margins_fine: np.ndarray         # per fine sample, max normalized margin
    margins_continuous: np.ndarray   # per continuous sub-sample
    fine_trajectory: np.ndarray
    continuous_times: np.ndarray
    continuous_trajectory: np.ndarray

    def to_dict(self) -> dict:
        return {
            "x0": self.x0.tolist(),
            "coarse_inputs": self.coarse_inputs.tolist(),
            "violation_step": self.violation_step,
            "violation_time": self.violation_time,
            "violated_constraint": self.violated_constraint,
            "margin_fine": self.margin_fine,
            "margin_continuous": self.margin_continuous,
            "margins_fine": self.margins_fine.tolist(),
            "margins_continuous": self.margins_continuous.tolist(),
            "fine_trajectory": self.fine_trajectory.tolist(),
            "continuous_times": self.continuous_times.tolist(),
            "continuous_trajectory": self.continuous_trajectory.tolist(),
        }


def difference_depth(x, inner: Polytope, outer: Polytope) -> float:
    """Radius of the largest ball around x inside outer but outside inner.

    Positive iff x is in outer and not in inner; margins on normalized rows.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    On = outer.normalized()
    In = inner.normalized()
    inside_outer = float((On.h - On.H @ x).min()) if On.num_rows else math.inf
    outside_inner = float((In.H @ x - In.h).max()) if In.num_rows else -math.inf
    return min(inside_outer, outside_inner)


def _coarse_plan(md: DiscreteLtiModel, X: Polytope, U: Polytope,
                 x0: np.ndarray, horizon: int) -> np.ndarray | None:
    """Inputs for the coarse model keeping coarse samples in X and
    minimizing the terminal infinity norm; None when infeasible."""
    n, m = md.state_dim, md.input_dim
    A_pows = [np.linalg.matrix_power(md.A, s) for s in range(horizon + 1)]
    nv = horizon * m + 1  # inputs stacked, then the infinity-norm bound
    rows_A: list[np.ndarray] = []
    rows_b: list[float] = []

    def input_map(s: int) -> np.ndarray:
        """x[s] = A^s x0 + Phi u_stack; returns Phi (n x horizon*m)."""
        Phi = np.zeros((n, horizon * m))
        for j in range(s):
            Phi[:, j * m:(j + 1) * m] = A_pows[s - 1 - j] @ md.B
        return Phi

    for s in range(1, horizon + 1):
        Phi = input_map(s)
        free = X.h - X.H @ (A_pows[s] @ x0)
        blk = np.hstack([X.H @ Phi, np.zeros((X.num_rows, 1))])
        rows_A.append(blk)
        rows_b.extend(free.tolist())
    for j in range(horizon):
        blk = np.zeros((U.num_rows, nv))
        blk[:, j * m:(j + 1) * m] = U.H
        rows_A.append(blk)
        rows_b.extend(U.h.tolist())
    Phi_T = input_map(horizon)
    base_T = A_pows[horizon] @ x0
    for sgn in (1.0, -1.0):
        blk = np.hstack([sgn * Phi_T, -np.ones((n, 1))])
        rows_A.append(blk)
        rows_b.extend((-sgn * base_T).tolist())

    c = np.zeros(nv)
    c[-1] = 1.0
    outcome = lp.solve(lp.LinearProgram(
        objective=c, constraint_matrix=np.vstack(rows_A),
        rhs=np.asarray(rows_b)))
    if outcome.status is not lp.LpStatus.OPTIMAL:
        return None
    return outcome.solution[:-1].reshape(horizon, m)


def find_counterexample(mc: ContinuousLtiModel, X: Polytope, U: Polytope,
                        Ts: float, M: int,
                        fine_set: Polytope, coarse_set: Polytope,
                        horizon: int = 10, num_samples: int = 400,
                        num_candidates: int = 20, substeps: int = 50,
                        rng: np.random.Generator | None = None
                        ) -> CounterexampleReport | None:
    """Witness that a coarse-model plan can violate constraints when
    executed at the base rate.

    Picks a start state deep inside coarse_set but outside fine_set,
    plans on the coarse discretization, up-samples the inputs and
    replays them on the fine discretization and the continuous model.
    Returns the first start state whose replay leaves X, or None.
    """
    if contains(fine_set, coarse_set):
        raise SetsNestedError(
            "coarse-rate invariant set is contained in the fine-rate one; "
            "no candidate start states exist")
    rng = rng or np.random.default_rng(0)
    md_coarse = exact_discretize(mc, M * Ts)
    md_fine = exact_discretize(mc, Ts)
    Xn = X.normalized()

    lo, hi = bounding_box(coarse_set)
    samples = rng.uniform(lo, hi, size=(num_samples, coarse_set.dim))
    depths = np.array([difference_depth(x, fine_set, coarse_set) for x in samples])
    order = np.argsort(-depths)
    candidates = [samples[i] for i in order[:num_candidates] if depths[i] > 0]

    for x0 in candidates:
        plan = _coarse_plan(md_coarse, X, U, x0, horizon)
        if plan is None:
            continue
        fine_inputs = upsample_inputs(plan, M)
        fine_traj = simulate(md_fine, x0, fine_inputs)
        times, cont_traj = intersample_trajectory(mc, x0, fine_inputs, Ts, substeps)
        margins_fine = (fine_traj @ Xn.H.T - Xn.h).max(axis=1)
        margins_cont = (cont_traj @ Xn.H.T - Xn.h).max(axis=1)
        viol_fine = np.flatnonzero(margins_fine > 0)
        viol_cont = np.flatnonzero(margins_cont > 0)
        if viol_fine.size == 0 and viol_cont.size == 0:
            continue
        step = int(viol_fine[0]) if viol_fine.size else None
        row = (int(np.argmax(fine_traj[step] @ Xn.H.T - Xn.h))
               if step is not None else None)
        t_viol = float(times[viol_cont[0]]) if viol_cont.size else None
        return CounterexampleReport(
            x0=np.asarray(x0, dtype=float),
            coarse_inputs=plan,
            violation_step=step,
            violation_time=t_viol,
            violated_constraint=row,
            margin_fine=float(margins_fine.max()),
            margin_continuous=float(margins_cont.max()),
            margins_fine=margins_fine,
            margins_continuous=margins_cont,
            fine_trajectory=fine_traj,
            continuous_times=times,
            continuous_trajectory=cont_traj,
        )
    return None


# ---------------------------------------------------------------------------
# Invariance validation by sampling
# ---------------------------------------------------------------------------

@dataclass
class InvarianceReport:
    points_checked: int = 0
    certificate_failures: list = field(default_factory=list)
    disturbance_draws: int = 0
    disturbance_violations: int = 0
    notes: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return not self.certificate_failures and self.disturbance_violations == 0

    def to_dict(self) -> dict:
        return {
            "points_checked": self.points_checked,
            "certificate_failures": [np.asarray(x).tolist()
                                     for x in self.certificate_failures],
            "disturbance_draws": self.disturbance_draws,
            "disturbance_violations": self.disturbance_violations,
            "all_passed": self.all_passed,
            "notes": list(self.notes),
        }


def _sample_in(P: Polytope, count: int, rng: np.random.Generator,
               max_tries: int = 200) -> np.ndarray:
    """Rejection-sample points of P from its bounding box."""
    lo, hi = bounding_box(P)
    Pn = P.normalized()
    hits: list[np.ndarray] = []
    for _ in range(max_tries):
        if len(hits) >= count:
            break
        batch = rng.uniform(lo, hi, size=(max(count, 32), P.dim))
        ok = np.all(batch @ Pn.H.T <= Pn.h + 1e-12, axis=1)
        hits.extend(batch[ok])
    return np.asarray(hits[:count]) if hits else np.zeros((0, P.dim))


def _sample_schedule_set(Wk: Polytope, count: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Disturbance draws: bounding-box corners (worst case for boxes)
    plus uniform rejection samples."""
    lo, hi = bounding_box(Wk)
    corners_1d = [np.array([lo[d], hi[d]]) for d in range(Wk.dim)]
    mesh = np.meshgrid(*corners_1d, indexing="ij")
    corners = np.stack([g.ravel() for g in mesh], axis=1)
    Wn = Wk.normalized()
    corners = corners[np.all(corners @ Wn.H.T <= Wn.h + 1e-9, axis=1)]
    rest = _sample_in(Wk, max(count - corners.shape[0], 0), rng)
    if rest.size == 0:
        return corners
    return np.vstack([corners, rest])


def validate_invariance(target: Polytope, X: Polytope, U: Polytope,
                        md: DiscreteLtiModel, M: int,
                        W: DisturbanceSchedule | None = None,
                        samples: int = 200,
                        disturbance_draws: int = 500,
                        rng: np.random.Generator | None = None
                        ) -> InvarianceReport:
    """Sample-based certificate check of (robust) hold invariance.

    Every boundary vertex and interior sample of the target must admit a
    held input keeping its predictions in the target; in the robust case
    the predictions survive disturbance draws from each schedule set.
    """
    rng = rng or np.random.default_rng(0)
    report = InvarianceReport()
    if is_empty(target):
        report.notes.append("empty set: nothing to validate")
        return report
    points: list[np.ndarray] = []
    if target.dim <= 2:
        points.extend(vertices_2d(target))
    points.extend(_sample_in(target, samples, rng))
    A_pows, G = _hold_matrices(md, M)
    tn = target.normalized()
    draws_per_step = (
        [_sample_schedule_set(W.sets[k], disturbance_draws, rng)
         for k in range(M)] if W is not None else None)
    for x in points:
        u = feasible_hold_input(x, target, U, md, M, W)
        report.points_checked += 1
        if u is None:
            report.certificate_failures.append(np.asarray(x))
            continue
        if draws_per_step is not None:
            for k in range(M):
                pred = A_pows[k] @ x + G[k] @ u
                draws = draws_per_step[k]
                report.disturbance_draws += draws.shape[0]
                bad = np.any((pred + draws) @ tn.H.T > tn.h + 1e-7, axis=1)
                report.disturbance_violations += int(bad.sum())
    return report


# ---------------------------------------------------------------------------
# True-dynamics check for the sine-drift example
# ---------------------------------------------------------------------------

@dataclass
class TruthCheckReport:
    epochs: int = 0
    constraint_violations: int = 0
    set_exit_events: int = 0
    infeasible_events: int = 0
    min_state_margin: float = math.inf   # min over time of 1 - |x_r|
    worst_exit_margin: float = 0.0       # largest distance outside the set

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "constraint_violations": self.constraint_violations,
            "set_exit_events": self.set_exit_events,
            "infeasible_events": self.infeasible_events,
            "min_state_margin": self.min_state_margin,
            "worst_exit_margin": self.worst_exit_margin,
        }


def _rk4_sine(x: float, u: float, dt: float, steps: int) -> np.ndarray:
    """Fixed-step RK4 for dx/dt = sin(x) + u; returns all steps+1 states."""
    out = np.empty(steps + 1)
    out[0] = x
    for i in range(steps):
        k1 = math.sin(x) + u
        k2 = math.sin(x + 0.5 * dt * k1) + u
        k3 = math.sin(x + 0.5 * dt * k2) + u
        k4 = math.sin(x + dt * k3) + u
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = x
    return out


def sine_truth_check(Ts: float, M: int, rc_set: Polytope, trials: int = 100,
                     substeps_per_sample: int = 100, tighten: bool = True,
                     rng: np.random.Generator | None = None
                     ) -> TruthCheckReport:
    """Drive the true dx/dt = sin(x) + u with held inputs certified
    against rc_set, re-measuring every M base periods.

    Certificates come from the exactly discretized linearization; with
    ``tighten=False`` they ignore the error schedule (the unsafe nominal
    policy), which lets the report demonstrate why tightening matters.
    """
    if rc_set.dim != 1:
        raise DimensionMismatchError("sine truth check is one-dimensional")
    rng = rng or np.random.default_rng(0)
    report = TruthCheckReport()
    if is_empty(rc_set):
        report.infeasible_events = trials
        return report
    mc = ContinuousLtiModel(np.array([[1.0]]), np.array([[1.0]]))
    md = exact_discretize(mc, Ts)
    U = Polytope.from_box([-1.0], [1.0])
    W = sine_example_schedule(Ts, M) if tighten else None
    dt = Ts / substeps_per_sample

    def fresh_start() -> float:
        pt = _sample_in(rc_set, 1, rng)
        return float(pt[0, 0]) if pt.size else 0.0

    x_r = fresh_start()
    for _ in range(trials):
        report.epochs += 1
        u = feasible_hold_input(np.array([x_r]), rc_set, U, md, M, W)
        if u is None:
            report.infeasible_events += 1
            x_r = fresh_start()
            continue
        traj = _rk4_sine(x_r, float(u[0]), dt, M * substeps_per_sample)
        margin = float((1.0 - np.abs(traj)).min())
        report.min_state_margin = min(report.min_state_margin, margin)
        if margin < -1e-9:
            report.constraint_violations += int(np.sum(np.abs(traj) > 1 + 1e-9))
        x_r = float(traj[-1])
        if not contains_point(rc_set, [x_r], tol=1e-9):
            report.set_exit_events += 1
            rcn = rc_set.normalized()
            exit_margin = float((rcn.H @ np.array([x_r]) - rcn.h).max())
            report.worst_exit_margin = max(report.worst_exit_margin, exit_margin)
            x_r = fresh_start()
    return report
