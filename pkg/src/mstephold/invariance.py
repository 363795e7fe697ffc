"""M-step hold precursor sets and the fixed-point iterations.

The precursor of a target set S under an M-step hold is the set of
states from which a single admissible input, held for M base periods,
keeps all of the next M states inside S. For LTI dynamics it is the
projection onto state space of one stacked linear system over (x, u):

    block k (k = 1..M):   [ H A^k | H G_k ] (x; u) <= h,   G_k = A G_{k-1} + B
    input block:          [   0   |  H_u  ] (x; u) <= h_u

with G_1 = B. The robust variant keeps the same left-hand side and
tightens the right-hand side of prediction block k+1 row-wise by the
support of the disturbance bound W[k] (k = 0..M-1):

    h_j -> h_j - max_{w in W[k]} H_j . w

W[k] is read as the cumulative deviation bound k+1 steps after the last
measurement; earlier disturbances are not additionally propagated
through powers of A. The maximal invariant sets are the fixed points of

    Omega_0 = X,   Omega_{i+1} = Pre^M(Omega_i) cap Omega_i

iterated until two consecutive iterates are set-equal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .disturbance import DisturbanceSchedule
from .errors import DimensionMismatchError
from .lti import DiscreteLtiModel
from .polytope import (
    Polytope,
    intersect,
    is_canonical_empty,
    is_empty,
    project_out_last,
    remove_redundant,
    set_equal,
)


@dataclass(frozen=True)
class FixedPointOptions:
    """Termination controls for the invariant-set iterations."""

    tolerance: float = 1e-8
    max_iterations: int = 200


@dataclass(frozen=True)
class LiftedConstraintSystem:
    """Stacked (x, u) constraints whose projection is Pre^M."""

    H_hat: np.ndarray
    h_hat: np.ndarray
    M: int
    block_rows: tuple[tuple[int, int], ...]  # M prediction blocks, then input block

    def as_polytope(self) -> Polytope:
        return Polytope(self.H_hat, self.h_hat)


@dataclass(frozen=True)
class InvariantSetResult:
    """Converged set plus the full iterate sequence and metadata."""

    final_set: Polytope
    iterates: tuple[Polytope, ...]
    M: int
    converged: bool
    iterations: int
    tolerance: float
    robust: bool

    def to_dict(self) -> dict:
        return {
            "final_set": self.final_set.to_dict(),
            "iterates": [P.to_dict() for P in self.iterates],
            "M": self.M,
            "converged": self.converged,
            "iterations": self.iterations,
            "tolerance": self.tolerance,
            "robust": self.robust,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InvariantSetResult":
        return cls(
            final_set=Polytope.from_dict(data["final_set"]),
            iterates=tuple(Polytope.from_dict(d) for d in data["iterates"]),
            M=int(data["M"]),
            converged=bool(data["converged"]),
            iterations=int(data["iterations"]),
            tolerance=float(data["tolerance"]),
            robust=bool(data["robust"]),
        )


def _hold_matrices(md: DiscreteLtiModel, M: int
                   ) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """A^k and G_k = sum_{n=1..k} A^{k-n} B for k = 1..M."""
    A_pows = [md.A]
    G = [md.B]
    for _ in range(1, M):
        A_pows.append(md.A @ A_pows[-1])
        G.append(md.A @ G[-1] + md.B)
    return A_pows, G


def _check_spaces(S: Polytope, U: Polytope, md: DiscreteLtiModel, M: int):
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    if S.dim != md.state_dim:
        raise DimensionMismatchError(
            f"target set dim {S.dim} != state dim {md.state_dim}")
    if U.dim != md.input_dim:
        raise DimensionMismatchError(
            f"input set dim {U.dim} != input dim {md.input_dim}")


def build_lifted(S: Polytope, U: Polytope, md: DiscreteLtiModel, M: int
                 ) -> LiftedConstraintSystem:
    """Stacked constraint system over (x, u) for Pre^M(S)."""
    _check_spaces(S, U, md, M)
    n, m = md.state_dim, md.input_dim
    A_pows, G = _hold_matrices(md, M)
    rows_H = []
    rows_h = []
    block_rows = []
    start = 0
    for k in range(M):
        blk = np.hstack([S.H @ A_pows[k], S.H @ G[k]])
        rows_H.append(blk)
        rows_h.append(S.h)
        block_rows.append((start, start + blk.shape[0]))
        start += blk.shape[0]
    input_blk = np.hstack([np.zeros((U.num_rows, n)), U.H])
    rows_H.append(input_blk)
    rows_h.append(U.h)
    block_rows.append((start, start + U.num_rows))
    return LiftedConstraintSystem(
        H_hat=np.vstack(rows_H),
        h_hat=np.concatenate(rows_h),
        M=M,
        block_rows=tuple(block_rows),
    )


def pre_m(S: Polytope, U: Polytope, md: DiscreteLtiModel, M: int) -> Polytope:
    """States from which one held input keeps the next M states in S.

    The initial state itself is unconstrained; callers intersect with
    the admissible region as needed.
    """
    _check_spaces(S, U, md, M)
    if is_canonical_empty(S):
        return Polytope.empty(md.state_dim)
    lifted = build_lifted(S, U, md, M)
    # Pruning the lifted system first keeps the Fourier-Motzkin pairings small.
    reduced = remove_redundant(lifted.as_polytope())
    if is_canonical_empty(reduced):
        return Polytope.empty(md.state_dim)
    return project_out_last(reduced, md.input_dim)


def _schedule_supports(W: DisturbanceSchedule) -> list:
    """One support evaluator per schedule set.

    Bounded low-dimensional sets are handled by their vertex set (the
    support of a polytope is attained at a vertex, so a single matrix
    product covers every query); anything else falls back to one LP per
    direction.
    """
    from .polytope import vertices_2d  # local import: avoids cycle at module load

    evaluators = []
    for Wk in W.sets:
        verts = None
        if Wk.dim <= 2:
            try:
                verts = vertices_2d(Wk)
            except Exception:
                verts = None
        if verts is not None:
            evaluators.append(lambda D, V=verts: (D @ V.T).max(axis=1))
        else:
            evaluators.append(
                lambda D, Wk=Wk: np.array(
                    [lp.support_value(Wk.H, Wk.h, d) for d in D]))
    return evaluators


def _tightened_rhs(S: Polytope, W: DisturbanceSchedule, M: int,
                   supports: list | None = None) -> list[np.ndarray]:
    """Per-block tightened copies of S.h: block k+1 uses W[k]."""
    if supports is None:
        supports = _schedule_supports(W)
    return [S.h - supports[k](S.H) for k in range(M)]


def pre_m_robust(S: Polytope, U: Polytope, md: DiscreteLtiModel, M: int,
                 W: DisturbanceSchedule,
                 _supports: list | None = None) -> Polytope:
    """Robust precursor: every prediction block's rhs is tightened by the
    support of its disturbance bound. Returns the canonical empty
    polytope when tightening leaves nothing."""
    _check_spaces(S, U, md, M)
    if W.M != M:
        raise DimensionMismatchError(
            f"schedule has {W.M} sets, hold length is {M}")
    if W.dim != md.state_dim:
        raise DimensionMismatchError(
            f"schedule dim {W.dim} != state dim {md.state_dim}")
    if is_canonical_empty(S):
        return Polytope.empty(md.state_dim)
    lifted = build_lifted(S, U, md, M)
    h_hat = lifted.h_hat.copy()
    tightened = _tightened_rhs(S, W, M, _supports)
    for k in range(M):
        lo, hi = lifted.block_rows[k]
        h_hat[lo:hi] = tightened[k]
    P = remove_redundant(Polytope(lifted.H_hat, h_hat))
    if is_canonical_empty(P):
        return Polytope.empty(md.state_dim)
    # A nonempty lifted set projects to a nonempty set.
    return project_out_last(P, md.input_dim)


def _fixed_point(X: Polytope, step, M: int, opts: FixedPointOptions,
                 robust: bool) -> InvariantSetResult:
    omega = remove_redundant(X)
    iterates = [omega]
    converged = False
    for _ in range(opts.max_iterations):
        nxt = remove_redundant(intersect(step(omega), omega))
        iterates.append(nxt)
        if set_equal(nxt, omega, opts.tolerance):
            converged = True
            break
        omega = nxt
    return InvariantSetResult(
        final_set=iterates[-1],
        iterates=tuple(iterates),
        M=M,
        converged=converged,
        iterations=len(iterates) - 1,
        tolerance=opts.tolerance,
        robust=robust,
    )


def compute_cinf(X: Polytope, U: Polytope, md: DiscreteLtiModel, M: int,
                 opts: FixedPointOptions | None = None) -> InvariantSetResult:
    """Maximal M-step hold control invariant subset of X.

    Non-convergence within max_iterations is reported via
    converged=False with all iterates retained, never raised.
    """
    opts = opts or FixedPointOptions()
    _check_spaces(X, U, md, M)
    return _fixed_point(
        X, lambda S: pre_m(S, U, md, M), M, opts, robust=False)


def compute_rcinf(X: Polytope, U: Polytope, md: DiscreteLtiModel, M: int,
                  W: DisturbanceSchedule,
                  opts: FixedPointOptions | None = None) -> InvariantSetResult:
    """Robust counterpart of compute_cinf; an empty converged set is a
    legitimate outcome for oversized disturbance bounds."""
    opts = opts or FixedPointOptions()
    _check_spaces(X, U, md, M)
    supports = _schedule_supports(W)
    return _fixed_point(
        X, lambda S: pre_m_robust(S, U, md, M, W, _supports=supports),
        M, opts, robust=True)


def feasible_hold_input(x, target: Polytope, U: Polytope,
                        md: DiscreteLtiModel, M: int,
                        W: DisturbanceSchedule | None = None
                        ) -> np.ndarray | None:
    """One admissible input whose M-step hold keeps x[1..M] in the target
    (robustly when a schedule is given), or None when no such input
    exists. The current state x itself is not required to be in the
    target."""
    _check_spaces(target, U, md, M)
    if W is not None and W.M != M:
        raise DimensionMismatchError(
            f"schedule has {W.M} sets, hold length is {M}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (md.state_dim,):
        raise DimensionMismatchError(
            f"x has shape {x.shape}, expected ({md.state_dim},)")
    if is_empty(target):
        return None
    A_pows, G = _hold_matrices(md, M)
    if W is not None:
        rhs_blocks = _tightened_rhs(target, W, M, None)
    else:
        rhs_blocks = [target.h] * M
    rows_A = [target.H @ G[k] for k in range(M)]
    rows_b = [rhs_blocks[k] - target.H @ (A_pows[k] @ x) for k in range(M)]
    rows_A.append(U.H)
    rows_b.append(U.h)
    return lp.feasible_point(np.vstack(rows_A), np.concatenate(rows_b))
