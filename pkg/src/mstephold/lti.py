"""Continuous and discrete LTI models, discretization and simulation.

Exact discretization uses the matrix exponential of the augmented block
matrix [[Ac, Bc], [0, 0]] scaled by the sampling time, so that discrete
samples coincide with the continuous zero-order-hold trajectory. The
exponential itself is scipy's scaling-and-squaring Pade implementation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DimensionMismatchError

METHODS = ("exact", "euler", "literal")


@dataclass(frozen=True)
class ContinuousLtiModel:
    """dx/dt = Ac x + Bc u."""

    Ac: np.ndarray
    Bc: np.ndarray

    def __post_init__(self):
        Ac = np.atleast_2d(np.asarray(self.Ac, dtype=float))
        Bc = np.asarray(self.Bc, dtype=float)
        if Bc.ndim == 1:
            Bc = Bc.reshape(-1, 1)
        if Ac.shape[0] != Ac.shape[1]:
            raise DimensionMismatchError("Ac must be square")
        if Bc.shape[0] != Ac.shape[0]:
            raise DimensionMismatchError("Bc rows must match Ac")
        if not (np.isfinite(Ac).all() and np.isfinite(Bc).all()):
            raise ValueError("model matrices must be finite")
        object.__setattr__(self, "Ac", Ac)
        object.__setattr__(self, "Bc", Bc)

    @property
    def state_dim(self) -> int:
        return self.Ac.shape[0]

    @property
    def input_dim(self) -> int:
        return self.Bc.shape[1]

    def to_dict(self) -> dict:
        return {"Ac": self.Ac.tolist(), "Bc": self.Bc.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ContinuousLtiModel":
        return cls(np.asarray(data["Ac"], dtype=float),
                   np.asarray(data["Bc"], dtype=float))


@dataclass(frozen=True)
class DiscreteLtiModel:
    """x[k+1] = A x[k] + B u[k] (+ w[k]) at sampling time Ts."""

    A: np.ndarray
    B: np.ndarray
    Ts: float
    method: str = "literal"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatchError("A must be square")
        if B.shape[0] != A.shape[0]:
            raise DimensionMismatchError("B rows must match A")
        if not self.Ts >= 0:
            raise ValueError(f"Ts must be nonnegative, got {self.Ts}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Ts", float(self.Ts))

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def input_dim(self) -> int:
        return self.B.shape[1]

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(),
                "Ts": self.Ts, "method": self.method}

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteLtiModel":
        return cls(np.asarray(data["A"], dtype=float),
                   np.asarray(data["B"], dtype=float),
                   float(data["Ts"]),
                   data.get("method", "literal"))


def exact_discretize(mc: ContinuousLtiModel, Ts: float) -> DiscreteLtiModel:
    """Zero-order-hold discretization: A = exp(Ac Ts), B = int_0^Ts exp(Ac s) ds Bc."""
    if not Ts > 0:
        raise ValueError(f"Ts must be positive, got {Ts}")
    n, m = mc.state_dim, mc.input_dim
    block = np.zeros((n + m, n + m))
    block[:n, :n] = mc.Ac
    block[:n, n:] = mc.Bc
    E = expm(block * Ts)
    return DiscreteLtiModel(E[:n, :n], E[:n, n:], Ts, method="exact")


def euler_discretize(mc: ContinuousLtiModel, Ts: float) -> DiscreteLtiModel:
    """Forward Euler: A = I + Ac Ts, B = Bc Ts."""
    if Ts < 0:
        raise ValueError(f"Ts must be nonnegative, got {Ts}")
    n = mc.state_dim
    return DiscreteLtiModel(np.eye(n) + mc.Ac * Ts, mc.Bc * Ts, Ts, method="euler")


def simulate(md: DiscreteLtiModel, x0, inputs, disturbances=None) -> np.ndarray:
    """Run the affine recursion; returns the (N+1, n) state trajectory."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (md.state_dim,):
        raise DimensionMismatchError(
            f"x0 has shape {x0.shape}, expected ({md.state_dim},)")
    U = np.asarray(inputs, dtype=float)
    if U.ndim == 1:
        U = U.reshape(-1, md.input_dim) if md.input_dim == 1 else U.reshape(1, -1)
    if U.size and U.shape[1] != md.input_dim:
        raise DimensionMismatchError(
            f"inputs have {U.shape[1]} columns, expected {md.input_dim}")
    N = U.shape[0]
    if disturbances is not None:
        W = np.asarray(disturbances, dtype=float)
        if W.ndim == 1:
            W = W.reshape(-1, md.state_dim) if md.state_dim == 1 else W.reshape(1, -1)
        if W.shape != (N, md.state_dim):
            raise DimensionMismatchError(
                f"disturbances have shape {W.shape}, expected ({N}, {md.state_dim})")
    else:
        W = None
    traj = np.empty((N + 1, md.state_dim))
    traj[0] = x0
    for k in range(N):
        traj[k + 1] = md.A @ traj[k] + md.B @ U[k]
        if W is not None:
            traj[k + 1] += W[k]
    return traj


def upsample_inputs(inputs, M: int) -> np.ndarray:
    """Repeat each input M times: the hold realization of a coarse plan."""
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    U = np.asarray(inputs, dtype=float)
    if U.size == 0:
        return U.reshape(0, U.shape[1] if U.ndim == 2 else 1)
    if U.ndim == 1:
        U = U.reshape(-1, 1)
    return np.repeat(U, M, axis=0)


def intersample_trajectory(mc: ContinuousLtiModel, x0, zoh_inputs,
                           Ts: float, substeps: int = 50
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-model states under zero-order hold, sampled densely.

    Each of the N hold intervals of length Ts is subdivided into
    ``substeps`` exact sub-samples. Returns (times, states) with
    N*substeps + 1 entries; interval endpoints coincide with the coarse
    samples of exact_discretize(mc, Ts) to machine precision.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    sub = exact_discretize(mc, Ts / substeps)
    U = np.asarray(zoh_inputs, dtype=float)
    if U.ndim == 1:
        U = U.reshape(-1, 1)
    N = U.shape[0]
    times = np.empty(N * substeps + 1)
    states = np.empty((N * substeps + 1, mc.state_dim))
    times[0] = 0.0
    states[0] = np.atleast_1d(np.asarray(x0, dtype=float))
    idx = 1
    for k in range(N):
        for s in range(substeps):
            states[idx] = sub.A @ states[idx - 1] + sub.B @ U[k]
            times[idx] = k * Ts + (s + 1) * (Ts / substeps)
            idx += 1
    return times, states
