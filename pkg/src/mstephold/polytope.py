"""H-representation polytope kernel.

A polytope is the solution set of ``H x <= h``. All operations work on
this representation directly: intersection is row concatenation,
projection is Fourier-Motzkin elimination, and containment, emptiness
and redundancy reduce to support-function LPs.

The empty set is representable: the canonical form is the single row
``0 . x <= -1``. It flows through every operation, so fixed-point
iterations that legitimately converge to the empty set need no special
casing by callers.

Tolerances are interpreted on unit-normalized rows, which makes them
scale-free; operations normalize internally and never mutate their
inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import lp
from .errors import (
    DimensionMismatchError,
    EmptySetError,
    UnboundedDirectionError,
    UnboundedSetError,
    WrongDimensionError,
)

# Default tolerances (on unit-normalized rows).
CONTAIN_TOL = 1e-8
REDUNDANCY_TOL = 1e-9
ZERO_ROW_TOL = 1e-11
VERTEX_MERGE_TOL = 1e-8


@dataclass(frozen=True)
class Polytope:
    """Convex set {x : H x <= h} with H of shape (m, n) and h of length m."""

    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if H.ndim == 1:
            H = H.reshape(-1, 1) if H.size else H.reshape(0, 1)
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if H.ndim != 2:
            raise DimensionMismatchError("H must be a 2-D matrix")
        if h.shape != (H.shape[0],):
            raise DimensionMismatchError(
                f"h has length {h.shape[0]}, H has {H.shape[0]} rows")
        if not (np.isfinite(H).all() and np.isfinite(h).all()):
            raise ValueError("polytope data must be finite")
        H.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return self.H.shape[1]

    @property
    def num_rows(self) -> int:
        return self.H.shape[0]

    @classmethod
    def from_box(cls, lo, hi) -> "Polytope":
        """Axis-aligned box {x : lo <= x <= hi}."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape:
            raise DimensionMismatchError("lo and hi must have equal length")
        n = lo.size
        H = np.vstack([np.eye(n), -np.eye(n)])
        h = np.concatenate([hi, -lo])
        return cls(H, h)

    @classmethod
    def empty(cls, dim: int) -> "Polytope":
        """Canonical empty set in the given ambient dimension."""
        return cls(np.zeros((1, dim)), np.array([-1.0]))

    @classmethod
    def full(cls, dim: int) -> "Polytope":
        """All of R^dim (no constraints)."""
        return cls(np.zeros((0, dim)), np.zeros(0))

    def normalized(self) -> "Polytope":
        """Scale every nonzero row to unit Euclidean norm."""
        if self.num_rows == 0:
            return self
        norms = np.linalg.norm(self.H, axis=1)
        scale = np.where(norms > ZERO_ROW_TOL, norms, 1.0)
        return Polytope(self.H / scale[:, None], self.h / scale)

    def to_dict(self) -> dict:
        return {"H": self.H.tolist(), "h": self.h.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Polytope":
        if "box" in data:
            return cls.from_box(data["box"]["lo"], data["box"]["hi"])
        return cls(np.asarray(data["H"], dtype=float),
                   np.asarray(data["h"], dtype=float))

    def __repr__(self):
        return f"Polytope(dim={self.dim}, rows={self.num_rows})"


def is_canonical_empty(P: Polytope) -> bool:
    """True iff P is the canonical empty form 0.x <= -1 (no LP solved)."""
    return (P.num_rows == 1
            and np.linalg.norm(P.H[0]) <= ZERO_ROW_TOL
            and P.h[0] < -ZERO_ROW_TOL)


def intersect(P: Polytope, Q: Polytope) -> Polytope:
    """P cap Q by constraint concatenation."""
    if P.dim != Q.dim:
        raise DimensionMismatchError(
            f"cannot intersect dim {P.dim} with dim {Q.dim}")
    return Polytope(np.vstack([P.H, Q.H]), np.concatenate([P.h, Q.h]))


def is_empty(P: Polytope) -> bool:
    """LP feasibility of H x <= h."""
    if P.num_rows == 0:
        return False
    norms = np.linalg.norm(P.H, axis=1)
    zero = norms <= ZERO_ROW_TOL
    if np.any(P.h[zero] < -ZERO_ROW_TOL):
        return True
    return lp.feasible_point(P.H, P.h) is None


def support(P: Polytope, direction) -> float:
    """max direction . x over P (see lp.support_value)."""
    return lp.support_value(P.H, P.h, direction)


def contains_point(P: Polytope, x, tol: float = CONTAIN_TOL) -> bool:
    """Membership of a single point, tolerance on normalized rows."""
    Pn = P.normalized()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return bool(np.all(Pn.H @ x <= Pn.h + tol))


def bounding_box(P: Polytope) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise (lo, hi) bounds; raises on empty or unbounded P."""
    n = P.dim
    lo = np.empty(n)
    hi = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        try:
            hi[i] = support(P, e)
            lo[i] = -support(P, -e)
        except UnboundedDirectionError as exc:
            raise UnboundedSetError(f"unbounded along axis {i}") from exc
    return lo, hi


def chebyshev_center(P: Polytope) -> tuple[np.ndarray, float]:
    """Center and radius of the largest inscribed ball.

    Raises EmptySetError on empty input, UnboundedSetError when the
    radius is unbounded.
    """
    n = P.dim
    norms = np.linalg.norm(P.H, axis=1) if P.num_rows else np.zeros(0)
    A = np.hstack([P.H, norms[:, None]])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    bounds = [(None, None)] * n + [(0.0, None)]
    outcome = lp.solve(lp.LinearProgram(
        objective=c, constraint_matrix=A, rhs=P.h, bounds=bounds))
    if outcome.status is lp.LpStatus.INFEASIBLE:
        raise EmptySetError("chebyshev center of an empty set")
    if outcome.status is lp.LpStatus.UNBOUNDED:
        raise UnboundedSetError("chebyshev radius is unbounded")
    sol = outcome.solution
    return sol[:n].copy(), float(sol[n])


def _drop_trivial_rows(P: Polytope) -> Polytope | None:
    """Remove 0.x <= h rows with h >= 0; return None if a 0.x <= h row
    with h < 0 proves emptiness."""
    if P.num_rows == 0:
        return P
    norms = np.linalg.norm(P.H, axis=1)
    zero = norms <= ZERO_ROW_TOL
    if np.any(P.h[zero] < -ZERO_ROW_TOL):
        return None
    keep = ~zero
    return Polytope(P.H[keep], P.h[keep])


def _dedupe_rows(H: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Group unit rows with (nearly) identical normals, keep the tightest rhs."""
    if H.shape[0] <= 1:
        return H, h
    key = np.round(H, 9)
    order = np.lexsort((h,) + tuple(key[:, ::-1].T))
    K = key[order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = np.any(K[1:] != K[:-1], axis=1)
    keep = np.sort(order[first])
    return H[keep], h[keep]


def _irredundant_lp(H: np.ndarray, h: np.ndarray, tol: float) -> np.ndarray:
    """Boolean keep-mask via one LP per row: row i is dropped when the
    remaining rows already force H_i x <= h_i + tol."""
    m = H.shape[0]
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        others = keep.copy()
        others[i] = False
        if not others.any():
            continue
        try:
            val = lp.support_value(H[others], h[others], H[i])
        except UnboundedDirectionError:
            continue
        if val <= h[i] + tol:
            keep[i] = False
    return keep


def _irredundant_dual_hull(H: np.ndarray, h: np.ndarray, center: np.ndarray
                           ) -> tuple[np.ndarray, bool] | None:
    """Keep-mask via polar duality about a strictly interior point.

    Scaling each row to H_i . (x - c) <= s_i with s_i > 0, a row whose
    dual point H_i / s_i is a convex combination of the others is implied
    by them, so dropping hull non-vertices never changes the set. When
    the origin lies strictly inside the dual hull the set is bounded and
    the vertex rows are exactly the irredundant ones (flag True);
    otherwise a few redundant rows may survive (flag False). Returns
    None when the dual construction is unavailable.
    """
    slack = h - H @ center
    if np.any(slack <= 1e-10):
        return None
    D = H / slack[:, None]
    if D.shape[0] <= D.shape[1] + 1:
        return None
    try:
        hull = ConvexHull(D)
    except QhullError:
        return None
    keep = np.zeros(D.shape[0], dtype=bool)
    keep[hull.vertices] = True
    exact = bool(np.all(hull.equations[:, -1] < -1e-12))
    return keep, exact


def _remove_redundant_1d(H: np.ndarray, h: np.ndarray
                         ) -> tuple[np.ndarray, np.ndarray] | None:
    """Closed form for unit-normalized 1-D rows; None when infeasible."""
    lo = -np.inf
    hi = np.inf
    for i in range(H.shape[0]):
        if H[i, 0] > 0:
            hi = min(hi, h[i] / H[i, 0])
        else:
            lo = max(lo, -h[i] / (-H[i, 0]))
    if lo > hi:
        return None
    rows_H = []
    rows_h = []
    if np.isfinite(hi):
        rows_H.append([1.0])
        rows_h.append(hi)
    if np.isfinite(lo):
        rows_H.append([-1.0])
        rows_h.append(-lo)
    return np.asarray(rows_H, dtype=float).reshape(-1, 1), np.asarray(rows_h)


def remove_redundant(P: Polytope, tol: float = REDUNDANCY_TOL) -> Polytope:
    """Semantically equal polytope whose retained rows are all irredundant.

    Rows are unit-normalized first. Empty input collapses to the
    canonical empty form. For full-dimensional sets a polar-dual convex
    hull identifies the irredundant rows in one shot (this is what keeps
    Fourier-Motzkin blowup under control); degenerate or flat cases fall
    back to one LP per row.
    """
    Pn = _drop_trivial_rows(P.normalized())
    if Pn is None:
        return Polytope.empty(P.dim)
    if Pn.num_rows == 0:
        return Pn
    H, h = _dedupe_rows(Pn.H, Pn.h)
    if P.dim == 1:
        result = _remove_redundant_1d(H, h)
        if result is None:
            return Polytope.empty(1)
        return Polytope(*result)
    if H.shape[0] <= 1:
        return Polytope(H, h)
    try:
        center, radius = chebyshev_center(Polytope(H, h))
    except EmptySetError:
        return Polytope.empty(P.dim)
    except UnboundedSetError:
        center, radius = None, 0.0
    keep = None
    if center is not None and radius > 1e-9 and H.shape[0] > P.dim + 2:
        hull_result = _irredundant_dual_hull(H, h, center)
        if hull_result is not None:
            mask, exact = hull_result
            if exact:
                keep = mask
            else:
                # Unbounded set: hull drops are sound but may leave a few
                # redundant rows; certify the small survivor set by LP.
                idx = np.flatnonzero(mask)
                sub = _irredundant_lp(H[idx], h[idx], tol)
                keep = np.zeros(H.shape[0], dtype=bool)
                keep[idx[sub]] = True
    if keep is None:
        # Chebyshev already certified feasibility (both outcomes above
        # imply a nonempty set), so the LP sweep runs unconditionally.
        keep = _irredundant_lp(H, h, tol)
    return Polytope(H[keep], h[keep])


def contains(P: Polytope, Q: Polytope, tol: float = CONTAIN_TOL) -> bool:
    """True iff Q is a subset of P: every row of P holds over Q within tol.

    The empty set is contained in everything. Raises
    UnboundedDirectionError if Q is unbounded along some row normal of P
    (the query is then ill-posed, not false).
    """
    if P.dim != Q.dim:
        raise DimensionMismatchError(
            f"cannot compare dim {P.dim} with dim {Q.dim}")
    if is_empty(Q):
        return True
    Pn = P.normalized()
    for i in range(Pn.num_rows):
        row = Pn.H[i]
        if np.linalg.norm(row) <= ZERO_ROW_TOL:
            if Pn.h[i] >= -tol:
                continue
            return False
        if support(Q, row) > Pn.h[i] + tol:
            return False
    return True


def set_equal(P: Polytope, Q: Polytope, tol: float = CONTAIN_TOL) -> bool:
    """Mutual containment at the given tolerance."""
    return contains(P, Q, tol) and contains(Q, P, tol)


def _eliminate_one(H: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fourier-Motzkin elimination of the last column."""
    col = H[:, -1]
    rest = H[:, :-1]
    pos = col > ZERO_ROW_TOL
    neg = col < -ZERO_ROW_TOL
    zero = ~(pos | neg)
    blocks_H = [rest[zero]]
    blocks_h = [h[zero]]
    if pos.any() and neg.any():
        Hp = rest[pos] / col[pos, None]
        hp = h[pos] / col[pos]
        Hn = rest[neg] / (-col[neg, None])
        hn = h[neg] / (-col[neg])
        comb_H = (Hp[:, None, :] + Hn[None, :, :]).reshape(-1, rest.shape[1])
        comb_h = (hp[:, None] + hn[None, :]).reshape(-1)
        blocks_H.append(comb_H)
        blocks_h.append(comb_h)
    return np.vstack(blocks_H), np.concatenate(blocks_h)


def project_out_last(P: Polytope, k: int) -> Polytope:
    """Exact orthogonal projection onto the first dim - k coordinates.

    One Fourier-Motzkin pass per eliminated variable, with redundancy
    removal after each pass.
    """
    if not 0 <= k < P.dim:
        raise DimensionMismatchError(
            f"cannot eliminate {k} of {P.dim} coordinates")
    current = P
    for _ in range(k):
        H, h = _eliminate_one(current.H, current.h)
        current = remove_redundant(Polytope(H, h))
        if is_canonical_empty(current):
            return Polytope.empty(P.dim - k)
    return current


def vertices_2d(P: Polytope) -> np.ndarray:
    """Vertices of a 1-D or 2-D polytope, counterclockwise for 2-D.

    Returns an array of shape (k, dim). Consecutive duplicates within
    VERTEX_MERGE_TOL are merged. Raises EmptySetError, UnboundedSetError
    or WrongDimensionError as applicable.
    """
    if P.dim not in (1, 2):
        raise WrongDimensionError(f"vertex enumeration needs dim 1 or 2, got {P.dim}")
    if is_empty(P):
        raise EmptySetError("vertex enumeration of an empty set")
    if P.dim == 1:
        try:
            hi = support(P, [1.0])
            lo = -support(P, [-1.0])
        except UnboundedDirectionError as exc:
            raise UnboundedSetError("1-D set is unbounded") from exc
        if hi - lo <= VERTEX_MERGE_TOL:
            return np.array([[0.5 * (lo + hi)]])
        return np.array([[lo], [hi]])

    R = remove_redundant(P)
    bounding_box(R)  # raises UnboundedSetError when unbounded
    H, h = R.H, R.h
    m = H.shape[0]
    points = []
    for i in range(m):
        for j in range(i + 1, m):
            A = np.vstack([H[i], H[j]])
            det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
            if abs(det) <= 1e-12:
                continue
            x = np.linalg.solve(A, np.array([h[i], h[j]]))
            if np.all(H @ x <= h + 1e-7):
                points.append(x)
    if not points:
        # Degenerate single-point set.
        center, _ = chebyshev_center(R)
        return center.reshape(1, 2)
    pts = np.asarray(points)
    centroid = pts.mean(axis=0)
    angles = np.arctan2(pts[:, 1] - centroid[1], pts[:, 0] - centroid[0])
    order = np.argsort(angles, kind="stable")
    pts = pts[order]
    merged: list[np.ndarray] = []
    for p in pts:
        if merged and np.linalg.norm(p - merged[-1]) <= VERTEX_MERGE_TOL:
            continue
        merged.append(p)
    if len(merged) > 1 and np.linalg.norm(merged[0] - merged[-1]) <= VERTEX_MERGE_TOL:
        merged.pop()
    return np.asarray(merged)


def scale(P: Polytope, factor: float, center=None) -> Polytope:
    """Dilate P by ``factor`` about ``center`` (Chebyshev center by default)."""
    if factor <= 0:
        raise ValueError("scale factor must be positive")
    if center is None:
        center, _ = chebyshev_center(P)
    c = np.atleast_1d(np.asarray(center, dtype=float))
    return Polytope(P.H, factor * P.h + (1.0 - factor) * (P.H @ c))


def polygon_area(vertices: np.ndarray) -> float:
    """Shoelace area of a CCW-ordered polygon (0 for fewer than 3 points)."""
    if vertices.ndim != 2 or vertices.shape[0] < 3:
        return 0.0
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
