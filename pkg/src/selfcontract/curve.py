"""Discrete planar curves and the self-contractedness predicate.

A curve is handled through its ordered samples. A curve is self-contracted
when, for every ordered triple ``i <= j <= l`` of sample indices,

    dist(p_i, p_l) >= dist(p_j, p_l),

i.e. the distance to any fixed later point never increases along the curve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial import QhullError

from .errors import OracleCapError, ValidationError

#: Multiplier of the endpoint gap in the length bound for bounded
#: self-contracted planar curves.
LENGTH_BOUND_FACTOR = 8.0 * math.pi + 2.0

#: Default size cap of the cubic-time oracle.
BRUTEFORCE_CAP = 200


@dataclass(frozen=True, eq=False)
class Polyline:
    """Ordered planar samples ``points[i] = gamma(params[i])``.

    ``params`` must be strictly increasing. They are carried for export
    and bookkeeping only; every geometric predicate depends on point order.
    """

    points: np.ndarray
    params: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1 and pts.size == 2:
            pts = pts.reshape(1, 2)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValidationError(f"points must have shape (N, 2), got {pts.shape}")
        n = pts.shape[0]
        if self.params is None:
            prm = np.arange(n, dtype=float)
        else:
            prm = np.array(self.params, dtype=float).reshape(-1)
        if n < 1:
            raise ValidationError("a polyline needs at least one point")
        if prm.shape[0] != n:
            raise ValidationError(
                f"params has {prm.shape[0]} entries for {n} points")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points contain non-finite coordinates")
        if not np.all(np.isfinite(prm)):
            raise ValidationError("params contain non-finite values")
        if n > 1 and not np.all(np.diff(prm) > 0):
            raise ValidationError("params must be strictly increasing")
        pts.setflags(write=False)
        prm.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "params", prm)

    @classmethod
    def from_points(cls, points, params=None) -> "Polyline":
        return cls(np.asarray(points, dtype=float), params)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def first(self) -> np.ndarray:
        return self.points[0]

    @property
    def last(self) -> np.ndarray:
        return self.points[-1]

    def sub(self, start: int, stop: int) -> "Polyline":
        """Contiguous sub-polyline ``[start, stop)``."""
        return Polyline(self.points[start:stop], self.params[start:stop])

    def reversed(self) -> "Polyline":
        """Same points traversed backwards (params are re-mirrored)."""
        prm = self.params[-1] + self.params[0] - self.params[::-1]
        return Polyline(self.points[::-1], prm)

    def translated(self, offset) -> "Polyline":
        return Polyline(self.points + np.asarray(offset, dtype=float), self.params)


@dataclass(frozen=True)
class ScVerdict:
    is_self_contracted: bool
    witness: Optional[Tuple[int, int, int]]
    slack: float
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "is_self_contracted": bool(self.is_self_contracted),
            "witness": None if self.witness is None else [int(v) for v in self.witness],
            "slack": float(self.slack),
        }


@dataclass(frozen=True)
class MainBound:
    length: float
    gap: float
    bound: float
    holds: bool

    def to_dict(self) -> dict:
        return {"length": self.length, "gap": self.gap, "bound": self.bound,
                "holds": bool(self.holds)}


def diameter(points: np.ndarray) -> float:
    """Largest pairwise distance between the given points."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 64:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            # collinear input: the bounding box diagonal is the diameter
            span = pts.max(axis=0) - pts.min(axis=0)
            return float(np.hypot(*span))
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


def default_tolerance(curve: Polyline) -> float:
    return 1e-9 * diameter(curve.points)


def _resolve_tolerance(curve: Polyline, tolerance: Optional[float]) -> float:
    if tolerance is None:
        return default_tolerance(curve)
    if not tolerance >= 0:
        raise ValidationError(f"tolerance must be nonnegative, got {tolerance}")
    return float(tolerance)


def check_self_contracted(curve: Polyline, tolerance: Optional[float] = None,
                          block: Optional[int] = None) -> ScVerdict:
    """Quadratic-time self-contractedness check.

    For each endpoint index ``l`` the worst triple ending at ``l`` is
    ``min_j (min_{i<=j} d_i - d_j)`` with ``d_i = dist(p_i, p_l)``, obtained
    from a running minimum. The verdict therefore agrees with full triple
    enumeration, including the reported slack.
    """
    tol = _resolve_tolerance(curve, tolerance)
    pts = curve.points
    n = len(pts)
    if block is None:
        block = max(16, min(256, 2_000_000 // max(n, 1)))
    best = 0.0
    witness = None
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        # rows: endpoint l in [lo, hi); columns: i in [0, hi)
        d = np.sqrt(((pts[lo:hi, None, :] - pts[None, :hi, :]) ** 2).sum(-1))
        ls = np.arange(lo, hi)
        beyond = np.arange(hi)[None, :] > ls[:, None]
        runmin = np.minimum.accumulate(np.where(beyond, np.inf, d), axis=1)
        gap = np.where(beyond, 0.0, runmin - d)
        row, col = np.unravel_index(np.argmin(gap), gap.shape)
        if gap[row, col] < best:
            best = float(gap[row, col])
            l_idx = lo + row
            j_idx = int(col)
            i_idx = int(np.argmin(d[row, : j_idx + 1]))
            witness = (i_idx, j_idx, int(l_idx))
    ok = best >= -tol
    return ScVerdict(ok, None if ok else witness, best, tol)


def check_self_contracted_bruteforce(curve: Polyline,
                                     tolerance: Optional[float] = None,
                                     cap: int = BRUTEFORCE_CAP) -> ScVerdict:
    """Cubic-time oracle enumerating every triple ``i <= j <= l``."""
    n = len(curve)
    if n > cap:
        raise OracleCapError(f"oracle refuses {n} points (cap {cap})")
    tol = _resolve_tolerance(curve, tolerance)
    pts = curve.points
    best = 0.0
    witness = None
    rows = pts.tolist()
    for l in range(n):
        d = [math.dist(p, rows[l]) for p in rows[: l + 1]]
        for j in range(l + 1):
            dj = d[j]
            for i in range(j + 1):
                s = d[i] - dj
                if s < best:
                    best = s
                    witness = (i, j, l)
    ok = best >= -tol
    return ScVerdict(ok, None if ok else witness, best, tol)


def segment_lengths(curve: Polyline) -> np.ndarray:
    return np.hypot(*np.diff(curve.points, axis=0).T)


def length(curve: Polyline) -> float:
    """Sum of segment lengths (the supremum over subdivisions for a polyline)."""
    if len(curve) < 2:
        return 0.0
    return float(segment_lengths(curve).sum())


def endpoint_gap(curve: Polyline) -> float:
    return float(math.dist(curve.first, curve.last))


def check_main_bound(curve: Polyline, tolerance: Optional[float] = None) -> MainBound:
    """Compare the length with ``(8*pi + 2)`` times the endpoint gap.

    The comparison is only a theorem check for curves that pass
    :func:`check_self_contracted`; for other curves ``holds`` is just data.
    """
    tol = _resolve_tolerance(curve, tolerance)
    L = length(curve)
    gap = endpoint_gap(curve)
    bound = LENGTH_BOUND_FACTOR * gap
    return MainBound(L, gap, bound, L <= bound + tol)


def distances_to_last(curve: Polyline) -> np.ndarray:
    return np.hypot(*(curve.points - curve.last).T)


def is_nonincreasing(values: Sequence[float], tolerance: float = 0.0) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) <= tolerance))
