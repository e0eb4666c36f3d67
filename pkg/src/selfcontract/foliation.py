"""Convex bodies by support functions, convex foliations, and a convex
function whose descent orbits wind around the minimizer forever.

A body is stored as support values ``delta(u_j)`` on ``M`` uniform
directions; it is then the polygon ``{x : <x, u_j> <= delta_j for all j}``.
Minkowski combinations are linear in these values, which makes the
interpolated foliation exact at grid resolution.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .curve import Polyline
from .errors import (DomainError, GridMismatchError, NestingError,
                     PositionError, ValidationError)
from .flow import Orbit, Termination

DEFAULT_M = 720


@functools.lru_cache(maxsize=16)
def direction_grid(M: int) -> Tuple[np.ndarray, np.ndarray]:
    """Angles ``2 pi j / M`` and the matching unit vectors, shape (M, 2)."""
    if M < 8:
        raise ValidationError("need at least 8 directions")
    ang = 2 * np.pi * np.arange(M) / M
    units = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    ang.setflags(write=False)
    units.setflags(write=False)
    return ang, units


@dataclass(frozen=True, eq=False)
class ConvexBody:
    support: np.ndarray
    label: str = ""

    def __post_init__(self):
        d = np.array(self.support, dtype=float).reshape(-1)
        if d.size < 8 or not np.all(np.isfinite(d)):
            raise ValidationError("support needs at least 8 finite samples")
        d.setflags(write=False)
        object.__setattr__(self, "support", d)

    @property
    def M(self) -> int:
        return self.support.size

    @property
    def angles(self) -> np.ndarray:
        return direction_grid(self.M)[0]

    @property
    def units(self) -> np.ndarray:
        return direction_grid(self.M)[1]

    def vertices(self) -> np.ndarray:
        """Vertex ``j`` is where constraints ``j`` and ``j+1`` meet."""
        a = self.angles
        d = self.support
        a1, d1 = np.roll(a, -1), np.roll(d, -1)
        h = 2 * np.pi / self.M
        vx = (d * np.sin(a1) - d1 * np.sin(a)) / math.sin(h)
        vy = (-d * np.cos(a1) + d1 * np.cos(a)) / math.sin(h)
        return np.stack([vx, vy], axis=1)

    def edge_lengths(self) -> np.ndarray:
        """Length of the edge with outer normal ``u_j`` (negative if the data are inconsistent)."""
        h = 2 * np.pi / self.M
        d = self.support
        return (np.roll(d, -1) + np.roll(d, 1) - 2 * math.cos(h) * d) / math.sin(h)

    def is_valid(self, tolerance: float = 1e-12) -> bool:
        """Every constraint supports an edge and the body has interior."""
        scale = float(np.abs(self.support).max())
        if np.any(self.edge_lengths() < -tolerance * scale):
            return False
        c = self.vertices().mean(axis=0)
        return bool(np.all(self.units @ c < self.support))

    def contains(self, x, slack: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all(x @ self.units.T <= self.support + slack, axis=-1)

    def support_at(self, angles) -> np.ndarray:
        """Support values at arbitrary angles by periodic linear interpolation."""
        h = 2 * np.pi / self.M
        t = np.mod(np.asarray(angles, dtype=float), 2 * np.pi) / h
        j = np.floor(t).astype(int) % self.M
        w = t - np.floor(t)
        return (1 - w) * self.support[j] + w * self.support[(j + 1) % self.M]

    def to_rows(self):
        return [(float(a), float(d)) for a, d in zip(self.angles, self.support)]


def body_from_ball(radius: float, M: int = DEFAULT_M, label: str = "") -> ConvexBody:
    if not radius > 0:
        raise ValidationError("radius must be positive")
    return ConvexBody(np.full(M, float(radius)), label or f"ball({radius:g})")


def body_from_ellipse(a: float, b: float, rotation: float = 0.0, M: int = DEFAULT_M,
                      label: str = "") -> ConvexBody:
    """Ellipse with semi-axes ``a`` (along angle ``rotation``) and ``b``."""
    if not (a > 0 and b > 0):
        raise ValidationError("semi-axes must be positive")
    ang = direction_grid(M)[0] - rotation
    d = np.sqrt((a * np.cos(ang)) ** 2 + (b * np.sin(ang)) ** 2)
    return ConvexBody(d, label or f"ellipse({a:g},{b:g},{rotation:g})")


def _same_grid(*bodies: ConvexBody) -> None:
    if len({b.M for b in bodies}) != 1:
        raise GridMismatchError("bodies use different direction grids")


def minkowski_combine(s: float, C: ConvexBody, D: ConvexBody) -> ConvexBody:
    """``s C + (1 - s) D``; support values combine linearly."""
    if not 0.0 <= s <= 1.0:
        raise ValidationError("weight must lie in [0, 1]")
    _same_grid(C, D)
    return ConvexBody(s * C.support + (1 - s) * D.support, f"{s:g}*{C.label}+{1 - s:g}*{D.label}")


def rotate_scale(C: ConvexBody, angle: float, scale: float, label: str = "") -> ConvexBody:
    """Image of ``C`` under rotation by ``angle`` (counterclockwise) then scaling.

    ``delta_{T C}(u) = scale * delta_C(rot(-angle) u)``, evaluated by
    periodic linear interpolation on the grid.
    """
    if not scale > 0:
        raise ValidationError("scale must be positive")
    d = scale * C.support_at(C.angles - angle)
    return ConvexBody(d, label or f"T({C.label})")


def compute_K(C_prev: ConvexBody, C_mid: ConvexBody, C_next: ConvexBody) -> float:
    """``max_u (delta_prev - delta_mid) / (delta_mid - delta_next)`` over the grid."""
    _same_grid(C_prev, C_mid, C_next)
    den = C_mid.support - C_next.support
    if np.any(den <= 0):
        j = int(np.argmin(den))
        raise NestingError(f"{C_next.label} is not inside {C_mid.label} at direction {j}")
    return float(np.max((C_prev.support - C_mid.support) / den))


@dataclass(frozen=True)
class Levels:
    """Levels ``lambda_k`` with gaps ``g_k = lambda_k - lambda_{k+1}`` kept separately.

    Deep gaps fall below the spacing of doubles near ``lambda_0``, so the
    gaps (not differences of levels) are the reference data.
    """

    values: np.ndarray
    gaps: np.ndarray
    K: float
    Ks: Tuple[float, ...]


def torralba_levels(Ks: Sequence[float], lambda0: float, lambda1: float,
                    count: int) -> Levels:
    """``count`` levels with ``g_k = (lambda0 - lambda1) / K^k``, ``K = max(Ks) + 1``.

    ``Ks[k-1]`` is the ratio attached to level ``k`` (periodically extended
    when shorter than needed). The condition ``0 < K_k g_k <= g_{k-1}`` is
    verified for every ``k >= 1``.
    """
    if not lambda0 > lambda1:
        raise ValidationError("need lambda0 > lambda1")
    Ks = tuple(float(k) for k in Ks)
    if not Ks or min(Ks) <= 0:
        raise ValidationError("ratios must be positive")
    if count < 2:
        raise ValidationError("need at least two levels")
    K = max(Ks) + 1.0
    gaps = (lambda0 - lambda1) / K ** np.arange(count - 1)
    vals = lambda0 - np.concatenate([[0.0], np.cumsum(gaps)])
    for k in range(1, count - 1):
        Kk = Ks[(k - 1) % len(Ks)]
        if not 0 < Kk * gaps[k] <= gaps[k - 1]:
            raise NestingError(f"level condition fails at k={k}")
    return Levels(vals, gaps, K, Ks)


@dataclass(frozen=True)
class FoliationFamily:
    """Nested bodies ``C_0 ⊃ C_1 ⊃ ...`` with decreasing levels.

    ``{f <= lambda} = w C_k + (1 - w) C_{k+1}`` for ``lambda`` between
    ``lambda_{k+1}`` and ``lambda_k``, ``w = (lambda - lambda_{k+1}) / g_k``.
    """

    bodies: Tuple[ConvexBody, ...]
    levels: Levels
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.bodies) < 2:
            raise ValidationError("a family needs at least two bodies")
        _same_grid(*self.bodies)
        if len(self.levels.values) != len(self.bodies):
            raise ValidationError("one level per body required")
        for k in range(len(self.bodies) - 1):
            gap = self.bodies[k].support - self.bodies[k + 1].support
            if np.any(gap <= 0):
                raise NestingError(
                    f"body {k + 1} is not strictly inside body {k} "
                    f"(direction {int(np.argmin(gap))})")
        if np.any(self.levels.gaps <= 0):
            raise ValidationError("levels must decrease strictly")

    @property
    def deltas(self) -> np.ndarray:
        return np.stack([b.support for b in self.bodies])

    @property
    def units(self) -> np.ndarray:
        return self.bodies[0].units

    def body_at(self, k: int, s: float) -> np.ndarray:
        """Support values of ``s C_k + (1 - s) C_{k+1}``."""
        d = self.deltas
        return s * d[k] + (1 - s) * d[k + 1]

    def to_dict(self) -> dict:
        meta = {k: v for k, v in self.meta.items() if not k.startswith("_")}
        return {"levels": [float(v) for v in self.levels.values],
                "gaps": [float(g) for g in self.levels.gaps],
                "K": self.levels.K, "Ks": list(self.levels.Ks),
                "bodies": [b.label for b in self.bodies],
                "M": self.bodies[0].M, **meta}


def concentric_ball_family(radii: Sequence[float], levels: Sequence[float],
                           M: int = DEFAULT_M) -> FoliationFamily:
    """Balls with prescribed radii and levels (radial test family)."""
    vals = np.asarray(levels, dtype=float)
    bodies = tuple(body_from_ball(r, M) for r in radii)
    return FoliationFamily(bodies, Levels(vals, -np.diff(vals), float("nan"), ()))


# Step-1 bodies: balls 1, 0.9, 0.6, 0.5 and an ellipse between 0.9 and 0.6
STEP1_ELLIPSE = (0.85, 0.65, math.pi / 4)


def step1_bodies(M: int = DEFAULT_M, ellipse=STEP1_ELLIPSE) -> List[ConvexBody]:
    a, b, rot = ellipse
    return [body_from_ball(1.0, M, "C0"), body_from_ball(0.9, M, "C1"),
            body_from_ellipse(a, b, rot, M, "C2"), body_from_ball(0.6, M, "C3"),
            body_from_ball(0.5, M, "C4")]


def step1_ratios(bodies: Sequence[ConvexBody], theta: float = 0.0) -> Tuple[float, ...]:
    """``K_1..K_4``; ``K_4`` needs ``C_5``, the image of ``C_1`` under the transform."""
    C5 = rotate_scale(bodies[1], -theta, 0.5)
    seq = list(bodies) + [C5]
    return tuple(compute_K(seq[k - 1], seq[k], seq[k + 1]) for k in range(1, 5))


def step1_family(M: int = DEFAULT_M, ellipse=STEP1_ELLIPSE,
                 lambda0: float = 1.0, lambda1: float = 0.5) -> FoliationFamily:
    bodies = step1_bodies(M, ellipse)
    Ks = step1_ratios(bodies)
    lv = torralba_levels(Ks, lambda0, lambda1, len(bodies))
    return FoliationFamily(tuple(bodies), lv, {"ellipse": list(ellipse)})


def torralba_spiral_family(theta: float, periods: int, M: int = DEFAULT_M,
                           ellipse=STEP1_ELLIPSE, lambda0: float = 1.0,
                           lambda1: float = 0.5) -> FoliationFamily:
    """Bodies ``C_k = T^{k // 4}(C_{k % 4})`` for ``k <= 4 periods``.

    ``T`` scales by 1/2 and rotates by ``theta`` clockwise, so that each
    period continues the clockwise deflection of the previous one. ``T^n``
    is applied directly (one interpolation per body, not ``n``).
    """
    if not theta > 0:
        raise ValidationError("turn angle must be positive")
    if periods < 1:
        raise ValidationError("need at least one period")
    base = step1_bodies(M, ellipse)[:4]
    bodies = []
    for k in range(4 * periods + 1):
        n, kb = divmod(k, 4)
        b = base[kb]
        bodies.append(b if n == 0 else
                      rotate_scale(b, -n * theta, 0.5 ** n, f"T^{n}({b.label})"))
    Ks = step1_ratios(step1_bodies(M, ellipse), theta)
    lv = torralba_levels(Ks, lambda0, lambda1, len(bodies))
    return FoliationFamily(tuple(bodies), lv,
                           {"theta": float(theta), "periods": int(periods),
                            "ellipse": list(ellipse)})


def cond_lambda_holds(family: FoliationFamily) -> bool:
    """``0 < K_k g_k <= g_{k-1}`` with ``K_k`` recomputed from the actual bodies."""
    g = family.levels.gaps
    b = family.bodies
    for k in range(1, len(b) - 1):
        Kk = compute_K(b[k - 1], b[k], b[k + 1])
        if not 0 < Kk * g[k] <= g[k - 1] * (1 + 1e-12):
            return False
    return True


MEMBERSHIP_SLACK = 1e-12


def _radii(family: FoliationFamily) -> Tuple[np.ndarray, np.ndarray]:
    cached = family.meta.get("_radii")
    if cached is None:
        inr = np.array([b.support.min() for b in family.bodies]) * (1 - 1e-12)
        outr = np.array([np.hypot(*b.vertices().T).max() for b in family.bodies]) * (1 + 1e-12)
        if not np.all(family.deltas.min(axis=1) > 0):
            # origin not interior: fall back to the full index range
            inr = np.full(len(family.bodies), -1.0)
        cached = (inr, outr)
        family.meta["_radii"] = cached
    return cached


def level_position(family: FoliationFamily, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Shell index ``k`` and weight ``s`` with ``x`` on ``s C_k + (1-s) C_{k+1}``.

    Points inside the last body get ``k = n - 2`` and ``s = 0``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    D = family.deltas
    n = len(D)
    P = x @ family.units.T
    slack = MEMBERSHIP_SLACK * float(D[0].max())
    if np.any((P - D[0]).max(axis=1) > slack):
        raise DomainError("point outside the outermost body")
    # radial brackets: |x| <= min delta_k gives x in C_k (bodies contain O),
    # |x| > max vertex norm of C_k gives x outside C_k
    r = np.hypot(x[:, 0], x[:, 1])
    inr, outr = _radii(family)
    lo = np.maximum(np.searchsorted(-inr, -r, side="right") - 1, 0)
    hi = np.minimum(np.searchsorted(-outr, -r, side="left"), n)
    inside_last = (P - D[-1]).max(axis=1) <= slack
    hi[inside_last] = n
    lo[inside_last] = n - 1
    while np.any(hi - lo > 1):
        mid = (lo + hi) // 2
        active = hi - lo > 1
        m = np.where(active, mid, 0)
        inside = (P - D[m]).max(axis=1) <= slack
        lo = np.where(active & inside, mid, lo)
        hi = np.where(active & ~inside, mid, hi)
    k = np.minimum(lo, n - 2)
    c = P - D[k + 1]
    d = D[k] - D[k + 1]
    s = np.clip((c / d).max(axis=1), 0.0, 1.0)
    s = np.where(inside_last, 0.0, s)
    return k, s


def foliation_value(family: FoliationFamily, x) -> np.ndarray:
    """Value of the convex function whose sublevel sets are the family.

    Within shell ``k`` the point lies on ``s C_k + (1-s) C_{k+1}`` with
    ``s = max_j (<x,u_j> - delta_{k+1,j}) / (delta_{k,j} - delta_{k+1,j})``,
    an exact closed form; the value is ``lambda_{k+1} + s g_k``.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    out = np.empty(len(pts))
    lv = family.levels
    for lo in range(0, len(pts), 4096):
        k, s = level_position(family, pts[lo:lo + 4096])
        out[lo:lo + 4096] = lv.values[k + 1] + s * lv.gaps[k]
    return out[0] if single else out


def orthogonal_trajectory(family: FoliationFamily, x0, substeps: int = 64,
                          shells: Optional[int] = None) -> Orbit:
    """Curve crossing each interpolated boundary along a supporting normal.

    Each shell is split into ``substeps`` level decrements. From a point on
    the current boundary the outward normal ``u*`` of the active edge is
    taken and the point moves along ``-u*`` exactly onto the next boundary
    (``t = max_{<u*,u_j> > 0} (<x,u_j> - delta_j) / <u*,u_j>``).
    Sample parameters are ``k + i / substeps``; ``f_values`` are levels.
    """
    if substeps < 1:
        raise ValidationError("substeps must be positive")
    U = family.units
    D = family.deltas
    n = len(D)
    x = np.asarray(x0, dtype=float).reshape(2)
    k0, s0 = level_position(family, x)
    k0, s0 = int(k0[0]), float(s0[0])
    last = n - 1 if shells is None else min(n - 1, k0 + shells)
    # first sub-level strictly below the start
    i0 = int(math.floor((1.0 - s0) * substeps + 1e-9)) + 1
    pts = [x.copy()]
    prm = [k0 + (1.0 - s0)]
    lv = [float(family.levels.values[k0 + 1] + s0 * family.levels.gaps[k0])]
    cur = family.body_at(k0, s0)
    scale = float(D[0].max())
    for k in range(k0, last):
        for i in range(i0 if k == k0 else 1, substeps + 1):
            s = 1.0 - i / substeps
            gap = U @ x - cur
            j = int(np.argmax(gap))
            if gap[j] < -1e-9 * scale:
                raise PositionError("point is interior to its level set")
            u = U[j]
            target = family.body_at(k, s)
            a = U @ x - target
            b = U @ u
            pos = b > 1e-15
            t = float(np.max(a[pos] / b[pos]))
            x = x - max(t, 0.0) * u
            pts.append(x.copy())
            prm.append(k + i / substeps)
            lv.append(float(family.levels.values[k + 1] + s * family.levels.gaps[k]))
            cur = target
    pl = Polyline(np.array(pts), np.array(prm))
    meta = {"substeps": substeps, "start_shell": k0, "end_shell": last}
    return Orbit(pl, np.array(lv), Termination.REACHED_LIMIT, meta)


def deflection(orbit: Orbit, center=(0.0, 0.0)) -> float:
    """Clockwise angle (radians) from the first to the last sample around ``center``."""
    rel = orbit.points - np.asarray(center, dtype=float)
    ang = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
    return float(ang[0] - ang[-1])


def measure_deflection(M: int = DEFAULT_M, ellipse=STEP1_ELLIPSE,
                       substeps: int = 64) -> Tuple[float, Orbit]:
    """Deflection of the Step-1 trajectory from the top of ``C_0`` to ``C_4``."""
    fam = step1_family(M, ellipse)
    orb = orthogonal_trajectory(fam, (0.0, 1.0), substeps)
    return deflection(orb), orb


def winds_monotonically(orbit: Orbit, slack: float, center=(0.0, 0.0)) -> bool:
    """Angle around ``center`` never increases by more than ``slack`` radians per step."""
    rel = orbit.points - np.asarray(center, dtype=float)
    ang = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
    return bool(np.all(np.diff(ang) <= slack))


@dataclass(frozen=True)
class TorralbaResult:
    theta: float
    family: FoliationFamily
    step1_orbit: Orbit
    orbit: Orbit

    def to_dict(self) -> dict:
        return {"theta": self.theta, "K": self.family.levels.K,
                "Ks": list(self.family.levels.Ks),
                "samples": len(self.orbit.polyline)}


def torralba_construction(periods: int = 5, M: int = DEFAULT_M, ellipse=STEP1_ELLIPSE,
                          substeps: int = 64) -> TorralbaResult:
    """Measure the Step-1 deflection, build the periodic family, trace the orbit."""
    theta, orb1 = measure_deflection(M, ellipse, substeps)
    if not theta > 0:
        raise NestingError(f"Step-1 deflection {theta:.3g} is not clockwise-positive")
    fam = torralba_spiral_family(theta, periods, M, ellipse)
    orb = orthogonal_trajectory(fam, (0.0, 1.0), substeps)
    return TorralbaResult(theta, fam, orb1, orb)
