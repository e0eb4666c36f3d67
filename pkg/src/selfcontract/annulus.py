"""Annulus decomposition of a curve converging to a center point.

Inside ``U(lam*R, R)`` every segment is classified by the signed angle at
its midpoint between the direction to the center and the direction to its
nearer endpoint. Vertical segments are bounded by the radial drop they
cause; horizontal ones are charged to arcs of the inner circle through the
projection ``pi``. Angles are counterclockwise positive throughout.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from collections.abc import Sequence as Sequence_
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .curve import LENGTH_BOUND_FACTOR, Polyline, length
from .errors import (ConvergenceError, DegenerateSegmentError, GeometryError,
                     MonotonicityError, OutOfAnnulusError,
                     SingularMidpointError, ValidationError)

# relative slack for "point lies in the closed annulus"
RANGE_RTOL = 1e-9


@dataclass(frozen=True)
class AnnulusParams:
    """Parameters ``(alpha, lam, R)`` of the annulus ``U(lam*R, R)``."""

    alpha: float
    lam: float
    outer_radius: float = 1.0
    center: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        a, lam, R = float(self.alpha), float(self.lam), float(self.outer_radius)
        if not 0.0 < a < math.pi / 2:
            raise ValidationError(f"alpha must lie in (0, pi/2), got {a}")
        if not math.sin(a) < lam < 1.0:
            raise ValidationError(
                f"need sin(alpha) < lam < 1, got sin(alpha)={math.sin(a):.6g}, lam={lam}")
        if not (R > 0 and math.isfinite(R)):
            raise ValidationError(f"outer radius must be positive, got {R}")
        c = tuple(float(v) for v in self.center)
        if len(c) != 2 or not all(math.isfinite(v) for v in c):
            raise ValidationError("center must be a finite 2D point")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "outer_radius", R)
        object.__setattr__(self, "center", c)

    @property
    def inner_radius(self) -> float:
        return self.lam * self.outer_radius

    @property
    def width(self) -> float:
        return (1.0 - self.lam) * self.outer_radius

    @property
    def origin(self) -> np.ndarray:
        return np.array(self.center)

    def scaled(self, outer_radius: float) -> "AnnulusParams":
        return AnnulusParams(self.alpha, self.lam, outer_radius, self.center)


class SegmentKind(enum.Enum):
    VERTICAL = "V"
    HORIZONTAL_POSITIVE = "H+"
    HORIZONTAL_NEGATIVE = "H-"


@dataclass(frozen=True)
class ClassifiedSegment:
    """A segment ``[p, q]`` with ``|q - O| <= |p - O|``."""

    p: np.ndarray
    q: np.ndarray
    theta: float
    kind: SegmentKind

    @property
    def m(self) -> np.ndarray:
        return 0.5 * (self.p + self.q)

    @property
    def length(self) -> float:
        return float(math.dist(self.p, self.q))


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _order(p, q, center):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    c = np.asarray(center, dtype=float)
    if np.hypot(*(q - c)) > np.hypot(*(p - c)):
        p, q = q, p
    return p, q, c


def segment_theta(p, q, center=(0.0, 0.0)) -> float:
    """Signed angle at the midpoint from the center direction to the near endpoint.

    The endpoints are reordered so that ``q`` is the one nearer to
    ``center``; the result then lies in ``[-pi/2, pi/2]``.

    >>> round(segment_theta((0, 2), (0, 1)), 12)
    0.0
    """
    p, q, c = _order(p, q, center)
    if np.array_equal(p, q):
        raise DegenerateSegmentError(f"degenerate segment at {p.tolist()}")
    m = 0.5 * (p + q)
    to_o = c - m
    if not np.any(to_o):
        raise SingularMidpointError("segment midpoint coincides with the center")
    to_q = q - m
    # q at the center: both vectors point the same way, atan2 gives 0
    return float(math.atan2(_cross(to_o, to_q), float(np.dot(to_o, to_q))))


def _kind_for(theta: float, alpha: float) -> SegmentKind:
    edge = math.pi / 2 - alpha
    if theta >= edge:
        return SegmentKind.HORIZONTAL_NEGATIVE
    if theta <= -edge:
        return SegmentKind.HORIZONTAL_POSITIVE
    return SegmentKind.VERTICAL


def _check_in_annulus(point, params: AnnulusParams, what: str) -> None:
    r = float(np.hypot(*(np.asarray(point) - params.origin)))
    lo = params.inner_radius * (1 - RANGE_RTOL)
    hi = params.outer_radius * (1 + RANGE_RTOL)
    if not lo <= r <= hi:
        raise OutOfAnnulusError(
            f"{what} at radius {r:.12g} outside [{params.inner_radius:.12g}, "
            f"{params.outer_radius:.12g}]")


def classify_segment(p, q, params: AnnulusParams) -> ClassifiedSegment:
    """Classify ``[p, q]`` as vertical or horizontal (with direction).

    Boundary angles ``theta = +-(pi/2 - alpha)`` are horizontal.
    """
    _check_in_annulus(p, params, "endpoint p")
    _check_in_annulus(q, params, "endpoint q")
    p, q, _ = _order(p, q, params.center)
    theta = segment_theta(p, q, params.center)
    return ClassifiedSegment(p, q, theta, _kind_for(theta, params.alpha))


@dataclass(frozen=True)
class SegmentEstimate:
    lhs: float
    rhs: float
    holds: bool


def segment_length_estimate(seg: ClassifiedSegment,
                            center=(0.0, 0.0)) -> SegmentEstimate:
    """Both sides of ``length <= (2 / cos theta) * |r_p - r_q|``."""
    cos_t = math.cos(seg.theta)
    if cos_t <= 1e-12:
        raise GeometryError("estimate undefined for theta = +-pi/2")
    c = np.asarray(center, dtype=float)
    drop = abs(float(np.hypot(*(seg.p - c)) - np.hypot(*(seg.q - c))))
    lhs = seg.length
    rhs = 2.0 / cos_t * drop
    # a few ulps of slack for the float evaluation of both sides
    return SegmentEstimate(lhs, rhs, lhs <= rhs * (1 + 1e-12) + 1e-15 * lhs)


@dataclass(frozen=True)
class Projection:
    """Projection of ``x`` onto the inner circle along the half-line ``L_x``.

    ``normal`` is the unit normal of the line through ``L_x`` pointing to
    the side containing the center; that closed side is ``H_x``.
    """

    x: np.ndarray
    pi_x: np.ndarray
    pi_prime_x: np.ndarray
    direction: np.ndarray
    normal: np.ndarray
    orientation: int

    def in_half_plane(self, y, slack: float = 0.0) -> bool:
        return float(np.dot(np.asarray(y) - self.x, self.normal)) >= -slack

    @property
    def delta(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.x, self.pi_x


def _project_arrays(x: np.ndarray, params: AnnulusParams, orientation: int):
    """Vectorized projection; ``x`` has shape (..., 2) relative to the center."""
    rho = params.inner_radius
    a = params.alpha * orientation
    r = np.hypot(x[..., 0], x[..., 1])
    to_o = -x / r[..., None]
    ca, sa = math.cos(a), math.sin(a)
    d = np.stack([ca * to_o[..., 0] - sa * to_o[..., 1],
                  sa * to_o[..., 0] + ca * to_o[..., 1]], axis=-1)
    disc = rho * rho - (r * math.sin(params.alpha)) ** 2
    root = np.sqrt(np.maximum(disc, 0.0))
    rc = r * math.cos(params.alpha)
    # cancellation-free form of the smaller root rc - root
    t_near = (r * r - rho * rho) / (rc + root)
    t_far = rc + root
    return d, t_near, t_far, disc


def project_pi(x, params: AnnulusParams, orientation: int = 1) -> Projection:
    """Intersections of ``L_x`` with the circle of radius ``lam*R``.

    ``L_x`` leaves ``x`` at angle ``orientation * alpha`` from the direction
    towards the center (``+1`` is counterclockwise and serves positively
    pointing segments; ``-1`` is the mirror image used for negative ones).
    """
    if orientation not in (1, -1):
        raise ValidationError("orientation must be +1 or -1")
    _check_in_annulus(x, params, "point")
    c = params.origin
    rel = np.asarray(x, dtype=float) - c
    d, t_near, t_far, disc = _project_arrays(rel, params, orientation)
    if disc < 0 or float(t_near) < -RANGE_RTOL * params.outer_radius:
        raise GeometryError("half-line misses the inner circle")
    t_near = max(float(t_near), 0.0)
    normal = np.array([-d[1], d[0]]) * orientation
    # make the normal face the center explicitly
    if np.dot(-rel, normal) < 0:
        normal = -normal
    return Projection(rel + c, rel + t_near * d + c, rel + float(t_far) * d + c,
                      d, normal, orientation)


def pi_points(xs: np.ndarray, params: AnnulusParams, orientation: int = 1) -> np.ndarray:
    """``pi`` of many points at once (no range checks)."""
    rel = np.asarray(xs, dtype=float) - params.origin
    d, t_near, _, _ = _project_arrays(rel, params, orientation)
    return rel + np.maximum(t_near, 0.0)[..., None] * d + params.origin


def _dist(a, b):
    return np.hypot(a[..., 0] - b[..., 0], a[..., 1] - b[..., 1])


@functools.lru_cache(maxsize=64)
def _unit_eta(alpha: float, lam: float, n: int) -> float:
    p = AnnulusParams(alpha, lam, 1.0)
    radii = np.linspace(lam, 1.0, n)
    angles = np.linspace(-math.pi, math.pi, n, endpoint=False)
    rr, aa = np.meshgrid(radii, angles, indexing="ij")
    ys = np.stack([rr * np.cos(aa), rr * np.sin(aa)], axis=-1)
    d, tn, tf, _ = _project_arrays(ys, p, 1)
    pi_y = ys + tn[..., None] * d
    pip_y = ys + tf[..., None] * d
    best = math.inf
    for r in radii:
        # rotation invariance: x on the positive horizontal axis suffices
        x = np.array([r, 0.0])
        dx, tnx, tfx, _ = _project_arrays(x, p, 1)
        pi_x = x + tnx * dx
        pip_x = x + tfx * dx
        bad = ((_dist(x, pi_y) >= _dist(x, pip_y))
               | (_dist(pi_x, pi_y) >= _dist(pi_x, pip_x))
               | (_dist(pi_x, pi_y) >= _dist(pi_x, pip_y)))
        if np.any(bad):
            best = min(best, float(_dist(x, ys)[bad].min()))
    if not math.isfinite(best):
        # no violation on the grid: the annulus diameter is a valid eta
        best = 2.0
    return 0.5 * best


def eta_for_annulus(params: AnnulusParams, sample_density: int = 200) -> float:
    """Closeness scale below which the three projection inequalities hold.

    Found on a polar grid of ``sample_density`` radii and angles around a
    point placed on each sampled radius (the conditions are rotation
    invariant), then halved. Valid at the sampled resolution only.
    """
    if sample_density < 2:
        raise ValidationError("sample_density must be at least 2")
    return _unit_eta(params.alpha, params.lam, int(sample_density)) * params.outer_radius


def _circle_params(a: np.ndarray, d: np.ndarray, rho: float) -> np.ndarray:
    """Parameters in (0, 1) where ``a + t d`` crosses the circle ``rho``; NaN if none."""
    A = (d * d).sum(-1)
    B = 2 * (a * d).sum(-1)
    C = (a * a).sum(-1) - rho * rho
    disc = B * B - 4 * A * C
    out = np.full((len(a), 2), np.nan)
    ok = (A > 0) & (disc >= 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    Asafe = np.where(A > 0, A, 1.0)
    for k, sgn in enumerate((-1.0, 1.0)):
        t = (-B + sgn * sq) / (2 * Asafe)
        out[:, k] = np.where(ok & (t > 0) & (t < 1), t, np.nan)
    return out


def _split_params(points: np.ndarray, radii: Sequence[float]) -> np.ndarray:
    a = points[:-1]
    d = points[1:] - a
    cols = [np.zeros(len(a)), np.ones(len(a))]
    for rho in radii:
        if rho > 0:
            cols.extend(_circle_params(a, d, rho).T)
    t = np.stack(cols, axis=1)
    t = np.where(np.isnan(t), 1.0, t)
    return np.sort(t, axis=1)


def length_inside(curve: Polyline, inner: float, outer: float,
                  center=(0.0, 0.0)) -> float:
    """Length of the part of the polyline inside ``inner <= |x - c| <= outer``.

    Segments are split exactly where they cross either circle.
    """
    pts = curve.points - np.asarray(center, dtype=float)
    if len(pts) < 2:
        return 0.0
    t = _split_params(pts, (inner, outer))
    a = pts[:-1]
    d = pts[1:] - a
    seg_len = np.hypot(d[:, 0], d[:, 1])
    tm = 0.5 * (t[:, 1:] + t[:, :-1])
    mid = a[:, None, :] + tm[..., None] * d[:, None, :]
    rm = np.hypot(mid[..., 0], mid[..., 1])
    inside = (rm >= inner) & (rm <= outer)
    return float((np.diff(t, axis=1) * inside).sum(1) @ seg_len)


def clip_to_annulus(curve: Polyline, params: AnnulusParams) -> Optional[Polyline]:
    """Portion of a radially nonincreasing curve between the two circles.

    Crossing points are inserted by exact segment/circle intersection.
    Returns ``None`` when the curve never meets the closed annulus.
    """
    c = params.origin
    pts = curve.points - c
    prm = curve.params
    R, rho = params.outer_radius, params.inner_radius
    r = np.hypot(pts[:, 0], pts[:, 1])
    keep = [k for k in range(len(pts)) if rho <= r[k] <= R]
    out_p: List[np.ndarray] = []
    out_t: List[float] = []

    def cross_point(k, radius):
        a, b = pts[k], pts[k + 1]
        ts = _circle_params(a[None], (b - a)[None], radius)[0]
        ts = ts[~np.isnan(ts)]
        if ts.size == 0:
            return None
        s = float(ts.min())
        return a + s * (b - a), prm[k] + s * (prm[k + 1] - prm[k])

    if keep:
        first, last = keep[0], keep[-1]
        if first > 0:
            hit = cross_point(first - 1, R)
            if hit is not None and not np.allclose(hit[0], pts[first]):
                out_p.append(hit[0])
                out_t.append(hit[1])
        for k in range(first, last + 1):
            out_p.append(pts[k])
            out_t.append(prm[k])
        if last < len(pts) - 1:
            hit = cross_point(last, rho)
            if hit is not None and not np.allclose(hit[0], pts[last]):
                out_p.append(hit[0])
                out_t.append(hit[1])
    else:
        # a single segment may jump across the whole annulus
        for k in range(len(pts) - 1):
            if r[k] > R and r[k + 1] < rho:
                a = cross_point(k, R)
                b = cross_point(k, rho)
                if a is not None and b is not None:
                    out_p = [a[0], b[0]]
                    out_t = [a[1], b[1]]
                break
    if not out_p:
        return None
    P = np.array(out_p) + c
    T = np.array(out_t)
    # exact hits can coincide with samples in parameter; keep strict order
    keep_mask = np.concatenate([[True], np.diff(T) > 0])
    return Polyline(P[keep_mask], T[keep_mask])


@dataclass(frozen=True, eq=False)
class Decomposition(Sequence_):
    """Classified segments stored as arrays; indexing yields :class:`ClassifiedSegment`."""

    p: np.ndarray
    q: np.ndarray
    theta: np.ndarray
    codes: np.ndarray

    def __len__(self) -> int:
        return len(self.theta)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(len(self)))]
        return ClassifiedSegment(self.p[i], self.q[i], float(self.theta[i]),
                                 _KINDS[int(self.codes[i])])

    @property
    def lengths(self) -> np.ndarray:
        return np.hypot(*(self.p - self.q).T) if len(self) else np.zeros(0)

    def count(self, kind: SegmentKind) -> int:
        return int(np.sum(self.codes == _CODE[kind]))


_KINDS = (SegmentKind.VERTICAL, SegmentKind.HORIZONTAL_POSITIVE,
          SegmentKind.HORIZONTAL_NEGATIVE)
_CODE = {k: i for i, k in enumerate(_KINDS)}


def classify_arrays(p: np.ndarray, q: np.ndarray, params: AnnulusParams) -> Decomposition:
    """Vectorized ordering, angle and classification of many segments."""
    c = params.origin
    p = np.asarray(p, dtype=float).reshape(-1, 2)
    q = np.asarray(q, dtype=float).reshape(-1, 2)
    swap = np.hypot(*(q - c).T) > np.hypot(*(p - c).T)
    p, q = np.where(swap[:, None], q, p), np.where(swap[:, None], p, q)
    if np.any(np.all(p == q, axis=1)):
        raise DegenerateSegmentError("degenerate segment in input")
    m = 0.5 * (p + q)
    to_o = c - m
    if np.any(np.all(to_o == 0, axis=1)):
        raise SingularMidpointError("segment midpoint coincides with the center")
    to_q = q - m
    theta = np.arctan2(_cross(to_o, to_q), (to_o * to_q).sum(-1))
    edge = math.pi / 2 - params.alpha
    codes = np.where(theta >= edge, 2, np.where(theta <= -edge, 1, 0))
    return Decomposition(p, q, theta, codes)


def polygonal_approximation(curve: Polyline, params: AnnulusParams,
                            eta: Optional[float] = None,
                            radius_tolerance: Optional[float] = None,
                            max_pieces: int = 1 << 12) -> Decomposition:
    """Classified segments of a curve lying in the closed annulus.

    Consecutive distinct samples form segments; any segment longer than
    ``eta`` is cut into equal pieces (the polyline is the curve, so linear
    interpolation inserts genuine curve points). The distance to the
    center must be nonincreasing up to ``radius_tolerance``
    (default ``1e-9 R``).
    """
    if eta is None:
        eta = eta_for_annulus(params)
    if not eta > 0:
        raise ValidationError("eta must be positive")
    if radius_tolerance is None:
        radius_tolerance = 1e-9 * params.outer_radius
    pts = curve.points
    empty = Decomposition(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0),
                          np.zeros(0, dtype=int))
    if len(pts) < 2:
        return empty
    r = np.hypot(*(pts - params.origin).T)
    out = (r < params.inner_radius * (1 - RANGE_RTOL)) | (r > params.outer_radius * (1 + RANGE_RTOL))
    if np.any(out):
        k = int(np.argmax(out))
        raise OutOfAnnulusError(f"sample {k} at radius {r[k]:.12g} leaves the annulus")
    rise = np.diff(r)
    if np.any(rise > radius_tolerance):
        k = int(np.argmax(rise))
        raise MonotonicityError(
            f"distance to center increases by {rise[k]:.3g} after sample {k}")
    a, b = pts[:-1], pts[1:]
    L = np.hypot(*(b - a).T)
    live = L > 0
    a, b, L = a[live], b[live], L[live]
    if len(a) == 0:
        return empty
    n = np.maximum(1, np.ceil(L / eta)).astype(int)
    if n.max() > max_pieces:
        raise ValidationError(f"a segment needs {n.max()} pieces (cap {max_pieces})")
    idx = np.repeat(np.arange(len(a)), n)
    # position of each piece within its segment
    i = np.arange(len(idx)) - np.repeat(np.cumsum(n) - n, n)
    nn = n[idx]
    d = (b - a)[idx]
    p = a[idx] + d * (i / nn)[:, None]
    q = a[idx] + d * ((i + 1) / nn)[:, None]
    q[i + 1 == nn] = b[idx][i + 1 == nn]
    keep = ~np.all(p == q, axis=1)
    return classify_arrays(p[keep], q[keep], params)


@dataclass(frozen=True)
class BoundCheck:
    total: float
    bound: float
    holds: bool

    def to_dict(self) -> dict:
        return {"total": self.total, "bound": self.bound, "holds": bool(self.holds)}


def _lengths_codes(segments):
    if isinstance(segments, Decomposition):
        return segments.lengths, segments.codes
    L = np.array([s.length for s in segments])
    C = np.array([_CODE[s.kind] for s in segments], dtype=int)
    return L, C


def vertical_bound_check(segments, params: AnnulusParams,
                         tolerance: float = 1e-12) -> BoundCheck:
    """Total vertical length against ``(2 / cos alpha) * width``."""
    L, C = _lengths_codes(segments)
    total = float(L[C == 0].sum()) if len(L) else 0.0
    bound = 2.0 / math.cos(params.alpha) * params.width
    return BoundCheck(total, bound, total <= bound + tolerance * params.outer_radius)


def horizontal_bound_check(segments, params: AnnulusParams,
                           tolerance: float = 1e-12) -> BoundCheck:
    """Total horizontal length against ``8 pi / (1 - lam) * width``."""
    L, C = _lengths_codes(segments)
    total = float(L[C != 0].sum()) if len(L) else 0.0
    bound = 8.0 * math.pi / (1.0 - params.lam) * params.width
    return BoundCheck(total, bound, total <= bound + tolerance * params.outer_radius)


def _orientation(kind: SegmentKind) -> int:
    return 1 if kind is SegmentKind.HORIZONTAL_POSITIVE else -1


def projected_arc(seg: ClassifiedSegment, params: AnnulusParams) -> Tuple[float, float]:
    """Angular interval ``(start, extent)`` of ``pi([p, m])`` on the inner circle."""
    o = _orientation(seg.kind)
    ends = pi_points(np.array([seg.p, seg.m]), params, o) - params.origin
    a0 = math.atan2(ends[0, 1], ends[0, 0])
    a1 = math.atan2(ends[1, 1], ends[1, 0])
    ext = (a1 - a0 + math.pi) % (2 * math.pi) - math.pi
    return a0, ext


def horizontal_arc_check(seg: ClassifiedSegment, params: AnnulusParams) -> SegmentEstimate:
    """Both sides of ``length <= (2 / lam) * arclength(pi([p, m]))``."""
    if seg.kind is SegmentKind.VERTICAL:
        raise ValidationError("arc estimate applies to horizontal segments only")
    _, ext = projected_arc(seg, params)
    arc = abs(ext) * params.inner_radius
    lhs = seg.length
    rhs = 2.0 / params.lam * arc
    return SegmentEstimate(lhs, rhs, lhs <= rhs * (1 + 1e-9) + 1e-15 * params.outer_radius)


def projection_monotone_along(seg: ClassifiedSegment, params: AnnulusParams,
                              samples: int = 33) -> bool:
    """Sampled ``pi`` images along the segment are distinct and angularly monotone."""
    if seg.kind is SegmentKind.VERTICAL:
        raise ValidationError("injectivity check applies to horizontal segments only")
    s = np.linspace(0.0, 1.0, samples)[:, None]
    pts = seg.p + s * (seg.q - seg.p)
    img = pi_points(pts, params, _orientation(seg.kind)) - params.origin
    ang = np.unwrap(np.arctan2(img[:, 1], img[:, 0]))
    step = np.diff(ang)
    return bool(np.all(step > 0) or np.all(step < 0))


def arcs_disjoint(segments: Sequence[ClassifiedSegment], params: AnnulusParams,
                  slack: float = 1e-9) -> Tuple[bool, Optional[Tuple[int, int]]]:
    """Pairwise disjointness of the ``pi([p_i, m_i])`` arcs, per direction class.

    Returns ``(ok, (i, j))`` with the first overlapping pair (indices into
    ``segments``) when ``ok`` is false. ``slack`` is an angle in radians.
    """
    for kind in (SegmentKind.HORIZONTAL_POSITIVE, SegmentKind.HORIZONTAL_NEGATIVE):
        idx = [i for i, s in enumerate(segments) if s.kind is kind]
        if len(idx) < 2:
            continue
        iv = []
        for i in idx:
            a0, ext = projected_arc(segments[i], params)
            lo = a0 if ext >= 0 else a0 + ext
            iv.append((lo % (2 * math.pi), abs(ext), i))
        iv.sort()
        total = sum(e for _, e, _ in iv)
        if total > 2 * math.pi + slack:
            return False, (iv[0][2], iv[1][2])
        for k in range(len(iv)):
            lo, ext, i = iv[k]
            nlo, _, j = iv[(k + 1) % len(iv)]
            if k == len(iv) - 1:
                nlo += 2 * math.pi
            if lo + ext > nlo + slack:
                return False, (min(i, j), max(i, j))
    return True, None


def delta_segments_meet_only_at(x, y, params: AnnulusParams, orientation: int = 1,
                                tol: float = 1e-12) -> bool:
    """Whether ``Delta_x`` and ``Delta_y`` meet at most at ``y``."""
    px = project_pi(x, params, orientation)
    py = project_pi(y, params, orientation)
    a, b = px.x - params.origin, px.pi_x - params.origin
    c, d = py.x - params.origin, py.pi_x - params.origin
    r = b - a
    s = d - c
    den = _cross(r, s)
    scale = params.outer_radius
    if abs(den) < 1e-15 * scale * scale:
        # parallel: they meet only if collinear and overlapping
        if abs(_cross(c - a, r)) > tol * scale * scale:
            return True
        rr = float(np.dot(r, r))
        t0 = float(np.dot(c - a, r)) / rr
        t1 = float(np.dot(d - a, r)) / rr
        lo, hi = min(t0, t1), max(t0, t1)
        return hi < -tol or lo > 1 + tol or (abs(hi - lo) < tol)
    t = _cross(c - a, s) / den
    u = _cross(c - a, r) / den
    if -tol <= t <= 1 + tol and -tol <= u <= 1 + tol:
        return bool(u <= tol * 10)
    return True


@dataclass(frozen=True)
class AnnulusEstimate:
    restricted_length: float
    bound: float
    holds: bool
    fixed_lambda_bound: float
    fixed_lambda_holds: bool
    width: float

    def to_dict(self) -> dict:
        return {"restricted_length": self.restricted_length, "bound": self.bound,
                "holds": bool(self.holds), "fixed_lambda_bound": self.fixed_lambda_bound,
                "fixed_lambda_holds": bool(self.fixed_lambda_holds), "width": self.width}


def annulus_length_estimate(curve: Polyline, params: AnnulusParams,
                            tolerance: float = 1e-12) -> AnnulusEstimate:
    """Length of the curve inside the annulus against ``(8 pi + 2) * width``.

    Also reports the constant that the vertical and horizontal totals give
    at this fixed ``(alpha, lam)``, ``2 / cos alpha + 8 pi / (1 - lam)``.
    """
    L = length_inside(curve, params.inner_radius, params.outer_radius, params.center)
    w = params.width
    bound = LENGTH_BOUND_FACTOR * w
    fixed = (2.0 / math.cos(params.alpha) + 8.0 * math.pi / (1.0 - params.lam)) * w
    slack = tolerance * max(1.0, params.outer_radius)
    return AnnulusEstimate(L, bound, L <= bound + slack, fixed, L <= fixed + slack, w)


@dataclass(frozen=True)
class FullBound:
    total_by_annuli: float
    bound: float
    holds: bool
    outer_radius: float
    widths_sum: float
    core_length: float
    outside_length: float
    annuli: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"total_by_annuli": self.total_by_annuli, "bound": self.bound,
                "holds": bool(self.holds), "outer_radius": self.outer_radius,
                "widths_sum": self.widths_sum, "core_length": self.core_length,
                "outside_length": self.outside_length, "annuli": list(self.annuli)}


def geometric_radii(R0: float, lam: float, r_min: float) -> List[float]:
    """``R0, lam R0, lam^2 R0, ...`` down to the first radius below ``r_min``."""
    radii = [R0]
    while radii[-1] > r_min and len(radii) < 10_000:
        radii.append(radii[-1] * lam)
    return radii


def full_length_bound(curve: Polyline, lam: float = 0.5, center=(0.0, 0.0),
                      convergence_tolerance: Optional[float] = None,
                      tolerance: float = 1e-12) -> FullBound:
    """Sum of per-annulus lengths over ``R_{i+1} = lam R_i`` against ``(8 pi + 2) R0``.

    ``R0`` is the distance of the first sample from the center, and the
    last sample must sit at the center within ``convergence_tolerance``
    (default ``1e-6 * R0``). Whatever lies inside the smallest circle is
    added as the core length, so the total equals the length of the part
    of the curve inside the disk of radius ``R0``.
    """
    if not 0.0 < lam < 1.0:
        raise ValidationError(f"lam must lie in (0, 1), got {lam}")
    c = np.asarray(center, dtype=float)
    R0 = float(np.hypot(*(curve.first - c)))
    if R0 == 0.0:
        raise ConvergenceError("curve starts at the center")
    tol = 1e-6 * R0 if convergence_tolerance is None else convergence_tolerance
    r_last = float(np.hypot(*(curve.last - c)))
    if r_last > tol:
        raise ConvergenceError(
            f"last sample at distance {r_last:.3g} from the center exceeds {tol:.3g}")
    radii = geometric_radii(R0, lam, max(r_last, 1e-300))
    annuli = []
    total = 0.0
    widths = 0.0
    for R, r in zip(radii[:-1], radii[1:]):
        Li = length_inside(curve, r, R, c)
        annuli.append({"outer": R, "inner": r, "length": Li,
                       "bound": LENGTH_BOUND_FACTOR * (R - r),
                       "holds": bool(Li <= LENGTH_BOUND_FACTOR * (R - r) + tolerance * R)})
        total += Li
        widths += R - r
    core = length_inside(curve, 0.0, radii[-1], c)
    total += core
    widths += radii[-1]
    outside = max(0.0, length(curve) - length_inside(curve, 0.0, R0, c))
    bound = LENGTH_BOUND_FACTOR * R0
    return FullBound(total, bound, total <= bound + tolerance * R0, R0, widths,
                     core, outside, annuli)


def segments_to_rows(segments: Sequence[ClassifiedSegment]):
    """Rows ``i,px,py,qx,qy,theta,kind,length`` for CSV export."""
    return [(i, float(s.p[0]), float(s.p[1]), float(s.q[0]), float(s.q[1]),
             float(s.theta), s.kind.value, s.length) for i, s in enumerate(segments)]


SEGMENT_HEADER = ("i", "px", "py", "qx", "qy", "theta", "kind", "length")
