"""Planar scalar fields with gradients, proximal maps and class evidence.

Every evaluator is vectorized over a trailing axis of length 2: ``value``
maps ``(..., 2) -> (...)`` and ``gradient`` maps ``(..., 2) -> (..., 2)``.
Class certificates here are sampled evidence, never proofs.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import ProximalSolveError, ValidationError


class FieldClass(enum.Enum):
    CONVEX = "convex"
    QUASICONVEX = "quasiconvex"
    NEITHER = "neither"


ProxMap = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ScalarField:
    """A planar function with its gradient.

    ``prox(x, h)`` is the closed-form proximal map when one is known.
    ``minimizer`` is the known limit point of descent orbits, if any.
    ``phase_rate`` is set only for the spiral example (see :mod:`.flow`).
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    declared_class: FieldClass
    minimizer: Optional[Tuple[float, float]] = None
    prox: Optional[ProxMap] = None
    phase_rate: Optional[Callable[[float, float], float]] = None

    def __call__(self, x) -> np.ndarray:
        return self.value(np.asarray(x, dtype=float))

    def grad(self, x) -> np.ndarray:
        return self.gradient(np.asarray(x, dtype=float))

    @property
    def is_convex(self) -> bool:
        return self.declared_class is FieldClass.CONVEX

    @property
    def is_quasiconvex(self) -> bool:
        return self.declared_class in (FieldClass.CONVEX, FieldClass.QUASICONVEX)


def _spd(matrix) -> np.ndarray:
    A = np.asarray(matrix, dtype=float)
    if A.shape != (2, 2) or not np.all(np.isfinite(A)):
        raise ValidationError(f"expected a finite 2x2 matrix, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValidationError("matrix is not symmetric")
    if np.linalg.eigvalsh(A).min() <= 0:
        raise ValidationError("matrix is not positive definite")
    return 0.5 * (A + A.T)


def quadratic_field(matrix, center=(0.0, 0.0)) -> ScalarField:
    """``f(x) = 1/2 <A (x - c), x - c>`` for symmetric positive definite ``A``."""
    A = _spd(matrix)
    c = np.asarray(center, dtype=float)

    def value(x):
        d = x - c
        return 0.5 * np.einsum("...i,ij,...j->...", d, A, d)

    def gradient(x):
        return (x - c) @ A

    def prox(x, h):
        return np.linalg.solve(np.eye(2) + h * A, np.asarray(x) + h * (A @ c))

    name = "quadratic:" + ",".join(format(v, ".17g") for v in A.ravel())
    if np.any(c):
        name += "@" + ",".join(format(v, ".17g") for v in c)
    return ScalarField(name, value, gradient, FieldClass.CONVEX,
                       tuple(float(v) for v in c), prox)


def log_quadratic_field(matrix) -> ScalarField:
    """``log(1 + 1/2 <A x, x>)``: quasiconvex, not convex far from the origin."""
    A = _spd(matrix)

    def value(x):
        return np.log1p(0.5 * np.einsum("...i,ij,...j->...", x, A, x))

    def gradient(x):
        q = 0.5 * np.einsum("...i,ij,...j->...", x, A, x)
        return (x @ A) / (1.0 + q)[..., None]

    return ScalarField("logquad:" + ",".join(format(v, ".17g") for v in A.ravel()),
                       value, gradient, FieldClass.QUASICONVEX, (0.0, 0.0))


def norm_field(center=(0.0, 0.0)) -> ScalarField:
    """``f(x) = |x - c|``; its proximal map is the soft threshold."""
    c = np.asarray(center, dtype=float)

    def value(x):
        d = x - c
        return np.hypot(d[..., 0], d[..., 1])

    def gradient(x):
        d = x - c
        n = np.hypot(d[..., 0], d[..., 1])[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(n > 0, d / n, 0.0)

    def prox(x, h):
        d = np.asarray(x, dtype=float) - c
        n = float(np.hypot(*d))
        if n <= h:
            return c.copy()
        return c + d * (1.0 - h / n)

    return ScalarField("norm", value, gradient, FieldClass.CONVEX,
                       tuple(float(v) for v in c), prox)


def max_affine_field(slopes, offsets) -> ScalarField:
    """``f(x) = max_i <a_i, x> + b_i`` with an exact active-set proximal map."""
    A = np.asarray(slopes, dtype=float)
    b = np.asarray(offsets, dtype=float)
    if A.ndim != 2 or A.shape[1] != 2 or b.shape != (A.shape[0],) or len(b) < 1:
        raise ValidationError("need slopes of shape (k, 2) and offsets of shape (k,)")

    def value(x):
        return (x @ A.T + b).max(axis=-1)

    def gradient(x):
        return A[np.argmax(x @ A.T + b, axis=-1)]

    def prox(x, h):
        return max_affine_prox(A, b, np.asarray(x, dtype=float), h)

    name = "maxaffine:" + ";".join(
        ",".join(format(v, ".17g") for v in (*a, bb)) for a, bb in zip(A, b))
    return ScalarField(name, value, gradient, FieldClass.CONVEX, None, prox)


def max_affine_prox(A: np.ndarray, b: np.ndarray, x: np.ndarray, h: float,
                    tol: float = 1e-12) -> np.ndarray:
    """Exact minimizer of ``max_i(<a_i, y> + b_i) + |y - x|^2 / (2h)``.

    The optimum is ``y = x - h A_S^T mu`` for an active set ``S`` (at most
    three pieces in the plane) with ``mu`` in the simplex and all active
    pieces tied. Every small active set is tried and the KKT conditions
    decide.
    """
    k = len(b)
    scale = 1.0 + float(np.abs(A).max()) * (1.0 + float(np.abs(x).max()) + h) + float(np.abs(b).max())
    best = None
    for size in (1, 2, 3):
        for S in itertools.combinations(range(k), size):
            AS = A[list(S)]
            # unknowns mu (size) and t: a_i.(x - h AS^T mu) + b_i - t = 0, sum mu = 1
            M = np.zeros((size + 1, size + 1))
            rhs = np.zeros(size + 1)
            M[:size, :size] = -h * AS @ AS.T
            M[:size, size] = -1.0
            rhs[:size] = -(AS @ x + b[list(S)])
            M[size, :size] = 1.0
            rhs[size] = 1.0
            try:
                sol = np.linalg.solve(M, rhs)
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(sol)):
                continue
            mu, t = sol[:size], sol[size]
            if np.any(mu < -tol):
                continue
            y = x - h * AS.T @ mu
            vals = A @ y + b
            if np.all(vals <= t + tol * scale):
                cand = (float(vals.max() + np.dot(y - x, y - x) / (2 * h)), y)
                if best is None or cand[0] < best[0] - 1e-15:
                    best = cand
        if best is not None:
            return best[1]
    raise ProximalSolveError("no active set satisfied the optimality conditions")


def cubic_field() -> ScalarField:
    """``f(x, y) = x^3``: quasiconvex (monotone in one variable), not convex."""

    def value(x):
        return x[..., 0] ** 3

    def gradient(x):
        g = np.zeros_like(x)
        g[..., 0] = 3.0 * x[..., 0] ** 2
        return g

    return ScalarField("cubic", value, gradient, FieldClass.QUASICONVEX)


# below this radius every spiral term carries exp(-1/r) == 0 in double precision
SPIRAL_ZERO_RADIUS = 1.0 / 745.0


def spiral_value(x: np.ndarray) -> np.ndarray:
    r = np.hypot(x[..., 0], x[..., 1])
    th = np.arctan2(x[..., 1], x[..., 0])
    live = r > SPIRAL_ZERO_RADIUS
    rs = np.where(live, r, 1.0)
    with np.errstate(under="ignore"):
        v = np.exp(-1.0 / rs) * (1.0 + rs + np.sin(1.0 / rs + th))
    return np.where(live, v, 0.0)


def spiral_gradient(x: np.ndarray) -> np.ndarray:
    """Analytic gradient of ``exp(-1/r) (1 + r + sin(1/r + theta))``.

    With ``phi = 1/r + theta`` and ``E = exp(-1/r)``:
    ``df/dr = E ((1 + r + sin phi - cos phi) / r^2 + 1)`` and
    ``(1/r) df/dtheta = E cos(phi) / r``.
    """
    r = np.hypot(x[..., 0], x[..., 1])
    live = r > SPIRAL_ZERO_RADIUS
    rs = np.where(live, r, 1.0)
    th = np.arctan2(x[..., 1], x[..., 0])
    phi = 1.0 / rs + th
    s, c = np.sin(phi), np.cos(phi)
    with np.errstate(under="ignore"):
        E = np.exp(-1.0 / rs)
        g_r = E * ((1.0 + rs + s - c) / rs ** 2 + 1.0)
        g_t = E * c / rs
    er = np.stack([np.cos(th), np.sin(th)], axis=-1)
    et = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    g = g_r[..., None] * er + g_t[..., None] * et
    return np.where(live[..., None], g, 0.0)


def spiral_phase_rate(u: float, psi: float) -> float:
    """Valley-phase equation of the spiral orbit in ``u = 1/r``.

    Along a gradient orbit, ``d theta / du = -cos(phi) / D`` with
    ``D = u^2 (1 + r + sin phi - cos phi) + 1``. Writing
    ``phi = u + theta = psi + 3 pi / 2`` (``psi = 0`` is the valley floor)
    gives ``d psi / du = 1 - sin(psi) / D`` with
    ``D = u^2 (1/u + 2 sin^2(psi/2) - sin psi) + 1``. The phase stays near
    zero, which keeps this equation free of the ``u^2`` cancellation that
    a direct angle formulation suffers from.
    """
    sp = math.sin(psi)
    D = u * u * (1.0 / u + 2.0 * math.sin(0.5 * psi) ** 2 - sp) + 1.0
    return 1.0 - sp / D


def spiral_field() -> ScalarField:
    """``exp(-1/r) (1 + r + sin(1/r + theta))``, zero at the origin.

    Smooth, positive away from the origin, with no critical point except
    the origin, and not quasiconvex: its descent orbits spiral forever.
    """
    return ScalarField("spiral", spiral_value, spiral_gradient, FieldClass.NEITHER,
                       (0.0, 0.0), None, spiral_phase_rate)


def prox_descent(field: ScalarField, x, h: float, tol: float = 1e-10,
                 max_iter: int = 10_000) -> np.ndarray:
    """Proximal point by damped gradient descent with Armijo backtracking.

    Used for smooth fields without a closed-form map. The objective
    ``f(y) + |y - x|^2 / (2h)`` is minimized from ``y = x`` until the
    gradient norm drops below ``tol * (1 + |x|)``.
    """
    x = np.asarray(x, dtype=float)
    y = x.copy()

    def obj(z):
        return float(field.value(z)) + float(np.dot(z - x, z - x)) / (2 * h)

    def grad(z):
        return field.gradient(z) + (z - x) / h

    fy = obj(y)
    g = grad(y)
    step = h
    for _ in range(max_iter):
        gn = float(np.hypot(*g))
        if gn <= tol * (1.0 + float(np.hypot(*x))):
            return y
        while True:
            cand = y - step * g
            fc = obj(cand)
            gc = grad(cand)
            want = 0.5 * step * gn * gn
            if want > 4e-16 * (1.0 + abs(fy)):
                if fc <= fy - want:
                    break
            # decrease below rounding: judge progress by the gradient instead
            elif fc <= fy + 4e-16 * (1.0 + abs(fy)) and float(np.hypot(*gc)) < gn:
                break
            step *= 0.5
            if step < 1e-300:
                raise ProximalSolveError("line search collapsed")
        y, fy, g = cand, fc, gc
        step *= 2.0
    raise ProximalSolveError(f"inner descent did not converge in {max_iter} steps")


def prox_of(field: ScalarField, x, h: float) -> np.ndarray:
    if field.prox is not None:
        return np.asarray(field.prox(np.asarray(x, dtype=float), h), dtype=float)
    return prox_descent(field, x, h)


@dataclass(frozen=True)
class SampledVerdict:
    """Outcome of a randomized class check; ``pair`` is a counterexample."""

    passed: bool
    pair: Optional[Tuple[Tuple[float, float], Tuple[float, float]]]
    samples: int
    seed: int
    margin: float

    def to_dict(self) -> dict:
        return {"passed": bool(self.passed),
                "pair": None if self.pair is None else [list(p) for p in self.pair],
                "samples": self.samples, "seed": self.seed, "margin": self.margin}


def sample_disk(rng: np.random.Generator, n: int, radius: float,
                center=(0.0, 0.0)) -> np.ndarray:
    """``n`` points uniform in a disk."""
    r = radius * np.sqrt(rng.random(n))
    a = 2 * np.pi * rng.random(n)
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=1) + np.asarray(center, dtype=float)


def _first_bad(bad: np.ndarray, xs, ys, margin_vals, samples, seed) -> SampledVerdict:
    if np.any(bad):
        k = int(np.argmax(bad))
        return SampledVerdict(False, (tuple(map(float, xs[k])), tuple(map(float, ys[k]))),
                              samples, seed, float(margin_vals[k]))
    worst = float(margin_vals.min()) if len(margin_vals) else 0.0
    return SampledVerdict(True, None, samples, seed, worst)


def check_quasiconvex_sampled(field: ScalarField, probe_pairs: int = 100_000,
                              domain_radius: float = 1.0, seed: int = 0,
                              tolerance: float = 1e-12,
                              center=(0.0, 0.0)) -> SampledVerdict:
    """Search for ``<grad f(x), y - x> > 0`` with ``f(y) < f(x)``.

    A pair is a violation when ``f(y) < f(x) - tolerance * (1 + |f(x)|)``.
    """
    rng = np.random.default_rng(seed)
    xs = sample_disk(rng, probe_pairs, domain_radius, center)
    ys = sample_disk(rng, probe_pairs, domain_radius, center)
    fx, fy = field.value(xs), field.value(ys)
    slope = np.einsum("ij,ij->i", field.gradient(xs), ys - xs)
    margin = fy - fx + tolerance * (1.0 + np.abs(fx))
    bad = (slope > 0) & (margin < 0)
    return _first_bad(bad, xs, ys, np.where(slope > 0, margin, np.inf), probe_pairs, seed)


def check_convex_sampled(field: ScalarField, probes: int = 100_000,
                         domain_radius: float = 1.0, seed: int = 0,
                         tolerance: float = 1e-12,
                         center=(0.0, 0.0)) -> SampledVerdict:
    """Midpoint convexity ``f((x+y)/2) <= (f(x) + f(y))/2 + tol`` on random pairs."""
    rng = np.random.default_rng(seed)
    xs = sample_disk(rng, probes, domain_radius, center)
    ys = sample_disk(rng, probes, domain_radius, center)
    fx, fy = field.value(xs), field.value(ys)
    fm = field.value(0.5 * (xs + ys))
    margin = 0.5 * (fx + fy) - fm + tolerance * (1.0 + np.abs(fx) + np.abs(fy))
    return _first_bad(margin < 0, xs, ys, margin, probes, seed)


def gradient_fd_error(field: ScalarField, points: np.ndarray) -> np.ndarray:
    """Central-difference residual ``|fd - grad|`` with step ``1e-6 (1 + |x|)``."""
    pts = np.asarray(points, dtype=float)
    h = 1e-6 * (1.0 + np.hypot(pts[:, 0], pts[:, 1]))
    fd = np.empty_like(pts)
    for k in range(2):
        e = np.zeros(2)
        e[k] = 1.0
        step = h[:, None] * e
        fd[:, k] = (field.value(pts + step) - field.value(pts - step)) / (2 * h)
    return np.hypot(*(fd - field.gradient(pts)).T)


def check_gradient(field: ScalarField, points: np.ndarray, rtol: float = 1e-5) -> bool:
    """Analytic gradient agrees with central differences at every point.

    The residual must be at most ``rtol * |grad f|`` plus the rounding
    floor ``1e-9 * (1 + |f|)`` of the difference quotient.
    """
    pts = np.asarray(points, dtype=float)
    err = gradient_fd_error(field, pts)
    g = np.hypot(*field.gradient(pts).T)
    floor = 1e-9 * (1.0 + np.abs(field.value(pts)))
    return bool(np.all(err <= rtol * g + floor))


def check_coercive(field: ScalarField, radii: Sequence[float] = (1, 10, 100, 1000),
                   samples: int = 256, center=(0.0, 0.0)) -> bool:
    """Minimum of ``f`` over circles of growing radius increases strictly."""
    a = 2 * np.pi * np.arange(samples) / samples
    ring = np.stack([np.cos(a), np.sin(a)], axis=1)
    mins = [float(field.value(ring * r + np.asarray(center)).min()) for r in radii]
    return bool(np.all(np.diff(mins) > 0))


def _floats(text: str, what: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad number in {what}: {text!r}") from exc
    if not all(math.isfinite(v) for v in vals):
        raise ValidationError(f"non-finite number in {what}")
    return vals


def parse_field(text: str) -> ScalarField:
    """Build a field from its command-line name.

    Accepted forms: ``quadratic:a,b,c,d[@cx,cy]`` (row-major matrix),
    ``logquad:a,b,c,d``, ``spiral``, ``norm[@cx,cy]``, ``cubic`` and
    ``maxaffine:a1,a2,b;a1,a2,b;...``.
    """
    text = text.strip()
    head, _, rest = text.partition(":")
    center = (0.0, 0.0)
    if "@" in head:
        head, _, c = head.partition("@")
        center = tuple(_floats(c, "center"))
    if "@" in rest:
        rest, _, c = rest.partition("@")
        center = tuple(_floats(c, "center"))
    if len(center) != 2:
        raise ValidationError("center needs two coordinates")
    if head == "quadratic":
        vals = _floats(rest, "matrix")
        if len(vals) != 4:
            raise ValidationError("quadratic needs four matrix entries")
        return quadratic_field(np.reshape(vals, (2, 2)), center)
    if head == "logquad":
        vals = _floats(rest, "matrix")
        if len(vals) != 4:
            raise ValidationError("logquad needs four matrix entries")
        return log_quadratic_field(np.reshape(vals, (2, 2)))
    if head == "spiral" and not rest:
        return spiral_field()
    if head == "norm" and not rest:
        return norm_field(center)
    if head == "cubic" and not rest:
        return cubic_field()
    if head == "maxaffine":
        rows = [_floats(p, "affine piece") for p in rest.split(";") if p.strip()]
        if not rows or any(len(r) != 3 for r in rows):
            raise ValidationError("maxaffine pieces need three numbers a1,a2,b")
        arr = np.array(rows)
        return max_affine_field(arr[:, :2], arr[:, 2])
    raise ValidationError(f"unknown field {text!r}")


def grid_rows(field: ScalarField, extent: float = 1.0, n: int = 101):
    """``(x, y, f)`` rows on a square grid ``[-extent, extent]^2``."""
    g = np.linspace(-extent, extent, n)
    X, Y = np.meshgrid(g, g, indexing="xy")
    F = field.value(np.stack([X, Y], axis=-1))
    return [(float(x), float(y), float(f)) for x, y, f in zip(X.ravel(), Y.ravel(), F.ravel())]
