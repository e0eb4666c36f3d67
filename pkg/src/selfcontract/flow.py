"""Descent orbits: gradient flow, proximal iterations, and orbit reports.

``integrate_gradient`` solves ``x' = -grad f(x)``. The spiral example is
handled in its own coordinates (see :func:`integrate_spiral`) because its
gradient is of size ``exp(-1/r)``, which makes the flow in time hopeless
to follow for more than a few turns.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .curve import Polyline, ScVerdict, check_main_bound, check_self_contracted
from .errors import (FieldEvaluationError, GeometryError, StiffnessError,
                     ValidationError)
from .fields import ScalarField, prox_of

METHODS = ("adaptive", "rk4", "proximal")
PARAMETERIZATIONS = ("auto", "time", "inverse_radius")


class Termination(enum.Enum):
    TIME_LIMIT = "TimeLimit"
    GRADIENT_VANISHED = "GradientVanished"
    REACHED_LIMIT = "ReachedLimit"


@dataclass(frozen=True)
class FlowConfig:
    """Integrator choice, step control and stop rules.

    ``step`` is the RK4 or proximal step; ``rtol``/``atol`` drive the
    adaptive solver. ``refine`` dense samples are taken per adaptive step.
    With the inverse-radius parameterization ``t_max`` is the length of
    the ``u = 1/r`` interval, which matches the parameter ``t`` of the
    reference spiral ``r = (3 pi / 2 + t)^-1``.
    """

    method: str = "adaptive"
    step: float = 1e-2
    rtol: float = 1e-9
    atol: float = 1e-9
    t_max: float = 10.0
    stop_gradient_norm: float = 1e-12
    stop_radius: float = 1e-10
    limit: Optional[tuple] = None
    refine: int = 4
    samples_per_turn: int = 32
    parameterization: str = "auto"
    max_samples: int = 2_000_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.parameterization not in PARAMETERIZATIONS:
            raise ValidationError(f"parameterization must be one of {PARAMETERIZATIONS}")
        for name in ("step", "rtol", "atol", "t_max"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValidationError(f"{name} must be positive, got {v}")
        for name in ("stop_gradient_norm", "stop_radius"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"{name} must be nonnegative")
        if self.refine < 1 or self.samples_per_turn < 4:
            raise ValidationError("refine >= 1 and samples_per_turn >= 4 required")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Orbit:
    polyline: Polyline
    f_values: np.ndarray
    terminated_by: Termination
    metadata: dict = field(default_factory=dict)

    @property
    def points(self) -> np.ndarray:
        return self.polyline.points

    @property
    def times(self) -> np.ndarray:
        return self.polyline.params

    def lyapunov_ok(self, tolerance: float = 1e-8) -> bool:
        """``f`` never increases by more than ``tolerance * (1 + |f_0|)``."""
        f = self.f_values
        if len(f) < 2:
            return True
        return bool(np.all(np.diff(f) <= tolerance * (1.0 + abs(float(f[0])))))


def _limit_point(fld: ScalarField, config: FlowConfig) -> Optional[np.ndarray]:
    if config.limit is not None:
        return np.asarray(config.limit, dtype=float)
    if fld.minimizer is not None:
        return np.asarray(fld.minimizer, dtype=float)
    return None


def _grad_checked(fld: ScalarField, x: np.ndarray) -> np.ndarray:
    g = np.asarray(fld.gradient(x), dtype=float)
    if not np.all(np.isfinite(g)):
        raise FieldEvaluationError(f"non-finite gradient at {np.asarray(x).tolist()}")
    return g


def _make_orbit(fld, ts, xs, term, meta) -> Orbit:
    ts = np.asarray(ts, dtype=float)
    xs = np.asarray(xs, dtype=float)
    keep = np.concatenate([[True], np.diff(ts) > 0])
    pl = Polyline(xs[keep], ts[keep])
    return Orbit(pl, np.asarray(fld.value(pl.points), dtype=float), term, meta)


def _stop_reason(fld, x, limit, config) -> Optional[Termination]:
    if limit is not None and config.stop_radius > 0 and \
            float(np.hypot(*(x - limit))) < config.stop_radius:
        return Termination.REACHED_LIMIT
    if config.stop_gradient_norm > 0 and \
            float(np.hypot(*_grad_checked(fld, x))) < config.stop_gradient_norm:
        return Termination.GRADIENT_VANISHED
    return None


def _rk4(fld: ScalarField, x0: np.ndarray, config: FlowConfig) -> Orbit:
    h = config.step
    n = int(math.ceil(config.t_max / h - 1e-12))
    limit = _limit_point(fld, config)
    ts, xs = [0.0], [x0.copy()]
    x = x0.copy()
    term = _stop_reason(fld, x, limit, config) or Termination.TIME_LIMIT
    if term is not Termination.TIME_LIMIT:
        return _make_orbit(fld, ts, xs, term, {"steps": 0})

    def F(z):
        return -_grad_checked(fld, z)

    for k in range(1, n + 1):
        hk = min(h, config.t_max - ts[-1])
        k1 = F(x)
        k2 = F(x + 0.5 * hk * k1)
        k3 = F(x + 0.5 * hk * k2)
        k4 = F(x + hk * k3)
        x = x + hk / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        ts.append(ts[-1] + hk)
        xs.append(x.copy())
        why = _stop_reason(fld, x, limit, config)
        if why is not None:
            term = why
            break
        if len(xs) >= config.max_samples:
            break
    return _make_orbit(fld, ts, xs, term, {"steps": len(ts) - 1})


def _adaptive(fld: ScalarField, x0: np.ndarray, config: FlowConfig) -> Orbit:
    limit = _limit_point(fld, config)
    early = _stop_reason(fld, x0, limit, config)
    if early is not None:
        return _make_orbit(fld, [0.0], [x0], early, {"steps": 0})

    def rhs(_t, y):
        return -_grad_checked(fld, y)

    events = []
    kinds = []
    if config.stop_gradient_norm > 0:
        def grad_event(_t, y):
            return float(np.hypot(*fld.gradient(y))) - config.stop_gradient_norm
        grad_event.terminal = True
        grad_event.direction = -1
        events.append(grad_event)
        kinds.append(Termination.GRADIENT_VANISHED)
    if limit is not None and config.stop_radius > 0:
        def radius_event(_t, y):
            return float(np.hypot(*(y - limit))) - config.stop_radius
        radius_event.terminal = True
        radius_event.direction = -1
        events.append(radius_event)
        kinds.append(Termination.REACHED_LIMIT)
    sol = solve_ivp(rhs, (0.0, config.t_max), x0, method="DOP853",
                    rtol=config.rtol, atol=config.atol, dense_output=True,
                    events=events or None)
    if sol.status == -1:
        partial = _make_orbit(fld, sol.t, sol.y.T, Termination.TIME_LIMIT, {})
        raise StiffnessError(f"integrator failed: {sol.message}", partial)
    term = Termination.TIME_LIMIT
    if sol.status == 1:
        for kind, tev in zip(kinds, sol.t_events):
            if len(tev):
                term = kind
                break
    # dense samples inside every accepted step
    ts = [sol.t[0]]
    for a, b in zip(sol.t[:-1], sol.t[1:]):
        ts.extend(a + (b - a) * np.arange(1, config.refine + 1) / config.refine)
    ts = np.asarray(ts)
    xs = np.array([sol.sol(t) for t in ts])
    xs[0] = x0
    meta = {"steps": int(len(sol.t) - 1), "nfev": int(sol.nfev)}
    return _make_orbit(fld, ts, xs, term, meta)


SPIRAL_PHASE_OFFSET = 1.5 * math.pi


def integrate_spiral(fld: ScalarField, x0, config: FlowConfig) -> Orbit:
    """Spiral orbit traced by inverse radius ``u = 1/r``.

    The valley phase ``psi = u + theta - 3 pi / 2`` solves the scalar
    equation ``fld.phase_rate`` (stiff, hence BDF). Samples are uniform in
    ``u`` with ``samples_per_turn`` per ``2 pi``; sample parameters are
    ``u - u0``. Along the orbit ``theta`` decreases roughly like
    ``-(u - u0)``, so ``t_max = T`` covers about ``T / (2 pi)`` turns.
    """
    if fld.phase_rate is None:
        raise ValidationError(f"field {fld.name!r} has no phase equation")
    x0 = np.asarray(x0, dtype=float)
    r0 = float(np.hypot(*x0))
    if r0 == 0.0:
        raise ValidationError("start point must differ from the origin")
    th0 = math.atan2(x0[1], x0[0])
    u0 = 1.0 / r0
    psi0 = math.remainder(u0 + th0 - SPIRAL_PHASE_OFFSET, 2 * math.pi)
    u1 = u0 + config.t_max
    rate = fld.phase_rate
    sol = solve_ivp(lambda u, y: [rate(u, y[0])], (u0, u1), [psi0], method="BDF",
                    rtol=min(config.rtol, 1e-8), atol=1e-12, dense_output=True)
    if sol.status != 0:
        raise StiffnessError(f"phase integration failed: {sol.message}")
    n = int(math.ceil(config.t_max * config.samples_per_turn / (2 * math.pi))) + 1
    n = max(n, 2)
    if n > config.max_samples:
        raise ValidationError(f"{n} samples requested, cap is {config.max_samples}")
    us = np.linspace(u0, u1, n)
    # point-wise dense evaluation; large vectorized calls are very slow here
    psi = np.array([sol.sol(u)[0] for u in us])
    # multiple of 2 pi dropped when psi0 was reduced; restores theta(u0) = th0
    wrap = (u0 + th0 - SPIRAL_PHASE_OFFSET) - psi0
    th = psi - us + SPIRAL_PHASE_OFFSET + wrap
    xs = np.stack([np.cos(th), np.sin(th)], axis=1) / us[:, None]
    xs[0] = x0
    meta = {"parameterization": "inverse_radius", "steps": int(len(sol.t) - 1),
            "u0": u0, "u1": u1}
    return _make_orbit(fld, us - u0, xs, Termination.TIME_LIMIT, meta)


def integrate_gradient(fld: ScalarField, x0, config: Optional[FlowConfig] = None) -> Orbit:
    """Orbit of ``x' = -grad f(x)`` from ``x0`` until a stop rule fires."""
    config = config or FlowConfig()
    x0 = np.asarray(x0, dtype=float).reshape(2)
    if not np.all(np.isfinite(x0)):
        raise ValidationError("x0 must be finite")
    use_phase = config.parameterization == "inverse_radius" or (
        config.parameterization == "auto" and fld.phase_rate is not None)
    if use_phase:
        orbit = integrate_spiral(fld, x0, config)
    elif config.method == "rk4":
        orbit = _rk4(fld, x0, config)
    elif config.method == "adaptive":
        orbit = _adaptive(fld, x0, config)
    else:
        raise ValidationError("use integrate_proximal for the proximal method")
    orbit.metadata.update({"field": fld.name, "config": config.to_dict(),
                           "terminated_by": orbit.terminated_by.value,
                           "x0": [float(v) for v in x0]})
    return orbit


def integrate_proximal(fld: ScalarField, x0, step: float, iterations: int,
                       stop_tolerance: float = 1e-13) -> Orbit:
    """Backward steps ``x_{k+1} = argmin_y f(y) + |y - x_k|^2 / (2 step)``.

    Stops early once an iterate is a fixed point, i.e. moves by at most
    ``stop_tolerance * (1 + |x_k|)``; for polyhedral functions this
    happens after finitely many steps.
    """
    if not fld.is_convex:
        raise ValidationError(f"field {fld.name!r} is not declared convex")
    if not (step > 0 and math.isfinite(step)):
        raise ValidationError("step must be positive")
    if iterations < 1:
        raise ValidationError("iterations must be positive")
    x = np.asarray(x0, dtype=float).reshape(2)
    xs = [x.copy()]
    term = Termination.TIME_LIMIT
    for _ in range(iterations):
        y = prox_of(fld, x, step)
        if float(np.hypot(*(y - x))) <= stop_tolerance * (1.0 + float(np.hypot(*x))):
            term = Termination.GRADIENT_VANISHED
            break
        xs.append(y)
        x = y
    ts = step * np.arange(len(xs))
    orbit = _make_orbit(fld, ts, np.array(xs), term, {})
    orbit.metadata.update({"field": fld.name, "method": "proximal", "step": step,
                           "iterations": len(xs) - 1,
                           "terminated_by": term.value})
    return orbit


def proximal_step_halving(fld: ScalarField, x0, step: float, horizon: float) -> float:
    """Sup distance between proximal orbits with ``step`` and ``step / 2``.

    Compared at the common times ``k * step`` up to ``horizon``.
    """
    n = int(round(horizon / step))
    a = integrate_proximal(fld, x0, step, n).points
    b = integrate_proximal(fld, x0, step / 2, 2 * n).points
    m = min(len(a), (len(b) + 1) // 2)
    bb = b[::2][:m]
    # a fixed point ends the orbit early; pad with the last iterate
    if len(a) < m:
        a = np.vstack([a, np.repeat(a[-1:], m - len(a), 0)])
    return float(np.hypot(*(a[:m] - bb).T).max())


@dataclass(frozen=True)
class OrbitReport:
    verdict: ScVerdict
    length: float
    gap: float
    bound: float
    bound_holds: bool
    expected_self_contracted: bool

    def to_dict(self) -> dict:
        d = self.verdict.to_dict()
        d.update({"length": self.length, "gap": self.gap, "bound": self.bound,
                  "bound_holds": bool(self.bound_holds),
                  "expected_self_contracted": bool(self.expected_self_contracted)})
        return d


def orbit_self_contracted_report(orbit: Orbit, tolerance: Optional[float] = None,
                                 declared_quasiconvex: Optional[bool] = None) -> OrbitReport:
    """Self-contractedness verdict plus the length-versus-gap comparison."""
    v = check_self_contracted(orbit.polyline, tolerance)
    b = check_main_bound(orbit.polyline, tolerance)
    expected = bool(declared_quasiconvex) if declared_quasiconvex is not None else False
    return OrbitReport(v, b.length, b.gap, b.bound, b.holds, expected)


def winding_number(curve: Polyline, center=(0.0, 0.0)) -> float:
    """Total signed turns of the curve around ``center`` (counterclockwise positive)."""
    rel = curve.points - np.asarray(center, dtype=float)
    if np.any(np.all(rel == 0.0, axis=1)):
        raise GeometryError("a sample coincides with the center")
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    inc = np.diff(ang)
    # wrap increments into (-pi, pi]
    inc = -np.remainder(-inc + np.pi, 2 * np.pi) + np.pi
    return float(inc.sum() / (2 * np.pi))


def cumulative_angle(curve: Polyline, center=(0.0, 0.0)) -> np.ndarray:
    rel = curve.points - np.asarray(center, dtype=float)
    return np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))


def closed_form_error(matrix, x0, orbit: Orbit) -> float:
    """Relative sup error of a quadratic-field orbit against ``expm(-A t) x0``.

    ``max_k |x_k - x*(t_k)| / max_k |x*(t_k)|``.
    """
    A = np.asarray(matrix, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    w, V = np.linalg.eigh(A)
    c = V.T @ x0
    ts = orbit.times
    exact = (np.exp(-np.outer(ts, w)) * c) @ V.T
    err = np.hypot(*(orbit.points - exact).T).max()
    return float(err / np.hypot(*exact.T).max())


def expm_flow(matrix, x0, t: float) -> np.ndarray:
    """``expm(-A t) x0`` by scipy's matrix exponential (independent oracle)."""
    return expm(-np.asarray(matrix, dtype=float) * t) @ np.asarray(x0, dtype=float)


def reference_spiral_length(T: float, r0_param: float = 1.5 * math.pi) -> float:
    """Arc length of ``r = (c + t)^-1, theta = -t`` on ``[0, T]`` by quadrature."""
    from scipy.integrate import quad

    def speed(t):
        s = r0_param + t
        return math.sqrt(1.0 / s ** 4 + 1.0 / s ** 2)

    # split the range so the adaptive rule sees the 1/s decay in pieces
    edges = np.concatenate([[0.0], np.geomspace(1.0, max(T, 1.0), 32)])
    edges = edges[edges <= T]
    if edges[-1] < T:
        edges = np.append(edges, T)
    return float(sum(quad(speed, a, b, epsabs=1e-13, epsrel=1e-12)[0]
                     for a, b in zip(edges[:-1], edges[1:])))


def truncated_lengths(orbit: Orbit, cutoffs: Sequence[float]) -> list:
    """Polyline length of the orbit restricted to ``params <= T`` for each ``T``."""
    pts = orbit.points
    seg = np.hypot(*np.diff(pts, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    out = []
    for T in cutoffs:
        k = int(np.searchsorted(orbit.times, T, side="right")) - 1
        out.append(float(cum[max(k, 0)]))
    return out
