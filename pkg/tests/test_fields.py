import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from selfcontract.errors import ValidationError
from selfcontract.fields import (FieldClass, check_coercive, check_convex_sampled,
                                 check_gradient, check_quasiconvex_sampled, cubic_field,
                                 grid_rows, log_quadratic_field, max_affine_field,
                                 max_affine_prox, norm_field, parse_field, prox_descent,
                                 quadratic_field, sample_disk, spiral_field)


def probe_points(rng, n=1000, lo=0.05, hi=3.0):
    r = rng.uniform(lo, hi, n)
    a = rng.uniform(0, 2 * math.pi, n)
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=1)


def test_identity_quadratic():
    f = quadratic_field(np.eye(2))
    x = np.array([0.3, -1.2])
    assert f(x) == pytest.approx(0.5 * (x @ x))
    assert np.array_equal(f.grad(x), x)
    assert f.is_convex and f.is_quasiconvex


def test_diagonal_quadratic_gradient():
    f = quadratic_field(np.diag([1.0, 4.0]))
    assert np.allclose(f.grad((1.0, 1.0)), (1.0, 4.0))


def test_quadratic_level_set_is_the_ellipse():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    c = np.array([0.2, -0.1])
    f = quadratic_field(A, c)
    w, V = np.linalg.eigh(A)
    a = np.linspace(0, 2 * math.pi, 50)
    # points with <A(x-c), x-c> = 2 by construction
    z = np.stack([np.cos(a), np.sin(a)], axis=1) * np.sqrt(2 / w)
    pts = z @ V.T + c
    assert np.allclose(f.value(pts), 1.0)


def test_non_spd_rejected():
    with pytest.raises(ValidationError):
        quadratic_field([[1, 2], [0, 4]])
    with pytest.raises(ValidationError):
        quadratic_field([[1, 0], [0, -1]])


@pytest.mark.parametrize("name", ["quadratic:2,0.5,0.5,1@0.1,0.2", "logquad:1,0,0,3",
                                  "spiral", "norm@0.3,0", "cubic",
                                  "maxaffine:1,0,0;-1,1,0.2;-0.5,-1,0.1"])
def test_gradients_match_finite_differences(name, rng):
    f = parse_field(name)
    pts = probe_points(rng)
    if name == "spiral":
        pts = probe_points(rng, lo=0.05, hi=2.0)
    if name.startswith("maxaffine"):
        # stay away from the kinks where the gradient jumps
        vals = pts @ np.array([[1, 0], [-1, 1], [-0.5, -1]]).T + [0, 0.2, 0.1]
        srt = np.sort(vals, axis=1)
        pts = pts[srt[:, -1] - srt[:, -2] > 1e-3]
    assert check_gradient(f, pts)


def test_spiral_basic_properties(rng):
    f = spiral_field()
    assert f((0.0, 0.0)) == 0.0
    assert np.array_equal(f.grad((0.0, 0.0)), (0.0, 0.0))
    r = np.exp(rng.uniform(math.log(1e-6), math.log(10), 10_000))
    a = rng.uniform(0, 2 * math.pi, 10_000)
    pts = np.stack([r * np.cos(a), r * np.sin(a)], axis=1)
    # exp(-1/r) underflows to zero below r ~ 1/745, where f is exactly 0
    vals = f.value(pts)
    assert np.all(vals[r > 1 / 700] > 0) and np.all(vals >= 0)
    r2 = np.exp(rng.uniform(math.log(1e-2), math.log(10), 10_000))
    pts2 = np.stack([r2 * np.cos(a), r2 * np.sin(a)], axis=1)
    assert np.all(np.hypot(*f.gradient(pts2).T) > 0)
    assert f.declared_class is FieldClass.NEITHER


def test_spiral_is_not_quasiconvex():
    v = check_quasiconvex_sampled(spiral_field(), 100_000, 1.0, seed=7)
    assert not v.passed and v.pair is not None
    x, y = map(np.array, v.pair)
    f = spiral_field()
    assert f.grad(x) @ (y - x) > 0 and f(y) < f(x)


def test_quasiconvex_passes():
    assert check_quasiconvex_sampled(quadratic_field(np.eye(2)), 100_000).passed
    assert check_quasiconvex_sampled(cubic_field(), 100_000).passed
    assert check_quasiconvex_sampled(log_quadratic_field(np.diag([1, 3])), 100_000, 5.0).passed


def test_convexity_sampling():
    assert check_convex_sampled(quadratic_field(np.diag([1, 9]))).passed
    assert check_convex_sampled(norm_field()).passed
    assert not check_convex_sampled(spiral_field()).passed
    assert not check_convex_sampled(log_quadratic_field(np.eye(2)), domain_radius=5.0).passed
    v = check_convex_sampled(cubic_field(), 1000, seed=3)
    assert not v.passed and v.to_dict()["seed"] == 3


def test_coercivity():
    assert check_coercive(quadratic_field(np.diag([0.1, 10])))
    assert check_coercive(norm_field())
    assert not check_coercive(cubic_field())


def test_norm_prox_soft_threshold():
    f = norm_field()
    x = np.array([1.0, 0.0])
    assert np.allclose(f.prox(x, 0.1), (0.9, 0.0))
    assert np.array_equal(f.prox(np.array([0.05, 0.0]), 0.1), (0.0, 0.0))
    y = np.array([3.0, 4.0])
    assert np.allclose(f.prox(y, 1.0), y * 4 / 5)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 2.0))
def test_quadratic_prox_matches_descent(x1, x2, h):
    f = quadratic_field(np.array([[2.0, 0.5], [0.5, 1.0]]), (0.3, -0.2))
    x = np.array([x1, x2])
    assert np.allclose(f.prox(x, h), prox_descent(f, x, h, tol=1e-12), atol=1e-9)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 2.0))
def test_max_affine_prox_is_optimal(x1, x2, h):
    A = np.array([[1.0, 0.0], [-1.0, 1.0], [-0.5, -1.0]])
    b = np.array([0.0, 0.2, 0.1])
    x = np.array([x1, x2])
    y = max_affine_prox(A, b, x, h)

    def obj(z):
        return float((A @ z + b).max() + (z - x) @ (z - x) / (2 * h))

    # optimal against a ring of perturbations
    a = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    for eps in (1e-3, 1e-5):
        for d in np.stack([np.cos(a), np.sin(a)], axis=1):
            assert obj(y) <= obj(y + eps * d) + 1e-12


def test_parse_field_errors():
    for bad in ("quadratic:1,2,3", "bogus", "maxaffine:1,2", "spiral:1", "quadratic:a,b,c,d",
                "norm@1"):
        with pytest.raises(ValidationError):
            parse_field(bad)


def test_parse_field_names():
    assert parse_field("spiral").name == "spiral"
    f = parse_field("maxaffine:1,0,0;-1,1,0.2")
    assert f.declared_class is FieldClass.CONVEX
    q = parse_field("quadratic:1,0,0,4@1,2")
    assert q((1.0, 2.0)) == 0.0


def test_grid_rows():
    rows = grid_rows(quadratic_field(np.eye(2)), 1.0, 3)
    assert len(rows) == 9 and rows[4] == (0.0, 0.0, 0.0)
    assert rows[0] == (-1.0, -1.0, 1.0)


def test_sample_disk_in_radius(rng):
    pts = sample_disk(rng, 1000, 2.0, (1.0, 1.0))
    assert np.all(np.hypot(*(pts - 1.0).T) <= 2.0)
