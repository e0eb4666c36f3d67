import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from selfcontract.curve import (LENGTH_BOUND_FACTOR, Polyline, check_main_bound,
                                check_self_contracted, check_self_contracted_bruteforce,
                                default_tolerance, distances_to_last, endpoint_gap,
                                is_nonincreasing, length)
from selfcontract.errors import OracleCapError, ValidationError
from selfcontract.fields import quadratic_field
from selfcontract.flow import FlowConfig, integrate_gradient

coord = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
polylines = st.lists(st.tuples(coord, coord), min_size=1, max_size=25).map(
    lambda pts: Polyline.from_points(pts))


def quadratic_orbit(a=1.0, d=4.0, x0=(1.0, 1.0)):
    fld = quadratic_field(np.diag([a, d]))
    return integrate_gradient(fld, x0, FlowConfig(t_max=1e4, rtol=1e-10, atol=1e-14)).polyline


def test_polyline_validation():
    with pytest.raises(ValidationError):
        Polyline(np.zeros((3, 3)), None)
    with pytest.raises(ValidationError):
        Polyline(np.array([[0.0, 0.0], [1.0, np.nan]]), None)
    with pytest.raises(ValidationError):
        Polyline(np.zeros((2, 2)), np.array([1.0, 1.0]))
    with pytest.raises(ValidationError):
        Polyline(np.zeros((2, 2)), np.array([0.0]))


def test_polyline_is_immutable():
    pl = Polyline.from_points([(0, 0), (1, 0)])
    with pytest.raises(ValueError):
        pl.points[0, 0] = 5.0


def test_straight_segment_is_self_contracted():
    pl = Polyline.from_points(np.linspace([0, 0], [1, 2], 10))
    v = check_self_contracted(pl)
    assert v.is_self_contracted and v.witness is None


def test_jump_example_is_self_contracted():
    # (t, 1) for t < 0, the origin, then (t, -1) for t > 0
    pts = [(-2, 1), (-1, 1), (0, 0), (1, -1), (2, -1)]
    assert check_self_contracted(Polyline.from_points(pts)).is_self_contracted


def test_three_quarter_circle_fails_with_confirmed_witness():
    a = np.linspace(0, 1.5 * math.pi, 100)
    pl = Polyline.from_points(np.stack([np.cos(a), np.sin(a)], axis=1))
    v = check_self_contracted(pl)
    b = check_self_contracted_bruteforce(pl)
    assert not v.is_self_contracted and not b.is_self_contracted
    i, j, l = v.witness
    assert i <= j <= l
    p = pl.points
    assert math.dist(p[i], p[l]) < math.dist(p[j], p[l]) - v.tolerance
    assert v.slack == pytest.approx(b.slack, abs=1e-15)


def test_single_point_is_self_contracted():
    pl = Polyline.from_points([(3, 4)])
    assert check_self_contracted(pl).is_self_contracted
    assert check_self_contracted_bruteforce(pl).is_self_contracted
    assert length(pl) == 0.0


def test_oracle_cap():
    pl = Polyline.from_points(np.zeros((201, 2)))
    with pytest.raises(OracleCapError):
        check_self_contracted_bruteforce(pl)


def test_negative_tolerance_rejected():
    with pytest.raises(ValidationError):
        check_self_contracted(Polyline.from_points([(0, 0)]), -1.0)


def test_length_and_gap():
    seg = Polyline.from_points([(0, 0), (3, 4)])
    assert length(seg) == 5.0 and endpoint_gap(seg) == 5.0
    square = Polyline.from_points([(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)])
    assert length(square) == pytest.approx(4.0)
    assert endpoint_gap(square) == 0.0


def test_main_bound_record():
    seg = Polyline.from_points([(0, 0), (3, 4)])
    b = check_main_bound(seg)
    assert b.holds and b.bound == pytest.approx(5 * LENGTH_BOUND_FACTOR)
    assert LENGTH_BOUND_FACTOR == pytest.approx(27.1327, abs=1e-4)


def test_default_tolerance_scales_with_diameter():
    pl = Polyline.from_points([(0, 0), (3, 4), (6, 0)])
    assert default_tolerance(pl) == pytest.approx(6e-9)


def test_witness_exists_for_a_reversed_self_contracted_curve(rng):
    # reversal is not an invariant; find a concrete witness by random search
    found = None
    for _ in range(1000):
        pl = Polyline.from_points(rng.normal(size=(4, 2)))
        if check_self_contracted(pl).is_self_contracted:
            v = check_self_contracted(pl.reversed())
            if not v.is_self_contracted:
                found = v
                break
    assert found is not None and found.witness is not None
    assert check_self_contracted_bruteforce(pl.reversed()).witness is not None


@given(polylines)
def test_oracle_equivalence(pl):
    a = check_self_contracted(pl)
    b = check_self_contracted_bruteforce(pl)
    assert a.is_self_contracted == b.is_self_contracted
    assert a.slack == pytest.approx(b.slack, rel=1e-12, abs=1e-12)


@given(polylines, st.integers(1, 16))
def test_block_size_does_not_change_verdict(pl, block):
    assert check_self_contracted(pl, block=block) == check_self_contracted(pl)


@given(polylines)
def test_refinement_never_shortens(pl):
    pts = pl.points
    if len(pts) < 2:
        return
    mids = 0.5 * (pts[:-1] + pts[1:]) + 0.01
    refined = np.empty((2 * len(pts) - 1, 2))
    refined[0::2] = pts
    refined[1::2] = mids
    assert length(Polyline.from_points(refined)) >= length(pl) - 1e-12


@pytest.mark.parametrize("a,d,x0", [(1, 4, (1, 1)), (0.3, 7, (-0.5, 0.8)), (2, 2.5, (0.1, -0.9))])
def test_self_contracted_orbit_properties(a, d, x0):
    pl = quadratic_orbit(a, d, x0)
    v = check_self_contracted(pl)
    assert v.is_self_contracted
    # distance to the final point is nonincreasing
    assert is_nonincreasing(distances_to_last(pl), v.tolerance)
    # bounded image: the curve stays in the ball around its end point
    dl = distances_to_last(pl)
    assert np.all(dl <= dl[0] + v.tolerance)
    # contiguous subcurves stay self-contracted
    n = len(pl)
    for s, e in [(0, n // 2), (n // 3, n), (n // 4, 3 * n // 4)]:
        assert check_self_contracted(pl.sub(s, e), v.tolerance).is_self_contracted
    assert check_main_bound(pl).holds


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=30),
       st.lists(st.floats(-1.5, 1.5), min_size=30, max_size=30))
def test_passing_curves_satisfy_main_bound(radii, angles):
    # radially monotone curves towards the origin, mostly self-contracted
    r = np.sort(np.array(radii))[::-1]
    a = np.cumsum(np.array(angles[:len(r)]) * 0.2)
    pts = np.vstack([np.stack([r * np.cos(a), r * np.sin(a)], axis=1), [[0.0, 0.0]]])
    pl = Polyline.from_points(pts)
    if check_self_contracted(pl, 0.0).is_self_contracted:
        assert check_main_bound(pl).holds
