import math

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from selfcontract.curve import check_main_bound, check_self_contracted, diameter
from selfcontract.errors import (DomainError, GridMismatchError, NestingError,
                                 PositionError, ValidationError)
from selfcontract.fields import sample_disk
from selfcontract.flow import winding_number
from selfcontract.foliation import (ConvexBody, FoliationFamily, Levels, body_from_ball,
                                    body_from_ellipse, compute_K, concentric_ball_family,
                                    cond_lambda_holds, deflection, direction_grid,
                                    foliation_value, level_position, minkowski_combine,
                                    orthogonal_trajectory, rotate_scale, step1_bodies,
                                    step1_family, torralba_construction,
                                    torralba_levels, winds_monotonically)

# Step-1 deflection at M = 720, frozen as a regression constant (degrees)
FROZEN_THETA_DEG = 3.087924399766242


@pytest.fixture(scope="module")
def torralba():
    return torralba_construction(periods=5)


def hausdorff(P, Q):
    d = np.hypot(*(P[:, None, :] - Q[None, :, :]).transpose(2, 0, 1))
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def test_direction_grid():
    ang, U = direction_grid(16)
    assert ang[4] == pytest.approx(math.pi / 2)
    assert np.allclose(np.hypot(*U.T), 1.0)
    with pytest.raises(ValidationError):
        direction_grid(4)
    with pytest.raises(ValueError):
        U[0, 0] = 2.0


def test_ball_support_and_vertices():
    b = body_from_ball(2.0, 360)
    assert np.all(b.support == 2.0)
    r = np.hypot(*b.vertices().T)
    # vertices of the circumscribed polygon
    assert np.allclose(r, 2.0 / math.cos(math.pi / 360))
    assert b.is_valid()
    assert b.contains((1.99, 0.0)) and not b.contains((2.01, 0.0))


def test_ellipse_support():
    e = body_from_ellipse(2.0, 1.0, 0.0, 720)
    assert e.support[0] == pytest.approx(2.0)
    assert e.support[180] == pytest.approx(1.0)
    r = body_from_ellipse(2.0, 1.0, math.pi / 2, 720)
    assert r.support[0] == pytest.approx(1.0)
    assert r.support[180] == pytest.approx(2.0)
    assert e.is_valid()
    with pytest.raises(ValidationError):
        body_from_ellipse(0.0, 1.0)


def test_invalid_support_detected():
    d = np.ones(64)
    d[10] = 3.0
    assert not ConvexBody(d).is_valid()
    with pytest.raises(ValidationError):
        ConvexBody(np.ones(4))
    with pytest.raises(ValidationError):
        ConvexBody(np.array([1.0] * 7 + [np.nan]))


def test_minkowski_examples():
    A, B = body_from_ball(1.0, 90), body_from_ball(0.5, 90)
    assert np.allclose(minkowski_combine(1.0, A, B).support, 1.0)
    assert np.allclose(minkowski_combine(0.0, A, B).support, 0.5)
    assert np.allclose(minkowski_combine(0.5, A, B).support, 0.75)
    with pytest.raises(ValidationError):
        minkowski_combine(1.5, A, B)
    with pytest.raises(GridMismatchError):
        minkowski_combine(0.5, A, body_from_ball(1.0, 60))


def test_support_linearity_matches_hull_minkowski_sum():
    M = 720
    C = body_from_ellipse(1.0, 0.4, 0.3, M)
    D = body_from_ellipse(0.5, 0.9, -1.0, M)
    s = 0.3
    E = minkowski_combine(s, C, D)
    vc, vd = s * C.vertices(), (1 - s) * D.vertices()
    sums = (vc[:, None, :] + vd[None, :, :]).reshape(-1, 2)
    hull = sums[ConvexHull(sums).vertices]
    R = float(np.hypot(*E.vertices().T).max())
    assert hausdorff(hull, E.vertices()) <= 2 * math.pi * R / M


def test_rotate_scale():
    e = body_from_ellipse(2.0, 1.0, 0.0, 720)
    r = rotate_scale(e, math.pi / 2, 0.5)
    assert np.allclose(r.support, 0.5 * body_from_ellipse(2.0, 1.0, math.pi / 2, 720).support,
                       atol=1e-12)
    with pytest.raises(ValidationError):
        rotate_scale(e, 0.0, 0.0)


def test_compute_K_examples():
    balls = [body_from_ball(r, 64) for r in (3.0, 2.0, 1.0)]
    assert compute_K(*balls) == pytest.approx(1.0)
    third = [body_from_ball(r, 64) for r in (1.0, 0.9, 0.6)]
    assert compute_K(*third) == pytest.approx(1 / 3)
    with pytest.raises(NestingError):
        compute_K(balls[0], balls[2], balls[1])


def test_levels():
    lv = torralba_levels([1.0, 1.0], 1.0, 0.5, 6)
    assert lv.K == 2.0
    assert np.allclose(lv.gaps, 0.5 * 2.0 ** -np.arange(5))
    assert np.allclose(lv.values, [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125])
    assert np.all(np.diff(lv.values) < 0)
    with pytest.raises(ValidationError):
        torralba_levels([1.0], 0.5, 1.0, 4)
    with pytest.raises(ValidationError):
        torralba_levels([0.0], 1.0, 0.5, 4)
    with pytest.raises(ValidationError):
        torralba_levels([1.0], 1.0, 0.5, 1)


def test_step1_family_satisfies_level_condition():
    fam = step1_family()
    assert cond_lambda_holds(fam)
    assert all(b.is_valid() for b in fam.bodies)
    assert len(fam.bodies) == 5


def test_cond_lambda_fails_for_fast_shrinking_levels():
    bodies = tuple(body_from_ball(r, 64) for r in (1.0, 0.9, 0.1))
    # K_1 = 0.1 / 0.8; a tiny first gap breaks K_1 g_1 <= g_0
    fam = FoliationFamily(bodies, Levels(np.array([1.0, 0.99, 0.0]),
                                         np.array([0.01, 0.99]), 0.0, ()))
    assert not cond_lambda_holds(fam)


def test_nesting_errors():
    with pytest.raises(NestingError):
        concentric_ball_family([1.0, 1.0], [1.0, 0.5])
    with pytest.raises(ValidationError):
        concentric_ball_family([1.0], [1.0])
    with pytest.raises(ValidationError):
        concentric_ball_family([1.0, 0.5], [0.5, 1.0])


def test_concentric_balls_value():
    fam = concentric_ball_family([1.0, 0.5], [1.0, 0.5])
    assert foliation_value(fam, (0.75, 0.0)) == pytest.approx(0.75)
    assert foliation_value(fam, (0.0, 1.0)) == pytest.approx(1.0)
    k, s = level_position(fam, np.array([[0.0, 0.1]]))
    assert k[0] == 0 and s[0] == 0.0
    with pytest.raises(DomainError):
        foliation_value(fam, (2.0, 0.0))


def test_concentric_trajectory_is_radial():
    fam = concentric_ball_family([1.0, 0.8, 0.5, 0.3], [1.0, 0.7, 0.4, 0.1])
    # a grid direction: the supporting normal is exactly radial
    x0 = np.array([math.cos(math.pi / 4), math.sin(math.pi / 4)])
    o = orthogonal_trajectory(fam, x0, substeps=8)
    assert winding_number(o.polyline) == pytest.approx(0.0, abs=1e-12)
    assert np.hypot(*o.points[-1]) == pytest.approx(0.3)
    L = float(np.hypot(*np.diff(o.points, axis=0).T).sum())
    assert L == pytest.approx(1.0 - 0.3)
    assert deflection(o) == pytest.approx(0.0, abs=1e-12)
    # off the grid the normal snaps to the nearest direction, within one spacing
    o = orthogonal_trajectory(fam, (0.6, 0.8), substeps=8)
    assert abs(deflection(o)) <= 2 * math.pi / 720


def test_trajectory_argument_errors():
    fam = concentric_ball_family([1.0, 0.5], [1.0, 0.5])
    o = orthogonal_trajectory(fam, (0.0, 0.9), substeps=4)
    assert len(o.polyline) > 1
    with pytest.raises(ValidationError):
        orthogonal_trajectory(fam, (0.0, 0.9), substeps=0)
    with pytest.raises(DomainError):
        orthogonal_trajectory(fam, (0.0, 1.5))


def test_position_error_when_start_is_off_its_boundary(monkeypatch):
    import selfcontract.foliation as fol
    fam = concentric_ball_family([1.0, 0.5], [1.0, 0.5])
    # report a level set far outside the start point
    monkeypatch.setattr(fol, "level_position",
                        lambda f, x: (np.array([0]), np.array([1.0])))
    with pytest.raises(PositionError):
        fol.orthogonal_trajectory(fam, (0.0, 0.2), substeps=4)


def test_step1_deflection_frozen():
    theta = torralba_construction(periods=1).theta
    assert theta > 0
    assert math.degrees(theta) == pytest.approx(FROZEN_THETA_DEG, rel=1e-9)


def test_step1_bodies_are_nested():
    b = step1_bodies()
    for outer, inner in zip(b, b[1:]):
        assert np.all(inner.support < outer.support)


def test_torralba_level_condition_and_convexity(torralba, rng):
    fam = torralba.family
    assert cond_lambda_holds(fam)
    xs, ys = sample_disk(rng, 20_000, 1.0), sample_disk(rng, 20_000, 1.0)
    span = float(np.ptp(fam.levels.values))
    margin = 0.5 * (foliation_value(fam, xs) + foliation_value(fam, ys)) \
        - foliation_value(fam, 0.5 * (xs + ys))
    assert margin.min() >= -1e-8 * span


def test_torralba_five_period_winding(torralba):
    o = torralba.orbit
    M = torralba.family.bodies[0].M
    turns = -winding_number(o.polyline)
    # one grid spacing of slack: the turn is resolved only to 2 pi / M
    assert turns >= 5 * torralba.theta / (2 * math.pi) - 1 / M
    assert winds_monotonically(o, 2 * math.pi / M)


def test_torralba_winding_grows_linearly(torralba):
    o = torralba.orbit
    ang = np.unwrap(np.arctan2(o.points[:, 1], o.points[:, 0]))
    ends = [int(np.searchsorted(o.times, 4 * n - 1e-12)) for n in range(6)]
    per_period = -np.diff(ang[ends])
    assert np.all(np.abs(per_period / torralba.theta - 1) <= 0.1)


def test_torralba_levels_decrease_along_trajectory(torralba):
    o = torralba.orbit
    assert np.all(np.diff(o.f_values) <= 1e-15)
    span = float(np.ptp(torralba.family.levels.values))
    direct = foliation_value(torralba.family, o.points)
    assert np.allclose(direct, o.f_values, atol=1e-9 * span)


def test_torralba_trajectory_self_contracted_and_bounded(torralba):
    o = torralba.orbit
    v = check_self_contracted(o.polyline, 1e-6 * diameter(o.points))
    assert v.is_self_contracted
    assert check_main_bound(o.polyline).holds


def test_family_serialization(torralba):
    d = torralba.family.to_dict()
    assert d["M"] == 720 and len(d["levels"]) == 21
    assert "_radii" not in d
    assert torralba.to_dict()["samples"] == len(torralba.orbit.polyline)
