import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cglab.sphere import (INFINITY, MobiusMap, fibonacci_sphere, hemisphere_margin, hemispherizing_mobius,
                          rotation_between, sphere_to_stereo, spherical_distance, spherical_primitives,
                          spherical_triangle_area, stereo_to_sphere)
from helpers import cube_points

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("zeta, expected", [
    (0, (1, 0, 0)), (1, (0, 1, 0)), (1j, (0, 0, 1)), (INFINITY, (-1, 0, 0)),
])
def test_stereo_examples(zeta, expected):
    assert np.allclose(stereo_to_sphere(zeta), expected, atol=1e-15)


@pytest.mark.parametrize("x, expected", [((1, 0, 0), 0), ((0, 1, 0), 1)])
def test_inverse_examples(x, expected):
    assert abs(sphere_to_stereo(x) - expected) < 1e-15


def test_pole_maps_to_infinity():
    assert sphere_to_stereo((-1, 0, 0)) is INFINITY
    assert stereo_to_sphere(sphere_to_stereo((-1.0, 0.0, 0.0)))[0] == -1.0


@settings(max_examples=200, deadline=None)
@given(finite, finite)
def test_stereo_round_trip_from_plane(re, im):
    z = complex(re, im)
    back = sphere_to_stereo(stereo_to_sphere(z))
    assert abs(back - z) <= 1e-12 * max(1.0, abs(z)) ** 2


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3))
def test_stereo_round_trip_from_sphere(v):
    v = np.array(v)
    if np.linalg.norm(v) < 1e-3:
        return
    x = v / np.linalg.norm(v)
    assert np.allclose(stereo_to_sphere(sphere_to_stereo(x)), x, atol=1e-12)


def test_primitives():
    e1, e2, e3 = np.eye(3)
    d, area, degenerate = spherical_primitives(e1, e2, e3)
    assert abs(d - math.pi / 2) < 1e-15
    assert abs(area - math.pi / 2) < 1e-14
    assert not degenerate


def test_octahedron_area_sums_to_4pi():
    e = np.vstack([np.eye(3), -np.eye(3)])
    tris = [(a, b, c) for a in (0, 3) for b in (1, 4) for c in (2, 5)]
    total = sum(spherical_triangle_area(e[a], e[b], e[c])[0] for a, b, c in tris)
    assert abs(total - 4 * math.pi) < 1e-13


def test_degenerate_triangle_flagged():
    a = np.array([1.0, 0, 0])
    area, degenerate = spherical_triangle_area(a, a, np.array([0, 1.0, 0]))
    assert degenerate and area == 0.0


def test_hemisphere_cap_points():
    rng = np.random.default_rng(3)
    pts = []
    while len(pts) < 8:
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        if v[0] >= 0.8:
            pts.append(v)
    rep = hemisphere_margin(pts)
    assert rep.feasible and rep.margin >= 0.8


def test_hemisphere_cube_infeasible():
    rep = hemisphere_margin(cube_points())
    assert not rep.feasible and rep.margin <= 0
    cert = np.array(cube_points())[list(rep.certificate)]
    # origin lies in the hull of the certificate points
    w, *_ = np.linalg.lstsq(np.vstack([cert.T, np.ones(len(cert))]), np.r_[0, 0, 0, 1.0], rcond=None)
    assert np.all(w >= -1e-9)


def test_hemisphere_antipodal_pair():
    rep = hemisphere_margin([(1, 0, 0), (-1, 0, 0)])
    assert not rep.feasible
    assert rep.certificate == (0, 1)


def test_hemisphere_boundary_tie_is_infeasible():
    rep = hemisphere_margin([(1, 0, 0), (0, 1, 0), (-1, 0, 0)])
    assert not rep.feasible


def _random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hemisphere_rotation_equivariance(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(8, 3)) + np.array([2.0, 0, 0])
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    R = _random_rotation(rng)
    a = hemisphere_margin(pts)
    b = hemisphere_margin(pts @ R.T)
    assert a.feasible == b.feasible
    assert abs(a.margin - b.margin) <= 1e-9
    if a.feasible:
        assert np.allclose(R @ a.direction, b.direction, atol=1e-9)


def test_hemisphere_matches_grid_oracle():
    rng = np.random.default_rng(5)
    grid = fibonacci_sphere(100_000)
    resolution = 2 * math.sqrt(4 * math.pi / len(grid))
    for _ in range(10):
        pts = rng.normal(size=(8, 3)) + rng.normal(size=3) * 1.5
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        oracle = np.max(np.min(grid @ pts.T, axis=1))
        rep = hemisphere_margin(pts)
        assert rep.margin >= oracle - 1e-12 if rep.feasible else True
        if rep.feasible:
            assert rep.margin - oracle <= resolution
        else:
            assert oracle <= resolution


def test_mobius_cube_becomes_feasible():
    m = hemispherizing_mobius(cube_points())
    images = [m.apply_to_sphere(p) for p in cube_points()]
    assert hemisphere_margin(images).margin > 0


def test_mobius_identity_for_cap():
    pts = [stereo_to_sphere(0.1 * k * (1 + 1j)) for k in range(4)]
    m = hemispherizing_mobius(pts)
    for p in pts:
        assert np.allclose(m.apply_to_sphere(p), p, atol=1e-12)


def test_rotation_between_single_point():
    p = np.array([0.0, 0.6, 0.8])
    R = rotation_between(p, np.array([1.0, 0, 0]))
    assert np.allclose(R @ p, [1, 0, 0], atol=1e-15)
    assert abs(np.linalg.det(R) - 1) < 1e-14
    m = MobiusMap.from_rotation(R)
    assert abs(m(sphere_to_stereo(p))) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mobius_fractional_linear_and_associative(seed):
    rng = np.random.default_rng(seed)
    maps = [MobiusMap(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) for _ in range(3)]
    z = complex(*rng.normal(size=2))
    a, b, c = maps
    lhs = ((a @ b) @ c)(z)
    rhs = (a @ (b @ c))(z)
    direct = a(b(c(z)))
    assert abs(lhs - rhs) <= 1e-12 * max(1, abs(lhs))
    assert abs(lhs - direct) <= 1e-9 * max(1, abs(lhs))


def test_mobius_from_rotation_acts_as_rotation():
    rng = np.random.default_rng(11)
    R = _random_rotation(rng)
    m = MobiusMap.from_rotation(R)
    for x in fibonacci_sphere(20):
        assert np.allclose(m.apply_to_sphere(x), R @ x, atol=1e-10)


def test_distance_symmetric():
    a, b = np.eye(3)[0], np.eye(3)[1]
    assert spherical_distance(a, b) == spherical_distance(b, a)
