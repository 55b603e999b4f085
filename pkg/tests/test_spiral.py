import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unfolder.errors import NegativeTime, ThetaOutOfRange
from unfolder.geom import Location, point_in_polygon, validate_polygon
from unfolder.spiral import (
    SpiralParams,
    find_spiral_params,
    margin_curve,
    spiral_feasible_region,
    spiral_halfplanes,
    spiral_map,
    star_kernel,
    verify_shrinking_motion,
)

from oracles import (
    L_POLY,
    SPIRAL_POLY,
    SQUARE,
    comb,
    complex_spiral,
    grid_visibility,
    kernel_nonempty_oracle,
    pinwheel,
    random_radial_polygon,
    random_simple_polygon,
)


@pytest.fixture(scope="module")
def polys():
    return {name: validate_polygon(v) for name, v in
            [("square", SQUARE), ("L", L_POLY), ("spiral", SPIRAL_POLY), ("pinwheel", pinwheel())]}


def test_kernel_examples(polys):
    assert set(star_kernel(polys["square"]).normalized()) == {(0, 0), (1, 0), (1, 1), (0, 1)}
    assert set(star_kernel(polys["L"]).normalized()) == {(0, 0), (1, 0), (1, 1), (0, 1)}
    assert star_kernel(polys["spiral"]).is_empty
    assert not grid_visibility(SPIRAL_POLY)[0].any()


def test_L_kernel_matches_visibility_grid(polys):
    mask, xs, ys = grid_visibility(L_POLY, 100)
    K = star_kernel(polys["L"])
    got = np.array([[K.contains((x, y)) for y in ys] for x in xs])
    # grid points never land on the kernel boundary lines x = 1, y = 1
    assert (got == mask).all()


def test_kernel_nonempty_matches_oracle_on_random_polygons():
    rng = random.Random(99)
    for k in range(20):
        V = random_simple_polygon(rng) if k % 2 else random_radial_polygon(rng, wobble=0.85)
        P = validate_polygon(V)
        K = star_kernel(P)
        hint = None
        if not K.is_empty:
            vs = np.asarray(K.vertices)
            hint = (vs.min(axis=0), vs.max(axis=0))
        assert kernel_nonempty_oracle(P.vertices, hint) == (not K.is_empty), V


def _random_polys(seed, count):
    rng = random.Random(seed)
    return [validate_polygon(random_simple_polygon(rng) if k % 2 else random_radial_polygon(rng))
            for k in range(count)]


def test_theta_zero_reduces_to_kernel(polys):
    for P in list(polys.values()) + _random_polys(5, 20):
        assert spiral_feasible_region(P, 0.0).normalized() == star_kernel(P).normalized()


def test_theta_range_is_checked(polys):
    with pytest.raises(ThetaOutOfRange):
        spiral_feasible_region(polys["square"], math.pi / 2)
    with pytest.raises(ThetaOutOfRange):
        SpiralParams((0, 0), -2.0)


def test_square_quarter_turn_center(polys):
    P = polys["square"]
    hs = spiral_halfplanes(P, math.pi / 4)
    assert len(hs) == 8
    # analytic: each slack is a positive multiple of 0.5 (cos + sin) or 0.5 (cos - sin) ~ 0
    for h in hs:
        assert float(h.normal[0]) * 0.5 + float(h.normal[1]) * 0.5 - float(h.offset) >= -1e-12
    assert spiral_feasible_region(P, math.pi / 4).contains((0.5, 0.5))
    sp = SpiralParams((0.5, 0.5), math.pi / 4)
    assert verify_shrinking_motion(P, sp, 64, 5.0).verdict


def test_spiral_polygon_region_empty_at_zero(polys):
    assert spiral_feasible_region(polys["spiral"], 0.0).is_empty


def test_find_params_square(polys):
    sp = find_spiral_params(polys["square"], 64, 20)
    assert sp is not None and sp.theta == 0.0
    assert sp.center == pytest.approx((0.5, 0.5))


def test_pinwheel_is_spiral_but_not_star(polys):
    P = polys["pinwheel"]
    assert star_kernel(P).is_empty
    sp = find_spiral_params(P, 180, 40)
    assert sp is not None and sp.theta != 0
    assert point_in_polygon(P, sp.center) is not Location.OUTSIDE
    rep = verify_shrinking_motion(P, sp, 64, 5.0 / sp.rate)
    assert rep.verdict and all(w == 0 for _, _, w in rep.samples)


def test_comb_is_not_spiral():
    P = validate_polygon(comb())
    curve = margin_curve(P, 90)
    assert max(m for _, m in curve) < 0
    assert find_spiral_params(P, 90, 20) is None


def test_found_params_always_verify():
    for P in _random_polys(17, 6):
        sp = find_spiral_params(P, 60, 20)
        if sp is None:
            continue
        assert verify_shrinking_motion(P, sp, 64, 5.0 / sp.rate).verdict


def test_spiral_map_examples():
    sp = SpiralParams((1.0, 2.0), 0.0, 1.0)
    z = np.array([3.0, -1.0])
    assert np.allclose(spiral_map(sp, 0.0)(z), z, atol=0)
    assert np.allclose(spiral_map(sp, math.log(2))(z), (1 + 1.0, 2 - 1.5), atol=1e-15)
    sp = SpiralParams((1.0, 2.0), math.pi / 4, math.sqrt(2))
    assert sp.sigma == pytest.approx(-1) and sp.omega == pytest.approx(-1)
    m = spiral_map(sp, math.log(2))
    assert m.scale == pytest.approx(0.5) and m.angle == pytest.approx(-math.log(2))
    assert np.allclose(m(z), complex_spiral(sp.center, sp.theta, sp.rate, math.log(2), z), atol=1e-14)
    with pytest.raises(NegativeTime):
        spiral_map(sp, -1e-9)


def test_verify_shrink_examples(polys):
    assert verify_shrinking_motion(polys["square"], SpiralParams((0.5, 0.5), 0.0), 64).verdict
    rep = verify_shrinking_motion(polys["square"], SpiralParams((2.0, 2.0), 0.0), 64)
    assert not rep.verdict and max(w for _, _, w in rep.samples) > 0
    assert verify_shrinking_motion(polys["L"], SpiralParams((0.5, 0.5), 0.0), 64).verdict
    ts = [t for t, _, _ in rep.samples]
    assert ts == sorted(ts) and ts[0] == 0.0


angles = st.floats(-1.5, 1.5)
times = st.floats(0, 3)


@settings(max_examples=200)
@given(angles, st.floats(0.1, 3), times, times, st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_spiral_map_semigroup(theta, rate, s, t, z):
    sp = SpiralParams((0.3, -0.7), theta, rate)
    lhs = spiral_map(sp, s + t)(z)
    rhs = spiral_map(sp, s)(spiral_map(sp, t)(z))
    assert np.abs(lhs - rhs).max() < 1e-12


@settings(max_examples=100)
@given(angles, st.floats(0.2, 2), st.floats(1e-3, 2), st.floats(0, 2 * math.pi), st.floats(0.5, 3))
def test_orbits_keep_constant_angle(theta, rate, t, phi, r):
    sp = SpiralParams((0.0, 0.0), theta, rate)
    z = np.array([r * math.cos(phi), r * math.sin(phi)])
    h = 1e-6
    zt = spiral_map(sp, t)(z)
    vel = (spiral_map(sp, t + h)(z) - spiral_map(sp, t - h)(z)) / (2 * h)
    cosang = zt @ vel / (np.linalg.norm(zt) * np.linalg.norm(vel))
    assert abs(math.acos(max(-1.0, min(1.0, cosang))) - (math.pi - abs(theta))) < 1e-6
