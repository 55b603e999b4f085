import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from unfolder.errors import Degenerate, NotSimple
from unfolder.geom import (
    HalfPlane,
    Location,
    Orientation,
    RegionStatus,
    edge_halfplanes,
    feasible_point,
    intersect_halfplanes,
    orientation,
    point_in_polygon,
    polygon_contains_polygon,
    scale_polygon,
    validate_polygon,
)

from oracles import L_POLY, SQUARE, halfplane_mask, random_radial_polygon

coord = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
point = st.tuples(coord, coord)


def box(x0, y0, x1, y1):
    return [HalfPlane((1, 0), x0), HalfPlane((0, 1), y0), HalfPlane((-1, 0), -x1), HalfPlane((0, -1), -y1)]


def test_orientation_basic():
    assert orientation((0, 0), (1, 0), (0, 1)) is Orientation.CCW
    assert orientation((0, 0), (1, 1), (2, 2)) is Orientation.COLLINEAR
    assert orientation((0, 0), (0, 1), (1, 0)) is Orientation.CW


def test_orientation_exact_near_degenerate():
    # classic float failure: points nearly on y = x
    p, q = (0.5, 0.5), (12.0, 12.0)
    for k in range(-5, 6):
        r = (24.0, 24.0 + k * 2.0 ** -48)
        want = (Fraction(q[0]) - Fraction(p[0])) * (Fraction(r[1]) - Fraction(p[1])) - \
            (Fraction(q[1]) - Fraction(p[1])) * (Fraction(r[0]) - Fraction(p[0]))
        assert int(orientation(p, q, r)) == (want > 0) - (want < 0)


@given(point, point, point)
def test_orientation_antisymmetric(p, q, r):
    assert orientation(p, q, r) == -orientation(q, p, r)
    assert orientation(p, q, r) == -orientation(p, r, q)
    assert orientation(p, q, r) == orientation(q, r, p)


def test_validate_polygon_orientation_and_errors():
    assert validate_polygon(SQUARE).vertices == tuple(map(tuple, SQUARE))
    cw = validate_polygon(SQUARE[::-1])
    assert cw.area > 0 and set(cw.vertices) == set(SQUARE)
    with pytest.raises(NotSimple) as e:
        validate_polygon([(0, 0), (1, 1), (1, 0), (0, 1)])
    assert e.value.witness is not None
    with pytest.raises(Degenerate):
        validate_polygon([(0, 0), (1, 1), (2, 2)])


def test_validate_polygon_merges_collinear():
    P = validate_polygon([(0, 0), (0.5, 0), (1, 0), (1, 1), (0, 1)])
    assert P.n == 4


def test_intersect_halfplanes_examples():
    sq = intersect_halfplanes(box(0, 0, 1, 1))
    assert sq.status is RegionStatus.BOUNDED
    assert set(sq.normalized()) == {(0, 0), (1, 0), (1, 1), (0, 1)}
    assert intersect_halfplanes([HalfPlane((1, 0), 0), HalfPlane((-1, 0), 1)]).is_empty
    assert intersect_halfplanes([]).status is RegionStatus.UNBOUNDED
    L = intersect_halfplanes(edge_halfplanes(validate_polygon(L_POLY)))
    assert set(L.normalized()) == {(0, 0), (1, 0), (1, 1), (0, 1)}


def test_unbounded_regions_report_rays_and_lines():
    quad = intersect_halfplanes([HalfPlane((1, 0), 0), HalfPlane((0, 1), 0)])
    assert quad.status is RegionStatus.UNBOUNDED
    assert len(quad.rays) == 2
    slab = intersect_halfplanes([HalfPlane((1, 0), 0), HalfPlane((-1, 0), 0)])
    assert slab.status is RegionStatus.UNBOUNDED and slab.lines


def test_feasible_point_examples():
    c, m = feasible_point(box(0, 0, 1, 1))
    assert np.allclose(c, (0.5, 0.5), atol=1e-9) and m == pytest.approx(0.5)
    c, m = feasible_point([HalfPlane((1, 0), 0), HalfPlane((-1, 0), 0)])
    assert abs(c[0]) < 1e-9 and m == 0
    assert feasible_point([HalfPlane((1, 0), 1), HalfPlane((-1, 0), 0)]) is None
    c, m = feasible_point([HalfPlane((1, 0), 0)])
    assert m == math.inf


def _random_halfplanes(rng, k):
    hs = []
    for _ in range(k):
        a = rng.uniform(0, 2 * math.pi)
        hs.append(HalfPlane((math.cos(a), math.sin(a)), rng.uniform(-1, 0.6)))
    return hs


def test_intersection_matches_pointwise_conjunction():
    rng = random.Random(7)
    xs = np.linspace(-2, 2, 50)
    G = np.array([(x, y) for x in xs for y in xs])
    for _ in range(12):
        hs = _random_halfplanes(rng, rng.randint(1, 8))
        reg = intersect_halfplanes(hs)
        want = halfplane_mask([(h.normal, h.offset) for h in hs], G)
        got = np.array([reg.contains(tuple(g)) for g in G])
        assert (got == want).all()


def test_feasible_point_agrees_with_emptiness():
    rng = random.Random(11)
    for _ in range(400):
        hs = _random_halfplanes(rng, rng.randint(2, 6))
        assert (feasible_point(hs) is None) == intersect_halfplanes(hs).is_empty


def test_point_in_polygon():
    P = validate_polygon(SQUARE)
    assert point_in_polygon(P, (0.5, 0.5)) is Location.INSIDE
    assert point_in_polygon(P, (1, 0.5)) is Location.BOUNDARY
    assert point_in_polygon(P, (2, 0)) is Location.OUTSIDE


def test_polygon_contains_polygon_examples():
    A = validate_polygon(SQUARE)
    assert polygon_contains_polygon(A, scale_polygon(A, 0.5, (0.5, 0.5)))
    assert polygon_contains_polygon(A, A)
    L = validate_polygon(L_POLY)
    B = validate_polygon([(0.9, 0.9), (1.5, 0.9), (1.5, 1.5), (0.9, 1.5)])
    assert point_in_polygon(L, (1.5, 1.5)) is Location.OUTSIDE
    assert not polygon_contains_polygon(L, B)


def test_contains_rejects_bridge_over_notch():
    # all vertices inside, but an edge crosses the notch of the L
    L = validate_polygon(L_POLY)
    assert not polygon_contains_polygon(L, [(1.6, 0.6), (0.6, 1.6), (0.2, 0.2)])


def _dyadic(v, bits=10):
    return round(v * 2 ** bits) / 2 ** bits


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.integers(0, 64), min_size=2, max_size=6))
def test_scaled_copies_about_kernel_point_are_contained(seed, ks):
    # dyadic coordinates and factors keep the scaled copies exact in floats
    rng = random.Random(seed)
    P = validate_polygon([(_dyadic(x), _dyadic(y)) for x, y in random_radial_polygon(rng, wobble=0.3)])
    fp = feasible_point(edge_halfplanes(P))
    assume(fp is not None)
    c = (_dyadic(fp[0][0]), _dyadic(fp[0][1]))
    assume(intersect_halfplanes(edge_halfplanes(P)).contains(c))
    for k in sorted(ks):
        if k == 0:
            continue
        assert polygon_contains_polygon(P, scale_polygon(P, k / 64, c))
