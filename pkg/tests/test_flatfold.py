import json
import math
import random

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from shapely.geometry import LineString, Polygon as SPolygon

from unfolder.errors import CrossingChords, MultipleChords
from unfolder.flatfold import (
    FlatFold2D,
    FoldChord,
    chord_fold,
    face_decomposition,
    frame_distance,
    restrict_to_line,
    roll_fold_to_boundary,
    unfold_motion_flatfold,
    validate_flatfold,
    with_layer_order,
)
from unfolder.fold1d import Folding1D, image_of, validate_folding1d
from unfolder.geom import validate_polygon
from unfolder.spiral import SpiralParams, find_spiral_params

from oracles import SQUARE, epsilon_valid, pinwheel


@pytest.fixture(scope="module")
def square():
    return validate_polygon(SQUARE)


def vchords(P, xs):
    return tuple(FoldChord.from_points(P, (x, 0), (x, 1)) for x in xs)


def test_face_decomposition_examples(square):
    d = face_decomposition(square, ())
    assert len(d.faces) == 1 and d.tree_edges() == []
    d = face_decomposition(square, vchords(square, [0.5]))
    assert len(d.faces) == 2 and d.tree_edges() == [(0, 1, 0)]
    d = face_decomposition(square, vchords(square, [0.25, 0.5, 0.75]))
    assert len(d.faces) == 4
    # a path: every face has at most two neighbours and depths run 0..3
    assert sorted(d.depth) == [0, 1, 2, 3]
    areas = [SPolygon(f).area for f in d.faces]
    assert areas == pytest.approx([0.25] * 4)


def test_crossing_chords_rejected(square):
    ch = (FoldChord.from_points(square, (0, 0), (1, 1)), FoldChord.from_points(square, (1, 0), (0, 1)))
    with pytest.raises(CrossingChords) as e:
        face_decomposition(square, ch)
    assert e.value.witness == [0, 1]


def test_shared_endpoint_allowed(square):
    ch = (FoldChord.from_points(square, (0, 0), (1, 0.5)), FoldChord.from_points(square, (0, 0), (0.5, 1)))
    assert len(face_decomposition(square, ch).faces) == 3


def test_face_isometry_examples(square):
    F = FlatFold2D(square, vchords(square, [0.5]))
    assert F.face_map(0) == F.face_map(0) @ F.face_map(0)
    assert np.allclose(F.face_map(1)([0.75, 0.2]), [0.25, 0.2])
    F = FlatFold2D(square, vchords(square, [0.25, 0.5, 0.75]))
    last = F.face_of((0.9, 0.5))
    assert np.allclose(F.face_map(last)([1.0, 0.0]), [0.0, 0.0], atol=1e-15)
    assert F.face_map(last).det == pytest.approx(-1)
    # cross-check on the transversal y = 0 as a 1D folding
    f1 = Folding1D.with_order(1.0, [0.25, 0.5, 0.75], 0.0, 1)
    assert image_of(f1, 0.9)[0] == pytest.approx(F.face_map(last)([0.9, 0.0])[0])
    for f in range(4):
        assert F.face_map(f).det == pytest.approx((-1) ** F.decomposition.depth[f])


def test_validation_examples(square):
    for up in (True, False):
        assert validate_flatfold(chord_fold(square, (0.5, 0), (0.5, 1), up)).ok
    acc = vchords(square, [0.25, 0.5, 0.75])
    assert validate_flatfold(with_layer_order(square, acc, [0, 1, 2, 3])).ok
    # unequal Z: the middle face outside its neighbours
    z = vchords(square, [0.4, 0.6])
    for order in ([1, 0, 2], [0, 2, 1]):
        v = validate_flatfold(with_layer_order(square, z, order))
        assert v.code == "CreasePenetration", order
        assert "line" in v.witness
        assert not epsilon_valid(1.0, [0.4, 0.6], 0.0, 1, order)
    assert validate_flatfold(with_layer_order(square, z, [0, 1, 2])).ok


def test_missing_overlap_bit_is_inconsistent(square):
    F = FlatFold2D(square, vchords(square, [0.5]))
    v = validate_flatfold(F)
    assert v.code == "InconsistentStacking" and v.witness["faces"] == [0, 1]


def test_cyclic_bits_are_inconsistent(square):
    acc = vchords(square, [0.25, 0.5, 0.75])
    F = with_layer_order(square, acc, [0, 1, 2, 3])
    bits = [(i, j, up) for i, j, up in F.overlaps if (i, j) != (0, 2)] + [(0, 2, True)]
    v = validate_flatfold(FlatFold2D(square, acc, bits))
    assert v.code == "InconsistentStacking"


def test_json_round_trip(square):
    F = with_layer_order(square, vchords(square, [0.3, 0.7]), [2, 1, 0])
    G = FlatFold2D.from_json(json.loads(json.dumps(F.to_json())))
    assert G.chords == F.chords and G.overlaps == F.overlaps
    assert G.to_json() == F.to_json()


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**6))
def test_parallel_chords_match_1d_oracle(seed):
    rng = random.Random(seed)
    P = validate_polygon(SQUARE)
    xs = sorted(set(round(rng.uniform(0.05, 0.95), 2) for _ in range(rng.randint(1, 5))))
    order = list(range(len(xs) + 1))
    rng.shuffle(order)
    F = with_layer_order(P, vchords(P, xs), order)
    assert validate_flatfold(F).ok == epsilon_valid(1.0, xs, 0.0, 1, order)


def _material_line_check(F, rng):
    """The frame restricted to a random material line is a 1D folding with
    folds exactly where the line meets chords."""
    P = F.domain
    poly = SPolygon(P.vertices)
    for _ in range(20):
        ang = rng.uniform(0, math.pi)
        u = np.array([math.cos(ang), math.sin(ang)])
        o = np.asarray(poly.representative_point().coords[0]) + rng.uniform(-0.1, 0.1) * u[::-1]
        seg = poly.intersection(LineString([o - 10 * u, o + 10 * u]))
        if seg.geom_type == "LineString" and seg.length > 1e-3:
            break
    a = np.asarray(seg.coords[0])
    d = np.asarray(seg.coords[-1]) - a
    L = float(np.linalg.norm(d))
    d = d / L
    cuts = []
    for j in range(len(F.chords)):
        x = seg.intersection(LineString(F.chord_points(j)))
        if x.geom_type == "Point":
            cuts.append(float((np.array([x.x, x.y]) - a) @ d))
    cuts = sorted(c for c in cuts if 1e-6 < c < L - 1e-6)
    bounds = [0.0, *cuts, L]
    for s0, s1 in zip(bounds, bounds[1:]):
        ts = np.linspace(s0, s1, 7)[1:-1]
        img = F.map_points(a + ts[:, None] * d)
        gaps = np.linalg.norm(np.diff(img, axis=0), axis=1)
        assert np.allclose(gaps, np.diff(ts), atol=1e-12)


def _check_motion(F, sp, steps=16):
    m = unfold_motion_flatfold(F, sp, steps)
    assert m.frames[0] is F
    assert m.frames[-1].chords == ()
    bound = 4 * F.domain.diameter / steps
    assert max(frame_distance(a, b) for a, b in zip(m.frames, m.frames[1:])) < bound
    rng = random.Random(0)
    for fr in m.frames:
        for f, poly in enumerate(fr.faces):
            X = np.asarray(poly)
            Y = fr.face_map(f)(X)
            D0 = np.linalg.norm(X[:, None] - X[None], axis=2)
            D1 = np.linalg.norm(Y[:, None] - Y[None], axis=2)
            assert np.abs(D0 - D1).max() < 1e-12
        if fr.chords:
            _material_line_check(fr, rng)
    return m


def test_identity_motion(square):
    m = unfold_motion_flatfold(FlatFold2D(square), SpiralParams((0.5, 0.5), 0.0), 8)
    assert all(fr.chords == () for fr in m.frames)


def test_off_center_chord_vanishes_at_two_thirds(square):
    F = chord_fold(square, (0.75, 0), (0.75, 1))
    m = _check_motion(F, SpiralParams((0.25, 0.5), 0.0))
    assert m.case == "a"
    assert abs(m.events["chord0"] - 2 / 3) < 1e-9
    stage1 = [(v, len(fr.chords)) for (s, v), fr in zip(m.params, m.frames)]
    assert all(n == (1 if v >= 2 / 3 else 0) for v, n in stage1)


def test_chord_through_center_is_rolled(square):
    F = chord_fold(square, (0.5, 0), (0.5, 1))
    m = _check_motion(F, SpiralParams((0.5, 0.5), 0.0))
    assert m.case == "b"
    assert [s for s, _ in m.params].count("roll") == 15


def test_center_on_boundary_uses_link(square):
    ch = (FoldChord.from_points(square, (0, 0), (1, 0.5)), FoldChord.from_points(square, (0, 0), (0.5, 1)))
    F = with_layer_order(square, ch, [0, 1, 2])
    m = _check_motion(F, SpiralParams((0.0, 0.0), 0.0))
    assert m.case == "c"
    assert any(s == "link" for s, _ in m.params)


def test_only_one_fold_can_pass_an_interior_center(square):
    ch = (FoldChord.from_points(square, (0.5, 0), (0.5, 1)), FoldChord.from_points(square, (0, 0.5), (1, 0.5)))
    with pytest.raises(CrossingChords):
        face_decomposition(square, ch)
    ch = vchords(square, [0.5, 0.7])
    F = with_layer_order(square, ch, [0, 1, 2])
    # both survive near c only if both pass through it; 0.7 vanishes first
    m = unfold_motion_flatfold(F, SpiralParams((0.5, 0.5), 0.0), 8)
    assert m.case == "b"
    assert m.events["chord1"] == pytest.approx(0.4)


def test_spiral_center_motion():
    P = validate_polygon(pinwheel())
    sp = find_spiral_params(P, 180, 40)
    assert sp.theta != 0
    F = chord_fold(P, P.vertices[0], P.vertices[2])
    m = _check_motion(F, sp)
    assert m.case == "a"


def test_random_parallel_foldings_unfold(square):
    rng = random.Random(4)
    done = 0
    while done < 4:
        xs = sorted(rng.uniform(0.05, 0.95) for _ in range(rng.randint(1, 4)))
        order = list(range(len(xs) + 1))
        rng.shuffle(order)
        F = with_layer_order(square, vchords(square, xs), order)
        if not validate_flatfold(F).ok:
            continue
        c = (rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9))
        _check_motion(F, SpiralParams(c, 0.0))
        done += 1


def test_roll_examples(square):
    F = chord_fold(square, (0.5, 0), (0.5, 1))
    m = roll_fold_to_boundary(F, 0, 5)
    for k, fr in enumerate(m.frames[:-1]):
        x = 0.5 + 0.5 * k / 4
        (p, q), = [c.points(square) for c in fr.chords]
        assert p[0] == pytest.approx(x) and q[0] == pytest.approx(x)
        flap = fr.face_images()[fr.face_of((0.99, 0.5))]
        assert flap.bounds[0] == pytest.approx(2 * x - 1) and flap.bounds[2] == pytest.approx(x)
        assert validate_flatfold(fr).ok
    assert m.frames[-1].chords == ()
    sliver = roll_fold_to_boundary(chord_fold(square, (1 - 1e-6, 0), (1 - 1e-6, 1)), 0, 16)
    assert len(sliver.frames) <= 16 and sliver.frames[-1].chords == ()
    slant = roll_fold_to_boundary(chord_fold(square, (0.2, 0), (0.8, 1)), 0, 16)
    assert all(validate_flatfold(fr).ok for fr in slant.frames)
    with pytest.raises(MultipleChords):
        roll_fold_to_boundary(with_layer_order(square, vchords(square, [0.3, 0.6]), [0, 1, 2]))


def test_restriction_along_image_line(square):
    F = with_layer_order(square, vchords(square, [0.25, 0.5, 0.75]), [0, 1, 2, 3])
    R = restrict_to_line(F, (0.1, 0.5), (1, 0))
    assert len(R.pieces) == 4 and len(R.creases) == 3
    f1 = Folding1D.with_order(1.0, [0.25, 0.5, 0.75], 0.0, 1, [0, 1, 2, 3])
    assert validate_folding1d(f1).ok
    # positions along the line are measured from the given point
    assert sorted((round(lo + 0.1, 9), round(hi + 0.1, 9)) for _, lo, hi in R.pieces) == \
        sorted((round(lo, 9), round(hi, 9)) for lo, hi in f1.piece_intervals())


def test_roll_tie_break_ignores_endpoint_order(square):
    # equal halves: the same material side rolls whichever way the chord is stored
    for a, b in (((0.5, 0), (0.5, 1)), ((0.5, 1), (0.5, 0))):
        m = roll_fold_to_boundary(chord_fold(square, a, b), 0, 4)
        flap = m.frames[0].decomposition.faces[m.events["flapFace"]]
        assert max(x for x, _ in flap) == pytest.approx(1.0)
