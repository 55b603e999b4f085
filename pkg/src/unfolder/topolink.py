"""Linking numbers of polygonal loops and the rolled square with two loops.

The rolled square is a cylinder over a polygonal spiral: parallel fold lines
with equal bends, widths growing slowly so successive turns nest. Two small
loops hang off the midpoints of the left and right sides.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from shapely.geometry import LineString
from shapely.geometry import Polygon as SPolygon

from .embed3d import Embed3D, check_self_intersection, triangle_mesh, write_obj
from .errors import GeometryError, LoopsTouch, SelfIntersecting
from .flatfold import FoldChord
from .geom import EPS_GEO, validate_polygon

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


# --------------------------------------------------------------------------
# Loops


def segment_distances(A0, A1, B0, B1):
    """Pairwise distances between segments A0[i]A1[i] and B0[j]B1[j] (arrays)."""
    d1 = (A1 - A0)[:, None, :]
    d2 = (B1 - B0)[None, :, :]
    r = A0[:, None, :] - B0[None, :, :]
    a = (d1 * d1).sum(-1)
    e = (d2 * d2).sum(-1)
    b = (d1 * d2).sum(-1)
    c = (d1 * r).sum(-1)
    f = (d2 * r).sum(-1)
    den = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(den > 1e-18 * a * e, np.clip((b * f - c * e) / den, 0, 1), 0.0)
        t = (b * s + f) / e
        s = np.where(t < 0, np.clip(-c / a, 0, 1), np.where(t > 1, np.clip((b - c) / a, 0, 1), s))
        t = np.clip(t, 0, 1)
    P = A0[:, None, :] + s[..., None] * d1
    Q = B0[None, :, :] + t[..., None] * d2
    return np.linalg.norm(P - Q, axis=-1)


@dataclass(frozen=True)
class PolyLoop:
    vertices: tuple

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 3 or len(V) < 3:
            raise GeometryError("a loop needs at least 3 points in space")
        if not np.isfinite(V).all():
            raise GeometryError("non-finite loop coordinates")
        object.__setattr__(self, "vertices", tuple(map(tuple, V.tolist())))
        if (np.linalg.norm(V - np.roll(V, -1, axis=0), axis=1) <= EPS_GEO).any():
            raise GeometryError("repeated consecutive loop vertices")
        n = len(V)
        if n > 3:
            D = segment_distances(V, np.roll(V, -1, axis=0), V, np.roll(V, -1, axis=0))
            idx = np.arange(n)
            gap = np.abs(idx[:, None] - idx[None, :])
            nonadj = (gap > 1) & (gap < n - 1)
            if (D[nonadj] <= EPS_GEO).any():
                i, j = np.argwhere(nonadj & (D <= EPS_GEO))[0]
                raise SelfIntersecting("loop crosses itself", witness={"segments": [int(i), int(j)]})

    @property
    def array(self):
        return np.asarray(self.vertices)

    def segments(self):
        V = self.array
        return V, np.roll(V, -1, axis=0)

    def to_json(self):
        return {"format": 1, "vertices": [list(v) for v in self.vertices]}

    @classmethod
    def from_json(cls, d):
        return cls(tuple(tuple(v) for v in d["vertices"]))


def loop_distance(a: PolyLoop, b: PolyLoop) -> float:
    return float(segment_distances(*a.segments(), *b.segments()).min())


def _basis(d):
    d = d / np.linalg.norm(d)
    h = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(d, h)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(d, e1), d


def _crossing_sum(a: PolyLoop, b: PolyLoop, d, margin=1e-7):
    """Signed crossing sum of a against b seen along d, or None if degenerate."""
    e1, e2, d = _basis(d)
    A0, A1 = a.segments()
    B0, B1 = b.segments()
    pa0, pa1 = np.stack([A0 @ e1, A0 @ e2], 1), np.stack([A1 @ e1, A1 @ e2], 1)
    pb0, pb1 = np.stack([B0 @ e1, B0 @ e2], 1), np.stack([B1 @ e1, B1 @ e2], 1)
    da = (pa1 - pa0)[:, None, :]
    db = (pb1 - pb0)[None, :, :]
    w = pb0[None, :, :] - pa0[:, None, :]
    den = da[..., 0] * db[..., 1] - da[..., 1] * db[..., 0]
    scale = np.linalg.norm(da, axis=-1) * np.linalg.norm(db, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (w[..., 0] * db[..., 1] - w[..., 1] * db[..., 0]) / den
        t = (w[..., 0] * da[..., 1] - w[..., 1] * da[..., 0]) / den
    par = np.abs(den) <= 1e-12 * scale
    # parallel pairs: degenerate if collinear and overlapping
    if par.any():
        cross = np.abs(w[..., 0] * da[..., 1] - w[..., 1] * da[..., 0]) / np.maximum(
            np.linalg.norm(da, axis=-1), 1e-300)
        if (par & (cross <= margin)).any():
            return None
    s = np.where(par, -1.0, s)
    t = np.where(par, -1.0, t)
    near = (np.abs(s) < margin) | (np.abs(s - 1) < margin) | (np.abs(t) < margin) | (np.abs(t - 1) < margin)
    hit = (s > 0) & (s < 1) & (t > 0) & (t < 1)
    if (near & (s > -margin) & (s < 1 + margin) & (t > -margin) & (t < 1 + margin)).any():
        return None
    if not hit.any():
        return 0
    I, J = np.nonzero(hit)
    total = 0
    for i, j in zip(I, J):
        pa = A0[i] + s[i, j] * (A1[i] - A0[i])
        pb = B0[j] + t[i, j] * (B1[j] - B0[j])
        dh = (pa - pb) @ d
        if abs(dh) < margin:
            return None
        tang = np.cross(A1[i] - A0[i], B1[j] - B0[j]) @ d
        total += int(np.sign(tang) * np.sign(dh))
    return total


def linking_number(a: PolyLoop, b: PolyLoop, seed: int = 0, tries: int = 64) -> int:
    """Gauss linking number from the crossings of a generic projection."""
    if loop_distance(a, b) <= EPS_GEO:
        raise LoopsTouch("loops touch", witness={"distance": loop_distance(a, b)})
    rng = np.random.default_rng(seed)
    for _ in range(tries):
        d = rng.normal(size=3)
        total = _crossing_sum(a, b, d)
        if total is None:
            continue
        if total % 2:
            continue
        return total // 2
    raise GeometryError("no generic projection found")


# --------------------------------------------------------------------------
# Rolled square with loops


@dataclass
class LockedConfig:
    surface: Embed3D
    loops: tuple
    loop_length: float
    attach: tuple = ((0.0, 0.5), (1.0, 0.5))
    params: dict = field(default_factory=dict)

    def to_json(self):
        return {"format": 1, "surface": self.surface.to_json(),
                "loops": [lp.to_json() for lp in self.loops], "loopLength": self.loop_length,
                "attach": [list(p) for p in self.attach], "params": self.params}

    def export(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        verts, tris = triangle_mesh(self.surface)
        write_obj(os.path.join(out_dir, "surface.obj"), verts, tris)
        with open(os.path.join(out_dir, "loops.json"), "w") as fh:
            json.dump({"format": 1, "loops": [lp.to_json() for lp in self.loops]}, fh, indent=1)


def _hanging_loop(E: Embed3D, point, outward, length, segments):
    """Regular polygon of the given perimeter in the plane of the face at point,
    lying outside the material and touching it only at the point."""
    f = E.face_of(point)
    rho = length / (2 * segments * math.sin(math.pi / segments))
    p = np.asarray(point, dtype=float)
    out = np.asarray(outward, dtype=float)
    tang = np.array([-out[1], out[0]])
    phi = 2 * math.pi * np.arange(segments) / segments
    X = p + rho * (1 - np.cos(phi))[:, None] * out + rho * np.sin(phi)[:, None] * tang
    return PolyLoop(tuple(map(tuple, E.face_map(f).plane(X))))


def attach_loops(E: Embed3D, loop_length: float, segments: int = 16) -> LockedConfig:
    """Loops at the midpoints of the left and right sides of the unit square."""
    loops = (_hanging_loop(E, (0.0, 0.5), (-1.0, 0.0), loop_length, segments),
             _hanging_loop(E, (1.0, 0.5), (1.0, 0.0), loop_length, segments))
    return LockedConfig(E, loops, loop_length)


def _segment_hits_triangle(p, q, T, tol):
    """Intersection points of segment pq with triangle T (endpoints of the overlap)."""
    n = np.cross(T[1] - T[0], T[2] - T[0])
    n /= np.linalg.norm(n)
    dp, dq = (p - T[0]) @ n, (q - T[0]) @ n
    if (dp > tol and dq > tol) or (dp < -tol and dq < -tol):
        return []
    if abs(dp) <= tol and abs(dq) <= tol:
        e1 = (T[1] - T[0]) / np.linalg.norm(T[1] - T[0])
        e2 = np.cross(n, e1)
        to2 = np.stack([e1, e2], axis=1)
        inter = SPolygon((T - T[0]) @ to2).intersection(LineString([(p - T[0]) @ to2, (q - T[0]) @ to2]))
        if inter.is_empty or inter.distance(inter) > 0:
            return []
        return [T[0] + x * e1 + y * e2 for x, y in np.asarray(inter.coords if hasattr(inter, "coords") else
                                                                 [c for g in inter.geoms for c in g.coords])]
    x = p + (q - p) * (dp / (dp - dq)) if abs(dp - dq) > 0 else p
    # barycentric test with tolerance
    v0, v1, v2 = T[1] - T[0], T[2] - T[0], x - T[0]
    d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
    d20, d21 = v2 @ v0, v2 @ v1
    den = d00 * d11 - d01 * d01
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    eps = tol / math.sqrt(max(d00, d11))
    if v >= -eps and w >= -eps and v + w <= 1 + eps:
        return [x]
    return []


def check_config(cfg: LockedConfig, tol: float = EPS_GEO):
    """Raise SelfIntersecting if the surface, the loops or the two together collide."""
    rep = check_self_intersection(cfg.surface)
    if not rep.ok:
        raise SelfIntersecting("surface self-intersects", witness=rep.witness)
    a, b = cfg.loops
    if loop_distance(a, b) <= tol:
        raise SelfIntersecting("loops touch", witness={"distance": loop_distance(a, b)})
    from .embed3d import triangulate_face
    tris = []
    E = cfg.surface
    for f, poly in enumerate(E.faces):
        M = E.face_map(f)
        tris += [M.plane(T) for T in triangulate_face(poly)]
    tris = np.asarray(tris)
    lo, hi = tris.min(axis=1) - tol, tris.max(axis=1) + tol
    for k, loop in enumerate(cfg.loops):
        anchor = loop.array[0]
        for p, q in zip(*loop.segments()):
            box_lo, box_hi = np.minimum(p, q), np.maximum(p, q)
            cand = np.nonzero(((lo <= box_hi) & (hi >= box_lo)).all(axis=1))[0]
            for c in cand:
                for x in _segment_hits_triangle(p, q, tris[c], tol):
                    if np.linalg.norm(x - anchor) > 1e3 * tol:
                        raise SelfIntersecting(f"loop {k} meets the surface",
                                               witness={"loop": k, "point": [float(v) for v in x]})


def roll_chords(turns: int, chords_per_turn: int, tilt: float = 0.0):
    """Parallel chords of the unit square for a spiral roll, plus their offsets.

    Chords have direction (2 tilt, 1), so the one through the center meets the
    top and bottom sides at distance 1/2 - |tilt| from the nearer side. Widths
    between chords grow linearly; one chord passes through the center.
    """
    P = validate_polygon(UNIT_SQUARE)
    N = math.hypot(1.0, 2 * tilt)
    u = np.array([2 * tilt, 1.0]) / N
    n = np.array([1.0, -2 * tilt]) / N
    h = 0.5 * (abs(n[0]) + abs(n[1]))
    m = turns * chords_per_turn
    q = 0.25 / chords_per_turn
    w = 1 + q * np.arange(m + 1)
    w *= 2 * h / w.sum()
    s = -h + np.cumsum(w)[:m]
    s -= s[np.argmin(np.abs(s))]
    c = np.array([0.5, 0.5])
    sq = SPolygon(UNIT_SQUARE)
    chords = []
    for sk in s:
        o = c + sk * n
        seg = sq.intersection(LineString([o - 3 * u, o + 3 * u]))
        if seg.is_empty or seg.length <= 1e-9:
            raise GeometryError(f"chord at offset {sk} misses the square")
        a, b = np.asarray(seg.coords)[[0, -1]]
        chords.append(FoldChord.from_points(P, tuple(a), tuple(b)))
    return P, tuple(chords), s


def build_locked_example(turns: int = 2, chords_per_turn: int = 16, loop_length: float = 0.05,
                         tilt: float = 0.0, loop_segments: int = 16) -> LockedConfig:
    """Unit square rolled into a polygonal spiral with loops at the side midpoints."""
    if turns < 1:
        raise ValueError("turns must be >= 1")
    if chords_per_turn < 8:
        raise ValueError("chords_per_turn must be >= 8")
    if not 0 < loop_length < 0.1:
        raise ValueError("loop_length must be in (0, 0.1)")
    if not abs(tilt) < 0.5:
        raise ValueError("tilt must be in (-1/2, 1/2)")
    P, chords, _ = roll_chords(turns, chords_per_turn, tilt)
    alpha = math.pi - 2 * math.pi / chords_per_turn
    E = Embed3D(P, chords, (alpha,) * len(chords))
    cfg = attach_loops(E, loop_length, loop_segments)
    cfg.params = {"turns": turns, "chordsPerTurn": chords_per_turn, "tilt": tilt}
    check_config(cfg)
    return cfg


# --------------------------------------------------------------------------
# Measurements


@dataclass
class PropertyReport:
    loop_separation: float
    nearest_bend_dist: Optional[float]
    bend_crossing_offsets: Optional[tuple]
    pairwise_linking: tuple

    def to_json(self):
        return {"format": 1, "loopSeparation": self.loop_separation,
                "nearestBendDistToCenter": self.nearest_bend_dist,
                "bendCrossingOffsets": list(self.bend_crossing_offsets) if self.bend_crossing_offsets else None,
                "pairwiseLinking": list(self.pairwise_linking)}


def bend_closure(E: Embed3D, j: int, arc_segments: int = 32) -> PolyLoop:
    """Image of chord j closed by a half circle on the sphere having it as diameter."""
    p, q = (np.asarray(x) for x in E.chord_points(j))
    f = E.decomposition.chord_faces[j][0]
    M = E.face_map(f)
    B0, B1 = M.plane(np.array([p, q]))
    normal = M.matrix[:, 2]
    mid, r = (B0 + B1) / 2, np.linalg.norm(B1 - B0) / 2
    ax = (B1 - mid) / r
    w = normal - (normal @ ax) * ax
    w /= np.linalg.norm(w)
    phi = np.linspace(0, math.pi, arc_segments + 1)[1:-1]
    arc = mid + r * np.cos(phi)[:, None] * ax + r * np.sin(phi)[:, None] * w
    return PolyLoop(tuple(map(tuple, np.vstack([B0, B1, arc]))))


def measure_properties(cfg: LockedConfig, seed: int = 0) -> PropertyReport:
    E = cfg.surface
    a, b = cfg.loops
    sep = loop_distance(a, b)
    lk_ab = linking_number(a, b, seed)
    if not E.chords:
        return PropertyReport(sep, None, None, (lk_ab, None, None))
    center = np.array([0.5, 0.5])
    dists = []
    for j in range(len(E.chords)):
        p, q = (np.asarray(x) for x in E.chord_points(j))
        t = np.clip((center - p) @ (q - p) / ((q - p) @ (q - p)), 0, 1)
        dists.append(float(np.linalg.norm(p + t * (q - p) - center)))
    j = int(np.argmin(dists))
    p, q = E.chord_points(j)
    offsets = None
    ends = sorted((p, q), key=lambda v: v[1])
    if abs(ends[0][1]) <= 1e-9 and abs(ends[1][1] - 1) <= 1e-9:
        offsets = tuple(float(min(v[0], 1 - v[0])) for v in (ends[1], ends[0]))   # (top, bottom)
    C = bend_closure(E, j)
    return PropertyReport(sep, dists[j], offsets,
                          (lk_ab, linking_number(a, C, seed), linking_number(b, C, seed)))
