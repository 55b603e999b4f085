"""Flat foldings of a polygon whose fold lines run boundary to boundary.

Chords never cross, so they cut the domain into faces whose adjacency is a
tree. Each face is placed by the product of reflections across the chords on
its tree path from the root face, followed by one global placement.
Layer order is a bit per overlapping face pair.

Validity is checked on straight lines of the image plane: along such a line
the faces form a one-dimensional layered folding, checked with
:func:`unfolder.fold1d.check_layers`.
"""

from __future__ import annotations

import functools
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import shapely
from shapely.geometry import LineString, Point
from shapely.geometry import Polygon as SPolygon
from shapely.ops import polygonize, unary_union

from .errors import (
    CenterOnChordInterior,
    CrossingChords,
    FoldingError,
    InconsistentStacking,
    InvalidFrame,
    MultipleChords,
)
from .fold1d import (
    Folding1D,
    Validity,
    check_layers,
    equal_arclength_params,
    layer_cells,
    merge_values,
    unfold_motion_1d,
)
from .geom import (
    EPS_GEO,
    Location,
    Polygon,
    distance_point_segment,
    point_in_polygon,
    point_on_segment,
    segments_cross_properly,
)
from .spiral import SpiralParams, shrink_to_scale

# --------------------------------------------------------------------------
# Planar affine maps


@dataclass(frozen=True)
class Affine2:
    """x -> A x + t, stored as plain floats so instances hash and compare."""

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    @classmethod
    def from_matrix(cls, A, t) -> "Affine2":
        return cls(float(A[0][0]), float(A[0][1]), float(A[1][0]), float(A[1][1]),
                   float(t[0]), float(t[1]))

    @classmethod
    def reflection(cls, p, q) -> "Affine2":
        """Reflection across the line through p and q."""
        ux, uy = q[0] - p[0], q[1] - p[1]
        n = math.hypot(ux, uy)
        ux, uy = ux / n, uy / n
        A = np.array([[2 * ux * ux - 1, 2 * ux * uy], [2 * ux * uy, 2 * uy * uy - 1]])
        p = np.asarray(p, dtype=float)
        return cls.from_matrix(A, p - A @ p)

    @classmethod
    def rotation(cls, angle, center=(0.0, 0.0), scale=1.0) -> "Affine2":
        cs, sn = math.cos(angle), math.sin(angle)
        A = scale * np.array([[cs, -sn], [sn, cs]])
        c = np.asarray(center, dtype=float)
        return cls.from_matrix(A, c - A @ c)

    @property
    def A(self):
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def t(self):
        return np.array([self.tx, self.ty])

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.A.T + self.t

    def __matmul__(self, other: "Affine2") -> "Affine2":
        return Affine2.from_matrix(self.A @ other.A, self.A @ other.t + self.t)

    def inverse(self) -> "Affine2":
        Ai = np.linalg.inv(self.A)
        return Affine2.from_matrix(Ai, -Ai @ self.t)

    def is_isometry(self, tol=1e-9) -> bool:
        A = self.A
        return bool(np.abs(A.T @ A - np.eye(2)).max() <= tol)

    def to_json(self):
        return {"matrix": [[self.a, self.b], [self.c, self.d]], "translation": [self.tx, self.ty]}


IDENTITY = Affine2()


def similarity_affine(sim) -> Affine2:
    """Affine2 of a :class:`unfolder.spiral.Similarity`."""
    A = sim.matrix()
    c = np.asarray(sim.center, dtype=float)
    return Affine2.from_matrix(A, c - A @ c)


# --------------------------------------------------------------------------
# Chords


def boundary_point(P: Polygon, loc):
    e, t = loc
    a, b = P.edge(int(e))
    return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))


def locate_on_boundary(P: Polygon, x, snap=1e-12):
    """(edge, t) of the boundary point nearest x; t = 1 is reported as the next edge at 0."""
    best = None
    for e, (a, b) in enumerate(P.edges()):
        d = distance_point_segment(x, a, b)
        if best is None or d < best[0]:
            dx, dy = b[0] - a[0], b[1] - a[1]
            t = ((x[0] - a[0]) * dx + (x[1] - a[1]) * dy) / (dx * dx + dy * dy)
            best = (d, e, min(1.0, max(0.0, t)))
    _, e, t = best
    t = float(t)
    if t >= 1 - snap:
        e, t = (e + 1) % P.n, 0.0
    elif t <= snap:
        t = 0.0
    return (e, t)


@dataclass(frozen=True)
class FoldChord:
    """Segment between two boundary points, each given as (edge index, t in [0, 1])."""

    a: tuple
    b: tuple

    @classmethod
    def from_points(cls, P: Polygon, p, q) -> "FoldChord":
        return cls(locate_on_boundary(P, p), locate_on_boundary(P, q))

    def points(self, P: Polygon):
        return boundary_point(P, self.a), boundary_point(P, self.b)

    def params(self):
        return self.a[0] + self.a[1], self.b[0] + self.b[1]

    def to_json(self):
        return {"a": [int(self.a[0]), float(self.a[1])], "b": [int(self.b[0]), float(self.b[1])]}

    @classmethod
    def from_json(cls, d) -> "FoldChord":
        def loc(v):
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                return (int(v), 0.0)
            return (int(v[0]), float(v[1]))
        return cls(loc(d["a"]), loc(d["b"]))


def check_chord(P: Polygon, ch: FoldChord, label=None):
    p, q = ch.points(P)
    if math.dist(p, q) <= EPS_GEO * max(1.0, P.diameter):
        raise FoldingError(f"chord {label} has coincident endpoints", witness={"chord": label})
    tol = EPS_GEO * max(1.0, P.diameter)
    for e, (a, b) in enumerate(P.edges()):
        # rounded endpoints may sit a hair past their own edge
        if segments_cross_properly(p, q, a, b) and \
                min(distance_point_segment(p, a, b), distance_point_segment(q, a, b)) > tol:
            raise FoldingError(f"chord {label} leaves the domain across edge {e}",
                               witness={"chord": label, "edge": e})
    for v in P.vertices:
        if v != p and v != q and point_on_segment(p, q, v):
            raise FoldingError(f"chord {label} runs through vertex {v}", witness={"chord": label})
    mid = ((p[0] + q[0]) / 2, (p[1] + q[1]) / 2)
    if point_in_polygon(P, mid) is not Location.INSIDE:
        raise FoldingError(f"chord {label} is not interior", witness={"chord": label})


def _interleave(p, q, tol=1e-12):
    (a0, a1), (b0, b1) = sorted(p), sorted(q)
    pts = [a0, a1, b0, b1]
    if any(abs(x - y) <= tol for i, x in enumerate(pts) for y in pts[i + 1:]):
        return False
    return a0 < b0 < a1 < b1 or b0 < a0 < b1 < a1


# --------------------------------------------------------------------------
# Faces


@dataclass
class FaceDecomposition:
    faces: list            # vertex lists, counterclockwise
    chord_faces: list      # per chord: (face left of a->b, face left of b->a)
    parent: list           # per face: (parent face, chord) or None for the root
    depth: list
    order: list            # faces in BFS order from the root

    @property
    def root(self) -> int:
        return 0

    def tree_edges(self):
        return [(p, k, ch) for k, pc in enumerate(self.parent) if pc is not None for p, ch in [pc]]

    def shapely_faces(self):
        return [SPolygon(f) for f in self.faces]


def face_decomposition(P: Polygon, chords) -> FaceDecomposition:
    """Faces cut out by non-crossing chords and their dual tree.

    Face 0 is the one containing the boundary stretch that starts at vertex 0.
    """
    chords = list(chords)
    n = P.n
    for j, ch in enumerate(chords):
        check_chord(P, ch, j)
    params = [tuple(x % n for x in ch.params()) for ch in chords]
    for i in range(len(chords)):
        for j in range(i + 1, len(chords)):
            if _interleave(params[i], params[j]):
                raise CrossingChords(f"chords {i} and {j} cross", witness=[i, j])
            if sorted(params[i]) == sorted(params[j]):
                raise CrossingChords(f"chords {i} and {j} coincide", witness=[i, j])

    ts = merge_values([float(k) for k in range(n)] + [x for pr in params for x in pr], 1e-12)
    if ts and ts[-1] > n - 1e-12:
        ts.pop()

    def idx(x):
        return min(range(len(ts)), key=lambda k: min(abs(ts[k] - x), n - abs(ts[k] - x)))

    m = len(ts)
    coords = [boundary_point(P, (int(t) % n, t - int(t))) for t in ts]
    for k in range(n):
        coords[idx(float(k))] = P.vertices[k]
    ends = [(idx(a), idx(b)) for a, b in params]

    def key(v, w):
        return (ts[w] - ts[v]) % n

    # outgoing half-edges per boundary point: ("arc", next) or ("chord", j, other)
    out = {v: [(key(v, (v + 1) % m), ("arc", None), (v + 1) % m)] for v in range(m)}
    for j, (u, w) in enumerate(ends):
        out[u].append((key(u, w), ("chord", j), w))
        out[w].append((key(w, u), ("chord", j), u))
    for v in out:
        out[v].sort(key=lambda e: e[0])

    used = set()
    faces, face_chords = [], []
    chord_faces = [[None, None] for _ in chords]

    def trace(v0, first):
        cyc, cross = [], []
        v, edge = v0, first
        while True:
            k, lab, w = edge
            used.add((v, lab, w))
            cyc.append(v)
            if lab[0] == "chord":
                cross.append((lab[1], v, w))
            arriving = key(w, v)
            cands = [e for e in out[w] if e[0] < arriving - 1e-15]
            edge = cands[-1]
            v = w
            if (v, edge[1], edge[2]) in used:
                return cyc, cross

    starts = [(0, out[0][0])] + [(v, e) for v in range(m) for e in out[v]]
    for v, e in starts:
        if (v, e[1], e[2]) in used:
            continue
        cyc, cross = trace(v, e)
        f = len(faces)
        faces.append([coords[u] for u in cyc])
        for j, u, w in cross:
            side = 0 if (u, w) == ends[j] else 1
            chord_faces[j][side] = f
        face_chords.append(cross)

    nf = len(faces)
    if nf != len(chords) + 1:
        raise FoldingError(f"decomposition produced {nf} faces for {len(chords)} chords")
    adj = [[] for _ in range(nf)]
    for j, (f0, f1) in enumerate(chord_faces):
        adj[f0].append((f1, j))
        adj[f1].append((f0, j))
    parent = [None] * nf
    depth = [0] * nf
    seen = {0}
    order = [0]
    dq = deque([0])
    while dq:
        f = dq.popleft()
        for g, j in sorted(adj[f]):
            if g not in seen:
                seen.add(g)
                parent[g] = (f, j)
                depth[g] = depth[f] + 1
                order.append(g)
                dq.append(g)
    return FaceDecomposition(faces, [tuple(cf) for cf in chord_faces], parent, depth, order)


# --------------------------------------------------------------------------
# Flat foldings


def _canon_overlaps(overlaps):
    out = {}
    for i, j, above in overlaps:
        i, j = int(i), int(j)
        if i == j:
            raise FoldingError(f"overlap bit for face {i} with itself")
        if i > j:
            i, j, above = j, i, not above
        out[(i, j)] = bool(above)
    return tuple(sorted((i, j, a) for (i, j), a in out.items()))


@dataclass(frozen=True)
class FlatFold2D:
    domain: Polygon
    chords: tuple = ()
    overlaps: tuple = ()      # (i, j, True if face i is above face j)
    placement: Affine2 = IDENTITY

    def __post_init__(self):
        object.__setattr__(self, "chords", tuple(self.chords))
        object.__setattr__(self, "overlaps", _canon_overlaps(self.overlaps))

    @functools.cached_property
    def decomposition(self) -> FaceDecomposition:
        return face_decomposition(self.domain, self.chords)

    @property
    def faces(self):
        return self.decomposition.faces

    def chord_points(self, j):
        return self.chords[j].points(self.domain)

    @functools.cached_property
    def material_isometries(self):
        """Per face, the product of chord reflections from the root."""
        dec = self.decomposition
        iso = [None] * len(dec.faces)
        iso[0] = IDENTITY
        for f in dec.order[1:]:
            p, j = dec.parent[f]
            iso[f] = iso[p] @ Affine2.reflection(*self.chord_points(j))
        return iso

    def face_map(self, f) -> Affine2:
        return self.placement @ self.material_isometries[f]

    def above(self, i, j) -> Optional[bool]:
        for a, b, up in self.overlaps:
            if (a, b) == (i, j):
                return up
            if (a, b) == (j, i):
                return not up
        return None

    @functools.cached_property
    def _bits(self):
        d = {}
        for a, b, up in self.overlaps:
            d[(a, b)] = up
            d[(b, a)] = not up
        return d

    def face_images(self):
        return [SPolygon(self.face_map(f)(np.asarray(poly))) for f, poly in enumerate(self.faces)]

    def face_of(self, x, tol=1e-9) -> int:
        sf = self.decomposition.shapely_faces()
        d = [g.distance(Point(x)) for g in sf]
        return int(np.argmin(d))

    def map_points(self, X):
        """Images of material points (each assigned to its nearest face)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        sf = self.decomposition.shapely_faces()
        D = np.stack([shapely.distance(g, shapely.points(X)) for g in sf], axis=1)
        which = D.argmin(axis=1)
        out = np.empty_like(X)
        for f in range(len(sf)):
            sel = which == f
            if sel.any():
                out[sel] = self.face_map(f)(X[sel])
        return out

    def to_json(self) -> dict:
        return {"format": 1, "domain": {"vertices": [list(v) for v in self.domain.vertices]},
                "chords": [c.to_json() for c in self.chords],
                "overlaps": [[i, j, "above" if up else "below"] for i, j, up in self.overlaps],
                "placement": self.placement.to_json()}

    @classmethod
    def from_json(cls, d, domain: Optional[Polygon] = None) -> "FlatFold2D":
        from .geom import validate_polygon
        P = domain or validate_polygon([tuple(v) for v in d["domain"]["vertices"]])
        ov = [(int(i), int(j), s == "above") for i, j, s in d.get("overlaps", [])]
        pl = d.get("placement")
        placement = IDENTITY if pl is None else Affine2.from_matrix(pl["matrix"], pl["translation"])
        return cls(P, tuple(FoldChord.from_json(c) for c in d.get("chords", [])), tuple(ov), placement)


def chord_fold(P: Polygon, p, q, flap_above=True) -> FlatFold2D:
    """Single straight fold through boundary points p and q."""
    F = FlatFold2D(P, (FoldChord.from_points(P, p, q),))
    f0, f1 = F.decomposition.chord_faces[0]
    return FlatFold2D(P, F.chords, ((f1 if f0 == 0 else f0, 0, flap_above),))


def with_layer_order(P: Polygon, chords, order, placement: Affine2 = IDENTITY) -> FlatFold2D:
    """Overlap bits from a global bottom-to-top face order, for overlapping pairs."""
    F = FlatFold2D(P, tuple(chords), (), placement)
    imgs = F.face_images()
    rank = {f: r for r, f in enumerate(order)}
    tol = 1e-12 * max(1.0, P.diameter) ** 2
    bits = [(i, j, rank[i] > rank[j]) for i in range(len(imgs)) for j in range(i + 1, len(imgs))
            if imgs[i].intersection(imgs[j]).area > tol]
    return FlatFold2D(P, F.chords, tuple(bits), placement)


# --------------------------------------------------------------------------
# Validation by restriction to image lines


@dataclass
class LineRestriction:
    pieces: list      # (face, lo, hi) along the line
    creases: list     # (piece a, piece b, y, side, chord)
    orders: list      # per cell, bottom-to-top piece indices
    cells: list

    @property
    def intervals(self):
        return [(lo, hi) for _, lo, hi in self.pieces]


def _segments_of(geom):
    if geom.is_empty:
        return []
    if geom.geom_type == "LineString":
        return [geom]
    if hasattr(geom, "geoms"):
        return [g for part in geom.geoms for g in _segments_of(part)]
    return []


def _cell_order(F: FlatFold2D, faces, where):
    """Bottom-to-top order of pieces from pairwise bits; raises on gaps or cycles."""
    bits = F._bits
    below = {i: 0 for i in range(len(faces))}
    for a in range(len(faces)):
        for b in range(a + 1, len(faces)):
            fa, fb = faces[a], faces[b]
            up = bits.get((fa, fb))
            if up is None:
                raise InconsistentStacking(f"faces {fa} and {fb} overlap without an order",
                                           witness={"faces": [fa, fb], "at": where})
            if up:
                below[a] += 1
            else:
                below[b] += 1
    order = sorted(range(len(faces)), key=lambda k: below[k])
    if [below[k] for k in order] != list(range(len(faces))):
        raise InconsistentStacking(f"cyclic layer order among faces {sorted(faces)}",
                                   witness={"faces": sorted(faces), "at": where})
    return order


def restrict_to_line(F: FlatFold2D, point, direction, images=None, tol=None) -> LineRestriction:
    """The layered 1D folding seen along an image-plane line."""
    scale = max(1.0, F.domain.diameter)
    tol = tol or 1e-9 * scale
    images = images or F.face_images()
    o = np.asarray(point, dtype=float)
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    reach = 4 * scale + float(np.linalg.norm(o))
    line = LineString([o - reach * u, o + reach * u])
    pieces = []
    for f, img in enumerate(images):
        for seg in _segments_of(img.intersection(line)):
            c = np.asarray(seg.coords)
            s = (c - o) @ u
            lo, hi = float(s.min()), float(s.max())
            if hi - lo > tol:
                pieces.append((f, lo, hi))
    creases = []
    for j in range(len(F.chords)):
        f0, f1 = F.decomposition.chord_faces[j]
        p, q = F.face_map(f0)(np.asarray(F.chord_points(j)))
        d = q - p
        den = d[0] * u[1] - d[1] * u[0]
        if abs(den) <= 1e-12 * np.linalg.norm(d):
            continue
        w = o - p
        # p + s d = o + r u
        s = (w[0] * u[1] - w[1] * u[0]) / den
        r = (w[0] * d[1] - w[1] * d[0]) / den
        if not (1e-9 < s < 1 - 1e-9):
            continue
        ends = {}
        for k, (f, lo, hi) in enumerate(pieces):
            if f not in (f0, f1):
                continue
            if abs(hi - r) <= 10 * tol:
                ends[f] = (k, -1)
            elif abs(lo - r) <= 10 * tol:
                ends[f] = (k, 1)
        if f0 in ends and f1 in ends and ends[f0][1] == ends[f1][1]:
            creases.append((ends[f0][0], ends[f1][0], float(r), ends[f0][1], j))
    cells = layer_cells([(lo, hi) for _, lo, hi in pieces], tol)
    orders = []
    for u0, u1, cover in cells:
        faces = [pieces[k][0] for k in cover]
        mid = o + 0.5 * (u0 + u1) * u
        order = _cell_order(F, faces, [float(mid[0]), float(mid[1])])
        orders.append([cover[k] for k in order])
    return LineRestriction(pieces, creases, orders, cells)


def _breakpoints_on_segment(p, q, segments, tol):
    """Parameters in (0, 1) where other segments meet segment pq."""
    d = q - p
    L2 = float(d @ d)
    out = []
    for a, b in segments:
        e = b - a
        den = d[0] * e[1] - d[1] * e[0]
        w = a - p
        if abs(den) <= 1e-12 * math.sqrt(L2 * float(e @ e)):
            # parallel: collinear overlap endpoints
            if abs(w[0] * d[1] - w[1] * d[0]) <= tol * math.sqrt(L2):
                out += [float((a - p) @ d / L2), float((b - p) @ d / L2)]
            continue
        s = (w[0] * e[1] - w[1] * e[0]) / den
        r = (w[0] * d[1] - w[1] * d[0]) / den
        if -1e-12 <= r <= 1 + 1e-12:
            out.append(float(s))
    return sorted(t for t in out if 0 < t < 1)


def transversal_lines(F: FlatFold2D, per_class: int = 2, seed: int = 0, images=None):
    """Lines checked by :func:`validate_flatfold`.

    Each chord image is cut at every point where another face-image edge meets
    it; each piece gets a perpendicular line through its midpoint plus
    ``per_class`` random lines through random points of the piece. A few fully
    random lines are added as well.
    """
    rng = random.Random(seed)
    images = images or F.face_images()
    tol = 1e-9 * max(1.0, F.domain.diameter)
    segs = []
    for img in images:
        c = np.asarray(img.exterior.coords)
        segs += [(c[k], c[k + 1]) for k in range(len(c) - 1)]
    lines = []
    for j in range(len(F.chords)):
        f0, _ = F.decomposition.chord_faces[j]
        p, q = F.face_map(f0)(np.asarray(F.chord_points(j)))
        d = q - p
        nrm = np.array([-d[1], d[0]])
        cuts = merge_values([0.0, 1.0] + _breakpoints_on_segment(p, q, segs, tol), 1e-9)
        for s0, s1 in zip(cuts, cuts[1:]):
            lines.append((p + 0.5 * (s0 + s1) * d, nrm, {"chord": j, "class": [s0, s1]}))
            for _ in range(per_class):
                s = rng.uniform(s0, s1)
                ang = rng.uniform(-1.2, 1.2)
                cs, sn = math.cos(ang), math.sin(ang)
                dirn = np.array([cs * nrm[0] - sn * nrm[1], sn * nrm[0] + cs * nrm[1]])
                lines.append((p + s * d, dirn, {"chord": j, "class": [s0, s1], "random": True}))
    if images:
        lo = np.min([img.bounds[:2] for img in images], axis=0)
        hi = np.max([img.bounds[2:] for img in images], axis=0)
        for _ in range(max(2, per_class)):
            pt = np.array([rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1])])
            ang = rng.uniform(0, math.pi)
            lines.append((pt, np.array([math.cos(ang), math.sin(ang)]), {"random": True}))
    return lines


def check_flatfold(F: FlatFold2D, transversals_per_class: int = 2, seed: int = 0) -> None:
    images = F.face_images()      # builds the faces, raising on bad chords
    scale = max(1.0, F.domain.diameter)
    atol = 1e-10 * scale * scale
    for f in range(len(images)):
        if not F.face_map(f).is_isometry(1e-9):
            raise FoldingError(f"face {f} is not placed isometrically", witness={"face": f})
    # every overlapping pair needs a bit; every overlap cell needs an acyclic order
    for i in range(len(images)):
        for j in range(i + 1, len(images)):
            if F._bits.get((i, j)) is None and images[i].intersection(images[j]).area > atol:
                raise InconsistentStacking(f"faces {i} and {j} overlap without an order",
                                           witness={"faces": [i, j]})
    if len(images) > 2:
        cells = polygonize(unary_union([img.exterior for img in images]))
        for cell in cells:
            if cell.area <= atol:
                continue
            rp = cell.representative_point()
            faces = [f for f, img in enumerate(images) if img.contains(rp)]
            _cell_order(F, faces, [rp.x, rp.y])
    for pt, dirn, info in transversal_lines(F, transversals_per_class, seed, images):
        R = restrict_to_line(F, pt, dirn, images)
        try:
            check_layers(R.intervals, R.creases, R.orders, 1e-9 * scale, R.cells)
        except FoldingError as e:
            w = dict(e.witness or {})
            w["line"] = {"point": [float(pt[0]), float(pt[1])], "direction": [float(dirn[0]), float(dirn[1])]}
            w.update({k: v for k, v in info.items() if k != "random"})
            if isinstance(w.get("piece"), int):
                w["face"] = R.pieces[w["piece"]][0]
            raise type(e)(str(e), witness=w) from None


def validate_flatfold(F: FlatFold2D, transversals_per_class: int = 2, seed: int = 0) -> Validity:
    try:
        check_flatfold(F, transversals_per_class, seed)
    except FoldingError as e:
        return Validity(False, type(e).__name__, str(e), e.witness)
    return Validity(True)


# --------------------------------------------------------------------------
# Motions


@dataclass
class Motion2D:
    params: list                 # (stage, value)
    frames: list
    events: dict = field(default_factory=dict)
    case: str = "a"

    def to_json(self) -> dict:
        return {"format": 1, "case": self.case,
                "events": {str(k): v for k, v in self.events.items()},
                "frames": [dict(fr.to_json(), stage=s, param=float(v))
                           for (s, v), fr in zip(self.params, self.frames)]}


def _refinement_points(F: FlatFold2D, G: FlatFold2D):
    pts = [np.asarray(f) for f in F.faces] + [np.asarray(g) for g in G.faces]
    extra = []
    for i in range(len(F.chords)):
        p, q = F.chord_points(i)
        for j in range(len(G.chords)):
            r, s = G.chord_points(j)
            x = LineString([p, q]).intersection(LineString([r, s]))
            if not x.is_empty and x.geom_type == "Point":
                extra.append((x.x, x.y))
    if extra:
        pts.append(np.asarray(extra))
    return np.vstack(pts)


def frame_distance(F: FlatFold2D, G: FlatFold2D) -> float:
    """Sup over material points of the image distance between two frames.

    The maps differ by an affine map on each cell of the common refinement of
    the two face decompositions, so the sup is attained at its vertices.
    """
    X = _refinement_points(F, G)
    return float(np.abs(np.linalg.norm(F.map_points(X) - G.map_points(X), axis=1)).max())


def _reference_face(F, c) -> int:
    """Face containing c; on a chord, the largest incident face (lowest index on ties)."""
    sf = F.decomposition.shapely_faces()
    pc = Point(c)
    scale = max(1.0, F.domain.diameter)
    near = [f for f, g in enumerate(sf) if g.distance(pc) <= 1e-9 * scale]
    if not near:
        return int(np.argmin([g.distance(pc) for g in sf]))
    return max(near, key=lambda f: (sf[f].area, -f))


def _chord_through(F, c, tol):
    return [j for j in range(len(F.chords))
            if distance_point_segment(c, *F.chord_points(j)) <= tol]


class _Shrinker:
    """Chords of the conjugated spiral shrink: frame i carries the preimages
    under s_i of the original chords clipped to the shrunk domain."""

    def __init__(self, F, sp: SpiralParams):
        self.F, self.sp = F, sp
        self.P = F.domain
        self.c = tuple(map(float, sp.center))
        self.scale = max(1.0, self.P.diameter)
        self.tol = 1e-9 * self.scale
        self.ref = _reference_face(F, self.c)
        self.orig_faces = F.decomposition.shapely_faces()
        self.chord_lines = [LineString(F.chord_points(j)) for j in range(len(F.chords))]

    def shrunk_domain(self, i):
        s = shrink_to_scale(self.sp, i)
        return s, SPolygon(s(np.asarray(self.P.vertices)))

    def pieces(self, j, i):
        _, SP = self.shrunk_domain(i)
        return [g for g in _segments_of(self.chord_lines[j].intersection(SP)) if g.length > self.tol * i]

    def threshold(self, j, iters=80):
        """Scale below which chord j no longer meets the shrunk domain.

        Returns (lo, hi): the chord is gone at lo and present at hi.
        """
        if self.pieces(j, 1e-12):
            return 0.0, 0.0
        lo, hi = 1e-12, 1.0
        for _ in range(iters):
            mid = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
            if self.pieces(j, mid):
                hi = mid
            else:
                lo = mid
        return lo, hi

    def preimage(self, i):
        """(s_i, chords, source chord per chord, source face per face of the new decomposition)."""
        P = self.P
        s, SP = self.shrunk_domain(i)
        sinv = s.inverse()
        chords, src = [], []
        for j, line in enumerate(self.chord_lines):
            for g in _segments_of(line.intersection(SP)):
                if g.length <= self.tol * i:
                    continue
                a, b = sinv(np.asarray(g.coords)[[0, -1]])
                chords.append(FoldChord.from_points(P, tuple(a), tuple(b)))
                src.append(j)
        dec = face_decomposition(P, chords)
        origin = []
        for poly in dec.shapely_faces():
            y = s(np.asarray(poly.representative_point().coords[0]))
            origin.append(int(np.argmin([g.distance(Point(y)) for g in self.orig_faces])))
        return s, tuple(chords), src, origin

    def rotation_angle(self, i, orientation=1.0):
        """Compensating rotation of the image at scale i."""
        return -orientation * math.tan(self.sp.theta) * math.log(i)


class _FlatShrinker(_Shrinker):
    def __init__(self, F: FlatFold2D, sp: SpiralParams):
        super().__init__(F, sp)
        ref_map = F.face_map(self.ref)
        self.ref_det = 1.0 if ref_map.det > 0 else -1.0
        self.fc = ref_map(np.asarray(self.c))

    def frame(self, i) -> FlatFold2D:
        if i == 1:
            return self.F
        F, P = self.F, self.P
        s, chords, _, origin = self.preimage(i)
        G = FlatFold2D(P, chords)
        bits = []
        for a in range(len(origin)):
            for b in range(a + 1, len(origin)):
                up = F._bits.get((origin[a], origin[b]))
                if up is not None:
                    bits.append((a, b, up))
        T = Affine2.rotation(self.rotation_angle(i, self.ref_det), tuple(self.fc), 1.0 / i)
        desired = T @ F.face_map(origin[0]) @ similarity_affine(s)
        placement = desired @ G.material_isometries[0].inverse()
        # the product is an isometry up to rounding; re-orthonormalize
        U, _, Vt = np.linalg.svd(placement.A)
        placement = Affine2.from_matrix(U @ Vt, placement.t)
        return FlatFold2D(P, G.chords, tuple(bits), placement)


def _frames_by_arclength(make, lo, hi, steps, fine=None, distance=None):
    """Frames for parameters hi -> lo spaced evenly in frame distance."""
    cache = {}
    distance = distance or frame_distance

    def get(i):
        i = float(i)
        if i not in cache:
            cache[i] = make(i)
        return cache[i]

    def dist(grid):
        fr = [get(i) for i in grid]
        return np.array([distance(a, b) for a, b in zip(fr, fr[1:])])

    params = equal_arclength_params(lo, hi, dist, steps, fine=fine or 4 * steps,
                                    max_grid=24 * steps, rounds=3)
    return params, [get(i) for i in params]


def roll_fold_to_boundary(F: FlatFold2D, chord_id: int = 0, steps: int = 64) -> Motion2D:
    """Translate the single fold line toward its smaller side until it leaves."""
    if len(F.chords) != 1:
        raise MultipleChords(f"rolling needs exactly one chord, got {len(F.chords)}",
                             witness={"chords": len(F.chords)})
    if chord_id != 0:
        raise IndexError(chord_id)
    if steps < 2:
        raise ValueError("steps must be >= 2")
    P = F.domain
    dec = F.decomposition
    sf = dec.shapely_faces()
    p, q = (np.asarray(x, dtype=float) for x in F.chord_points(0))
    d = (q - p) / np.linalg.norm(q - p)
    right = np.array([d[1], -d[0]])
    f_left, f_right = dec.chord_faces[0]
    if abs(sf[f_left].area - sf[f_right].area) <= 1e-12 * max(1.0, P.area):
        # tie: the face right of the chord run from its smaller boundary parameter
        ta, tb = F.chords[0].params()
        if ta <= tb:
            flap, main, nrm = f_right, f_left, right
        else:
            flap, main, nrm = f_left, f_right, -right
    elif sf[f_left].area < sf[f_right].area:
        flap, main, nrm = f_left, f_right, -right
    else:
        flap, main, nrm = f_right, f_left, right
    main_map = F.face_map(main)
    flap_up = F.above(flap, main)
    if flap_up is None:
        flap_up = True
    R0 = sf[flap]
    reach = np.asarray(R0.exterior.coords) @ nrm - p @ nrm
    D = float(reach.max())
    scale = max(1.0, P.diameter)
    params, frames = [("roll", 0.0)], [F]
    for k in range(1, steps):
        t = D * k / (steps - 1)
        if k == steps - 1:
            frames.append(FlatFold2D(P, (), (), main_map))
            params.append(("roll", 1.0))
            break
        o = p + t * nrm
        line = LineString([o - 4 * scale * d, o + 4 * scale * d])
        segs = [g for g in _segments_of(R0.intersection(line)) if g.length > 1e-9 * scale]
        if not segs:
            frames.append(FlatFold2D(P, (), (), main_map))
            params.append(("roll", t / D))
            continue
        chords = tuple(FoldChord.from_points(P, *np.asarray(g.coords)[[0, -1]]) for g in segs)
        G = FlatFold2D(P, chords)
        gdec = G.decomposition
        far = []
        for poly in gdec.shapely_faces():
            x = np.asarray(poly.representative_point().coords[0])
            far.append(bool(R0.contains(Point(x)) and (x - p) @ nrm > t))
        refl = Affine2.reflection(tuple(o), tuple(o + d))
        want = main_map @ refl if far[0] else main_map
        placement = want @ G.material_isometries[0].inverse()
        bits = [(a, b, flap_up if far[a] else not flap_up)
                for a in range(len(far)) for b in range(a + 1, len(far)) if far[a] != far[b]]
        frames.append(FlatFold2D(P, chords, tuple(bits), placement))
        params.append(("roll", t / D))
    return Motion2D(params, frames, {"rollDistance": D, "flapFace": flap}, "b")


def _link_folding(F: FlatFold2D, c, tol):
    """Angular link at boundary point c as a Folding1D over the interior angle.

    Returns the folding plus what is needed to lift 1D frames back: the
    reference direction angle, the interior angle and the face of each piece.
    """
    P = F.domain
    e, t = locate_on_boundary(P, c)
    n = P.n
    if t == 0.0:
        prev = P.vertices[(e - 1) % n]
        nxt = P.vertices[(e + 1) % n]
    else:
        prev, nxt = P.edge(e)
    base = math.atan2(nxt[1] - c[1], nxt[0] - c[0])
    back = math.atan2(prev[1] - c[1], prev[0] - c[0])
    total = (back - base) % (2 * math.pi)
    angles = []
    for j in range(len(F.chords)):
        a, b = F.chord_points(j)
        other = b if math.dist(a, c) <= tol else a
        angles.append(((math.atan2(other[1] - c[1], other[0] - c[0]) - base) % (2 * math.pi), j))
    angles.sort()
    folds = [a for a, _ in angles]
    sf = F.decomposition.shapely_faces()
    edges = [0.0] + folds + [total]
    r = 1e-3 * max(1e-9, min(min(sh.length for sh in sf), 1.0))
    piece_face = []
    for k in range(len(edges) - 1):
        mid = base + 0.5 * (edges[k] + edges[k + 1])
        x = Point(c[0] + r * math.cos(mid), c[1] + r * math.sin(mid))
        piece_face.append(int(np.argmin([g.distance(x) for g in sf])))
    # image angle of direction phi on piece k: dir_k * phi + off_k
    dirs, offs = [], []
    for k, f in enumerate(piece_face):
        M = F.face_map(f)
        phi = base + 0.5 * (edges[k] + edges[k + 1])
        v0 = M.A @ np.array([math.cos(phi), math.sin(phi)])
        dk = 1 if M.det > 0 else -1
        ang = math.atan2(v0[1], v0[0])
        dirs.append(dk)
        offs.append(ang - dk * (phi - base))
    # unwrap consecutive pieces so the image angle is continuous across folds
    img = [offs[0]]
    for k in range(1, len(dirs)):
        want = dirs[k - 1] * folds[k - 1] + img[k - 1]
        got = dirs[k] * folds[k - 1] + offs[k]
        img.append(offs[k] + 2 * math.pi * round((want - got) / (2 * math.pi)))
    start_image = img[0]
    f1 = Folding1D(total, tuple(folds), start_image, dirs[0], ())
    order_faces = []
    for u0, u1, cover in f1.cells():
        faces = [piece_face[m] for m in cover]
        order = _cell_order(F, faces, {"link": [u0, u1]})
        order_faces.append(tuple(cover[k] for k in order))
    f1 = Folding1D(total, tuple(folds), start_image, dirs[0], tuple(order_faces))
    return f1, base, total, piece_face


def _lift_link_frame(P: Polygon, c, fc, base, fr: Folding1D, tol):
    """2D flat folding whose chords are rays from c at the 1D fold angles."""
    scale = max(1.0, P.diameter)
    chords = []
    for a in fr.folds:
        ang = base + a
        ray = LineString([c, (c[0] + 4 * scale * math.cos(ang), c[1] + 4 * scale * math.sin(ang))])
        hit = SPolygon(P.vertices).intersection(ray)
        segs = [g for g in _segments_of(hit) if g.length > tol]
        seg = min(segs, key=lambda g: g.distance(Point(c)))
        pts = np.asarray(seg.coords)
        far = pts[np.argmax(np.linalg.norm(pts - np.asarray(c), axis=1))]
        chords.append(FoldChord.from_points(P, c, tuple(far)))
    G = FlatFold2D(P, tuple(chords))
    dec = G.decomposition
    sf = dec.shapely_faces()
    edges = [0.0, *fr.folds, fr.length]
    r = 1e-3 * min(1.0, min(g.length for g in sf))
    piece_of_face = {}
    for k in range(fr.n_pieces):
        mid = base + 0.5 * (edges[k] + edges[k + 1])
        x = Point(c[0] + r * math.cos(mid), c[1] + r * math.sin(mid))
        piece_of_face[int(np.argmin([g.distance(x) for g in sf]))] = k
    maps = {}
    for f, k in piece_of_face.items():
        maps[f] = _link_piece_map(c, fc, base, fr.piece_direction(k), fr.evaluate(edges[k]), edges[k])
    placement = maps[0] @ G.material_isometries[0].inverse()
    face_of_piece = {k: f for f, k in piece_of_face.items()}
    bits = {}
    for order in fr.stacking:
        for x in range(len(order)):
            for y in range(x + 1, len(order)):
                bits[(face_of_piece[order[y]], face_of_piece[order[x]])] = True
    bits = [(a, b, up) for (a, b), up in bits.items()]
    return FlatFold2D(P, G.chords, tuple(bits), placement)


def unfold_motion_flatfold(F: FlatFold2D, sp: SpiralParams, steps: int = 64,
                           transversals_per_class: int = 2, seed: int = 0,
                           validate: bool = True) -> Motion2D:
    """Shrink-conjugate until only folds through the center remain, then
    remove those: roll a single fold off, or unfold the angular link at a
    boundary center."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    P = F.domain
    check_flatfold(F, transversals_per_class, seed)
    c = tuple(map(float, sp.center))
    scale = max(1.0, P.diameter)
    tol = 1e-9 * scale
    sh = _FlatShrinker(F, sp)
    through = _chord_through(F, c, tol)
    vanishing = [j for j in range(len(F.chords)) if j not in through]
    thresholds = {j: sh.threshold(j) for j in vanishing}
    events = {f"chord{j}": thresholds[j][1] for j in vanishing}
    on_boundary = point_in_polygon(P, c) is Location.BOUNDARY or \
        min(distance_point_segment(c, a, b) for a, b in P.edges()) <= tol

    params, frames = [("shrink", 1.0)], [F]
    if vanishing:
        i_end = min(lo for lo, _ in thresholds.values())
        if i_end <= 0:
            raise FoldingError("a fold not through the center never leaves the shrunk domain")
        ps, frs = _frames_by_arclength(sh.frame, i_end, 1.0, steps)
        params = [("shrink", float(i)) for i in ps]
        frames = frs
    last = frames[-1]
    remaining = _chord_through(last, c, tol) if last.chords else []
    if len(remaining) != len(last.chords):
        raise FoldingError("shrinking left folds that avoid the center", witness={"center": list(c)})

    case = "a"
    if last.chords:
        if on_boundary:
            case = "c"
            for j in range(len(last.chords)):
                a, b = last.chord_points(j)
                if min(math.dist(a, c), math.dist(b, c)) > tol:
                    raise CenterOnChordInterior("center on the boundary but a fold does not end there",
                                                witness={"chord": j, "center": list(c)})
            link, base, _, _ = _link_folding(last, c, tol)
            ref = _reference_face(last, c)
            fc = last.face_map(ref)(np.asarray(c))
            m1 = unfold_motion_1d(link, None, steps)
            for i, fr in zip(m1.params[1:], m1.frames[1:]):
                frames.append(_lift_link_frame(P, c, fc, base, fr, tol) if fr.folds
                              else FlatFold2D(P, (), (), _flat_placement(fc, c, base, fr)))
                params.append(("link", float(i)))
            events["linkThreshold"] = m1.params[-1]
        else:
            case = "b"
            if len(last.chords) > 1:
                raise CenterOnChordInterior("several folds through an interior center",
                                            witness={"chords": list(range(len(last.chords)))})
            roll = roll_fold_to_boundary(last, 0, steps)
            frames += roll.frames[1:]
            params += roll.params[1:]
            events.update(roll.events)
    motion = Motion2D(params, frames, events, case)
    if validate:
        for k, fr in enumerate(frames):
            v = validate_flatfold(fr, transversals_per_class, seed)
            if not v.ok:
                raise InvalidFrame(f"frame {k} invalid: {v.message}", witness=v.witness, frame=k)
    return motion


def _link_piece_map(c, fc, base, direction, img0, e0) -> Affine2:
    """Isometry taking c to fc and direction base + e0 + u to image angle img0 + direction * u."""
    if direction > 0:
        A = Affine2.rotation(img0 - e0 - base).A
    else:
        A = Affine2.rotation(img0 + e0 + base).A @ np.diag([1.0, -1.0])
    return Affine2.from_matrix(A, np.asarray(fc) - A @ np.asarray(c))


def _flat_placement(fc, c, base, fr: Folding1D) -> Affine2:
    return _link_piece_map(c, fc, base, fr.start_direction, fr.start_image, 0.0)
