"""Polygonal embeddings in space whose fold lines run boundary to boundary.

A face is placed by rotating its parent about their shared chord. The bend
is ``beta = pi - alpha`` where ``alpha`` is the fold angle (``pi`` is flat).
A positive bend swings the child toward the parent's normal side, so the
sign of a bend does not depend on which of the two faces is the parent.
"""

from __future__ import annotations

import functools
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import shapely
from scipy.spatial.transform import Rotation
from shapely.geometry import Point
from shapely.geometry import Polygon as SPolygon

from .errors import FlatAngle, InvalidFrame, NotBoundaryPoint
from .flatfold import (
    FoldChord,
    _chord_through,
    _frames_by_arclength,
    _refinement_points,
    _Shrinker,
    face_decomposition,
    locate_on_boundary,
    similarity_affine,
)
from .geom import EPS_GEO, Polygon, distance_point_segment, validate_polygon
from .spiral import SpiralParams

# --------------------------------------------------------------------------
# Rigid motions


@dataclass(frozen=True)
class Isometry3:
    """x -> R x + t with R a proper rotation."""

    R: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    t: tuple = (0.0, 0.0, 0.0)

    @classmethod
    def from_arrays(cls, R, t) -> "Isometry3":
        R = np.asarray(R, dtype=float)
        return cls(tuple(map(tuple, R.tolist())), tuple(float(v) for v in t))

    @classmethod
    def rotation_about(cls, point, axis, angle) -> "Isometry3":
        axis = np.asarray(axis, dtype=float)
        R = Rotation.from_rotvec(angle * axis / np.linalg.norm(axis)).as_matrix()
        p = np.asarray(point, dtype=float)
        return cls.from_arrays(R, p - R @ p)

    @property
    def matrix(self):
        return np.array(self.R)

    @property
    def vector(self):
        return np.array(self.t)

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        return X @ self.matrix.T + self.vector

    def plane(self, X):
        """Image of material points (x, y), i.e. of (x, y, 0)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X @ self.matrix[:, :2].T + self.vector

    def __matmul__(self, other: "Isometry3") -> "Isometry3":
        R = self.matrix
        return Isometry3.from_arrays(R @ other.matrix, R @ other.vector + self.vector)

    def inverse(self) -> "Isometry3":
        Rt = self.matrix.T
        return Isometry3.from_arrays(Rt, -Rt @ self.vector)

    def orthonormality_error(self) -> float:
        R = self.matrix
        return float(max(np.abs(R.T @ R - np.eye(3)).max(), abs(np.linalg.det(R) - 1)))

    def to_json(self):
        return {"rotation": [list(r) for r in self.R], "translation": list(self.t)}


IDENTITY3 = Isometry3()


# --------------------------------------------------------------------------
# Embeddings


def _check_angles(dihedrals):
    for j, a in enumerate(dihedrals):
        if not 0 < a < 2 * math.pi:
            raise ValueError(f"fold angle {a} of chord {j} outside (0, 2pi)")
        if abs(a - math.pi) <= 1e-12:
            raise FlatAngle(f"chord {j} has fold angle pi", witness={"chord": j})


@dataclass(frozen=True)
class Embed3D:
    domain: Polygon
    chords: tuple = ()
    dihedrals: tuple = ()
    placement: Isometry3 = IDENTITY3

    def __post_init__(self):
        object.__setattr__(self, "chords", tuple(self.chords))
        object.__setattr__(self, "dihedrals", tuple(float(a) for a in self.dihedrals))
        if len(self.dihedrals) != len(self.chords):
            raise ValueError(f"{len(self.chords)} chords but {len(self.dihedrals)} fold angles")
        _check_angles(self.dihedrals)

    @functools.cached_property
    def decomposition(self):
        return face_decomposition(self.domain, self.chords)

    @property
    def faces(self):
        return self.decomposition.faces

    def chord_points(self, j):
        return self.chords[j].points(self.domain)

    @functools.cached_property
    def tree_isometries(self):
        """Per face, the product of chord rotations from the root (placement excluded)."""
        dec = self.decomposition
        iso = [None] * len(dec.faces)
        iso[0] = IDENTITY3
        for f in dec.order[1:]:
            par, j = dec.parent[f]
            p, q = (np.array([*x, 0.0]) for x in self.chord_points(j))
            # direct the chord so the parent lies on its right
            side = dec.chord_faces[j].index(par)   # 0: parent left of a->b
            axis = (q - p) if side == 1 else (p - q)
            iso[f] = iso[par] @ Isometry3.rotation_about(p, axis, math.pi - self.dihedrals[j])
        return iso

    def face_map(self, f) -> Isometry3:
        return self.placement @ self.tree_isometries[f]

    def face_vertices3(self, f):
        return self.face_map(f).plane(np.asarray(self.faces[f]))

    def face_of(self, x) -> int:
        sf = self.decomposition.shapely_faces()
        return int(np.argmin([g.distance(Point(x)) for g in sf]))

    def map_points(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        sf = self.decomposition.shapely_faces()
        D = np.stack([shapely.distance(g, shapely.points(X)) for g in sf], axis=1)
        which = D.argmin(axis=1)
        out = np.empty((len(X), 3))
        for f in range(len(sf)):
            sel = which == f
            if sel.any():
                out[sel] = self.face_map(f).plane(X[sel])
        return out

    def to_json(self) -> dict:
        return {"format": 1, "domain": {"vertices": [list(v) for v in self.domain.vertices]},
                "chords": [c.to_json() for c in self.chords],
                "dihedrals": list(self.dihedrals), "placement": self.placement.to_json()}

    @classmethod
    def from_json(cls, d) -> "Embed3D":
        P = validate_polygon([tuple(v) for v in d["domain"]["vertices"]])
        pl = d.get("placement")
        placement = IDENTITY3 if pl is None else Isometry3.from_arrays(pl["rotation"], pl["translation"])
        return cls(P, tuple(FoldChord.from_json(c) for c in d.get("chords", [])),
                   tuple(d.get("dihedrals", [])), placement)


def build_embedding(domain: Polygon, chords, dihedrals):
    """Embedding with the root face in the z = 0 plane, plus its face isometries."""
    E = Embed3D(domain, tuple(chords), tuple(dihedrals))
    return E, [E.face_map(f) for f in range(len(E.faces))]


def frame_distance3(E: Embed3D, G: Embed3D) -> float:
    X = _refinement_points(E, G)
    return float(np.linalg.norm(E.map_points(X) - G.map_points(X), axis=1).max())


# --------------------------------------------------------------------------
# Self-intersection


def triangulate_face(vertices, subdivisions=0):
    """Constrained triangulation of a simple polygon, each triangle split 4-way per round."""
    tris = shapely.constrained_delaunay_triangles(SPolygon(vertices))
    out = [np.asarray(t.exterior.coords)[:3] for t in tris.geoms]
    for _ in range(subdivisions):
        nxt = []
        for a, b, c in out:
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            nxt += [np.array([a, ab, ca]), np.array([ab, b, bc]),
                    np.array([ca, bc, c]), np.array([ab, bc, ca])]
        out = nxt
    return out


def _plane_section(T, n, d, tol):
    """Points of triangle T on the plane n.x = d (None if strictly one side)."""
    s = T @ n - d
    if (s > tol).all() or (s < -tol).all():
        return None
    pts = [T[k] for k in range(3) if abs(s[k]) <= tol]
    for k in range(3):
        a, b = k, (k + 1) % 3
        if (s[a] > tol and s[b] < -tol) or (s[a] < -tol and s[b] > tol):
            pts.append(T[a] + (T[b] - T[a]) * (s[a] / (s[a] - s[b])))
    return pts


def tri_tri_intersection(T1, T2, tol=EPS_GEO):
    """Sample points of T1 ∩ T2 (endpoints of the common segment), or None.

    Coplanar pairs are intersected in their common plane.
    """
    n1 = np.cross(T1[1] - T1[0], T1[2] - T1[0])
    n2 = np.cross(T2[1] - T2[0], T2[2] - T2[0])
    n1 /= np.linalg.norm(n1)
    n2 /= np.linalg.norm(n2)
    d1, d2 = n1 @ T1[0], n2 @ T2[0]
    L = np.cross(n1, n2)
    if np.linalg.norm(L) < 1e-12:
        if abs(n1 @ T2[0] - d1) > tol:
            return None
        e1 = (T1[1] - T1[0]) / np.linalg.norm(T1[1] - T1[0])
        e2 = np.cross(n1, e1)
        P1 = SPolygon((T1 - T1[0]) @ np.stack([e1, e2], axis=1))
        P2 = SPolygon((T2 - T1[0]) @ np.stack([e1, e2], axis=1))
        if P1.distance(P2) > tol:
            return None
        inter = P1.buffer(tol).intersection(P2.buffer(tol))
        if inter.is_empty:
            return None
        xy = np.asarray(inter.envelope.exterior.coords if inter.area > 0 else inter.coords)
        return [T1[0] + x * e1 + y * e2 for x, y in xy]
    A = _plane_section(T1, n2, d2, tol)
    if not A:
        return None
    B = _plane_section(T2, n1, d1, tol)
    if not B:
        return None
    L /= np.linalg.norm(L)
    ta, tb = [p @ L for p in A], [p @ L for p in B]
    lo, hi = max(min(ta), min(tb)), min(max(ta), max(tb))
    if lo > hi + tol:
        return None
    base = A[int(np.argmin(ta))]
    base = base - (base @ L) * L
    return [base + lo * L, base + hi * L]


@dataclass
class IntersectionReport:
    ok: bool
    witness: Optional[dict] = None
    pairs_tested: int = 0

    def to_json(self):
        return {"format": 1, "selfIntersecting": not self.ok, "witness": self.witness,
                "pairsTested": self.pairs_tested}


def _shared_material(E: Embed3D, f, g, tol):
    sf = E.decomposition.shapely_faces()
    inter = sf[f].buffer(tol).intersection(sf[g].buffer(tol))
    if inter.is_empty:
        return None
    return inter


def _near_shared(E, f, shared, pts, tol):
    """True if every 3D point lies within tol of the image of the shared material set."""
    if shared is None:
        return False
    M = E.face_map(f)
    # the shared set is a thin sliver around a point or a segment: use its extreme points
    coords = np.asarray(shared.minimum_rotated_rectangle.exterior.coords) \
        if shared.geom_type != "Point" else np.asarray(shared.coords)
    c2 = np.asarray(shared.centroid.coords[0])
    far = coords[np.argmax(np.linalg.norm(coords - c2, axis=1))]
    if np.linalg.norm(far - c2) <= 10 * tol:
        anchors = [c2]
    else:
        u = (far - c2) / np.linalg.norm(far - c2)
        proj = (coords - c2) @ u
        anchors = [c2 + proj.min() * u, c2 + proj.max() * u]
    A = M.plane(np.asarray(anchors))
    for x in pts:
        if len(A) == 1:
            d = np.linalg.norm(x - A[0])
        else:
            seg = A[1] - A[0]
            t = np.clip((x - A[0]) @ seg / (seg @ seg), 0, 1)
            d = np.linalg.norm(x - (A[0] + t * seg))
        if d > 1e3 * tol:
            return False
    return True


def check_self_intersection(E: Embed3D, subdivisions: int = 0, tol: float = EPS_GEO) -> IntersectionReport:
    """Triangle-pair test between faces; contact on shared chords or shared
    corners of two faces is allowed, anything else is a self-intersection."""
    tris, owner = [], []
    for f, poly in enumerate(E.faces):
        M = E.face_map(f)
        for T in triangulate_face(poly, subdivisions):
            tris.append(M.plane(T))
            owner.append(f)
    if len(set(owner)) < 2:
        return IntersectionReport(True, None, 0)
    tris = np.asarray(tris)
    owner = np.asarray(owner)
    lo, hi = tris.min(axis=1) - tol, tris.max(axis=1) + tol
    overlap = ((lo[:, None, :] <= hi[None, :, :]) & (lo[None, :, :] <= hi[:, None, :])).all(axis=2)
    overlap &= owner[:, None] < owner[None, :]
    I, J = np.nonzero(overlap)
    shared = {}
    tested = 0
    for a, b in zip(I, J):
        f, g = int(owner[a]), int(owner[b])
        tested += 1
        pts = tri_tri_intersection(tris[a], tris[b], tol)
        if pts is None:
            continue
        if (f, g) not in shared:
            shared[(f, g)] = _shared_material(E, f, g, 1e-9 * max(1.0, E.domain.diameter))
        if _near_shared(E, f, shared[(f, g)], pts, tol):
            continue
        w = {"faces": [f, g], "point": [float(v) for v in np.mean(pts, axis=0)]}
        return IntersectionReport(False, w, tested)
    return IntersectionReport(True, None, tested)


# --------------------------------------------------------------------------
# Vertex links


@dataclass
class VertexLink:
    arc_lengths: list
    fold_angles: list
    point: tuple = (0.0, 0.0)
    chain: list = field(default_factory=list)   # unit vectors at the chain vertices

    def to_json(self):
        return {"format": 1, "point": list(self.point), "arcLengths": list(self.arc_lengths),
                "foldAngles": list(self.fold_angles),
                "chain": [list(map(float, v)) for v in self.chain]}


def vertex_link(E: Embed3D, p, tol: Optional[float] = None) -> VertexLink:
    """Face angles and fold angles around boundary point p, plus the spherical chain."""
    P = E.domain
    tol = tol or 1e-9 * max(1.0, P.diameter)
    if min(distance_point_segment(p, a, b) for a, b in P.edges()) > tol:
        raise NotBoundaryPoint(f"{tuple(p)} is not on the boundary", witness={"point": list(p)})
    e, t = locate_on_boundary(P, p)
    n = P.n
    if t == 0.0:
        prev, nxt = P.vertices[(e - 1) % n], P.vertices[(e + 1) % n]
    else:
        prev, nxt = P.edge(e)
    base = math.atan2(nxt[1] - p[1], nxt[0] - p[0])
    total = (math.atan2(prev[1] - p[1], prev[0] - p[0]) - base) % (2 * math.pi)
    at_p = []
    for j in range(len(E.chords)):
        a, b = E.chord_points(j)
        if min(math.dist(a, p), math.dist(b, p)) <= tol:
            other = b if math.dist(a, p) <= tol else a
            ang = (math.atan2(other[1] - p[1], other[0] - p[0]) - base) % (2 * math.pi)
            at_p.append((ang, j))
    at_p.sort()
    cuts = [0.0] + [a for a, _ in at_p] + [total]
    arcs = [b - a for a, b in zip(cuts, cuts[1:])]
    chain = []
    r = 1e-3 * min(1.0, min(g.length for g in E.decomposition.shapely_faces()))
    for k in range(len(arcs)):
        mid = base + 0.5 * (cuts[k] + cuts[k + 1])
        f = E.face_of((p[0] + r * math.cos(mid), p[1] + r * math.sin(mid)))
        R = E.face_map(f).matrix
        if k == 0:
            chain.append(R @ np.array([math.cos(base), math.sin(base), 0.0]))
        ang = base + cuts[k + 1]
        chain.append(R @ np.array([math.cos(ang), math.sin(ang), 0.0]))
    return VertexLink(arcs, [E.dihedrals[j] for _, j in at_p], tuple(map(float, p)), chain)


def spherical_chain_points(link: VertexLink, samples: int = 64):
    """Dense points along the great-circle arcs of the chain."""
    pts = []
    for a, b, length in zip(link.chain, link.chain[1:], link.arc_lengths):
        # great circle from a to b of the given length (may exceed pi for reflex sectors)
        perp = b - a * (a @ b)
        if np.linalg.norm(perp) < 1e-12:
            raise ValueError("degenerate arc")
        perp /= np.linalg.norm(perp)
        if abs(length - math.pi) < 1e-12 or length > math.pi:
            perp = -perp
        for s in np.linspace(0, length, samples, endpoint=False):
            pts.append(math.cos(s) * a + math.sin(s) * perp)
    pts.append(link.chain[-1])
    return np.asarray(pts)


def link_is_simple(link: VertexLink, samples: int = 64, tol: float = 1e-9) -> bool:
    if len(link.chain) < 3:
        return True
    X = spherical_chain_points(link, samples)
    n = len(X)
    for k in range(n - 1):
        a, b = X[k], X[k + 1]
        for m in range(k + 2, n - 1):
            if _segment_distance(a, b, X[m], X[m + 1]) <= tol:
                return False
    return True


def _segment_distance(p1, q1, p2, q2) -> float:
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    c, b = d1 @ r, d1 @ d2
    den = a * e - b * b
    s = np.clip((b * f - c * e) / den, 0, 1) if den > 1e-18 else 0.0
    t = (b * s + f) / e
    if t < 0:
        t, s = 0.0, np.clip(-c / a, 0, 1)
    elif t > 1:
        t, s = 1.0, np.clip((b - c) / a, 0, 1)
    return float(np.linalg.norm(p1 + s * d1 - (p2 + t * d2)))


# --------------------------------------------------------------------------
# Motions


@dataclass
class Motion3D:
    params: list
    frames: list
    status: str = "flat"
    case: str = "a"
    link: Optional[VertexLink] = None
    diagnostics: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    events: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"format": 1, "status": self.status, "case": self.case,
                "link": self.link.to_json() if self.link else None,
                "diagnostics": self.diagnostics,
                "events": {str(k): v for k, v in self.events.items()},
                "frames": [dict(fr.to_json(), stage=s, param=float(v))
                           for (s, v), fr in zip(self.params, self.frames)]}


class _EmbedShrinker(_Shrinker):
    def __init__(self, E: Embed3D, sp: SpiralParams):
        super().__init__(E, sp)
        M = E.face_map(self.ref)
        self.fp = M.plane(np.asarray([self.c]))[0]
        self.normal = M.matrix[:, 2]

    def frame(self, i) -> Embed3D:
        if i == 1:
            return self.E
        E = self.E
        s, chords, src, origin = self.preimage(i)
        # s_i = i * rotation by s.angle, plus a translation
        S = similarity_affine(s)
        Rz = Rotation.from_rotvec([0, 0, s.angle]).as_matrix()
        Q = Rotation.from_rotvec(self.rotation_angle(i) * self.normal).as_matrix()
        Mo = E.face_map(origin[0])
        R = Q @ Mo.matrix @ Rz
        ts = np.array([S.tx, S.ty, 0.0])
        t = self.fp + (Q @ (Mo.matrix @ ts + Mo.vector - self.fp)) / i
        # re-orthonormalize the rotation against rounding
        U, _, Vt = np.linalg.svd(R)
        placement = Isometry3.from_arrays(U @ Vt, t)
        return Embed3D(E.domain, chords, tuple(E.dihedrals[j] for j in src), placement)

    @property
    def E(self):
        return self.F


def unfold_motion_embed(E: Embed3D, sp: SpiralParams, steps: int = 64, subdivisions: int = 0,
                        check: bool = True) -> Motion3D:
    """Shrink-conjugated motion until only folds through the center remain;
    then open a single remaining fold, or stop at a boundary vertex with its link."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    P = E.domain
    c = tuple(map(float, sp.center))
    tol = 1e-9 * max(1.0, P.diameter)
    sh = _EmbedShrinker(E, sp)
    through = _chord_through(E, c, tol)
    vanishing = [j for j in range(len(E.chords)) if j not in through]
    thresholds = {j: sh.threshold(j) for j in vanishing}
    events = {f"chord{j}": thresholds[j][1] for j in vanishing}
    params, frames = [("shrink", 1.0)], [E]
    if vanishing:
        i_end = min(lo for lo, _ in thresholds.values())
        ps, frames = _frames_by_arclength(sh.frame, i_end, 1.0, steps, distance=frame_distance3)
        params = [("shrink", float(i)) for i in ps]
    last = frames[-1]
    motion = Motion3D(params, frames, events=events)
    if len(last.chords) == 1:
        motion.case = "b"
        a0 = last.dihedrals[0]
        for k in range(1, steps):
            u = k / (steps - 1)
            if k == steps - 1:
                fr = Embed3D(P, (), (), last.placement)
            else:
                fr = Embed3D(P, last.chords, (a0 + (math.pi - a0) * u,), last.placement)
            frames.append(fr)
            params.append(("open", u))
    elif len(last.chords) > 1:
        motion.case = "c"
        motion.status = "NeedsSphericalCarpenter"
        motion.link = vertex_link(last, c)
        if sp.theta != 0:
            motion.diagnostics.append(
                f"center on several folds with theta={sp.theta:.6g}; only linear shrinking is expected here")
    if check:
        for k, fr in enumerate(frames):
            rep = check_self_intersection(fr, subdivisions)
            motion.checks.append(rep.ok)
            if not rep.ok and motion.case in ("a", "b"):
                raise InvalidFrame(f"frame {k} self-intersects", witness=rep.witness, frame=k)
    return motion


# --------------------------------------------------------------------------
# Export


def triangle_mesh(E: Embed3D, subdivisions: int = 0, weld: float = 1e-9):
    """Welded vertex array and triangle index list of an embedding."""
    verts, index, tris = [], {}, []
    for f, poly in enumerate(E.faces):
        M = E.face_map(f)
        for T in triangulate_face(poly, subdivisions):
            ids = []
            for x in M.plane(T):
                key = tuple(np.round(x / weld).astype(np.int64))
                if key not in index:
                    index[key] = len(verts)
                    verts.append(x)
                ids.append(index[key])
            tris.append(ids)
    return np.asarray(verts), tris


def write_obj(path, verts, tris, lines=()):
    with open(path, "w") as fh:
        for x in verts:
            fh.write(f"v {x[0]:.17g} {x[1]:.17g} {x[2]:.17g}\n")
        for t in tris:
            fh.write("f " + " ".join(str(k + 1) for k in t) + "\n")
        for ln in lines:
            fh.write("l " + " ".join(str(k + 1) for k in ln) + "\n")


def export_motion_obj(motion: Motion3D, out_dir, subdivisions: int = 0) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for k, ((stage, val), fr) in enumerate(zip(motion.params, motion.frames)):
        name = f"frame_{k:04d}.obj"
        verts, tris = triangle_mesh(fr, subdivisions)
        write_obj(os.path.join(out_dir, name), verts, tris)
        entry = {"file": name, "stage": stage, "param": float(val), "chords": len(fr.chords)}
        if motion.checks:
            entry["selfIntersectionFree"] = bool(motion.checks[k])
        entries.append(entry)
    manifest = {"format": 1, "status": motion.status, "case": motion.case,
                "diagnostics": motion.diagnostics,
                "link": motion.link.to_json() if motion.link else None, "frames": entries}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest
