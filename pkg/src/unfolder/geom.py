"""Planar primitives: exact predicates, polygons, half-planes, convex regions.

Predicates are decided exactly. Floats are converted to ``Fraction`` (which is
lossless) whenever the fast floating-point filter cannot certify a sign.
Derived coordinates are reported as floats.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import Degenerate, NotSimple

EPS_GEO = 1e-9

Point2 = tuple  # (x, y)


class Orientation(enum.IntEnum):
    CW = -1
    COLLINEAR = 0
    CCW = 1


class Location(enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


# Shewchuk's ccwerrboundA for the naive 2x2 determinant.
_ORIENT_ERRBOUND = (3.0 + 16.0 * 2.0**-53) * 2.0**-53


def _sign(v) -> int:
    return int(v > 0) - int(v < 0)


def orient_sign(p, q, r) -> int:
    """Exact sign of twice the signed area of triangle pqr."""
    coords = (p[0], p[1], q[0], q[1], r[0], r[1])
    if all(isinstance(c, (float, int)) for c in coords):
        detleft = (p[0] - r[0]) * (q[1] - r[1])
        detright = (p[1] - r[1]) * (q[0] - r[0])
        det = detleft - detright
        bound = _ORIENT_ERRBOUND * (abs(detleft) + abs(detright))
        if det > bound or -det > bound:
            return _sign(det)
        if not (math.isfinite(detleft) and math.isfinite(detright)):
            raise ValueError("non-finite coordinates")
    fp = [Fraction(c) for c in coords]
    det = (fp[0] - fp[4]) * (fp[3] - fp[5]) - (fp[1] - fp[5]) * (fp[2] - fp[4])
    return _sign(det)


def orientation(p, q, r) -> Orientation:
    return Orientation(orient_sign(p, q, r))


def _on_segment(a, b, p) -> bool:
    """p collinear with ab is assumed; closed bounding-box test."""
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def point_on_segment(a, b, p) -> bool:
    return orient_sign(a, b, p) == 0 and _on_segment(a, b, p)


def segments_intersect(a, b, c, d) -> bool:
    """Closed segments ab and cd share at least one point."""
    o1 = orient_sign(a, b, c)
    o2 = orient_sign(a, b, d)
    o3 = orient_sign(c, d, a)
    o4 = orient_sign(c, d, b)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    if o1 == 0 and _on_segment(a, b, c):
        return True
    if o2 == 0 and _on_segment(a, b, d):
        return True
    if o3 == 0 and _on_segment(c, d, a):
        return True
    if o4 == 0 and _on_segment(c, d, b):
        return True
    return False


def segments_cross_properly(a, b, c, d) -> bool:
    """Open segments cross at a single interior point of both."""
    o1 = orient_sign(a, b, c)
    o2 = orient_sign(a, b, d)
    o3 = orient_sign(c, d, a)
    o4 = orient_sign(c, d, b)
    return o1 * o2 < 0 and o3 * o4 < 0


# --------------------------------------------------------------------------
# Polygons


@dataclass(frozen=True)
class Polygon:
    """Simple polygon, counterclockwise, no repeated or collinear vertices.

    Construct through :func:`validate_polygon` unless the invariants are
    already known to hold.
    """

    vertices: tuple

    def __len__(self):
        return len(self.vertices)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edges(self):
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def edge(self, i):
        v = self.vertices
        return v[i % len(v)], v[(i + 1) % len(v)]

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    @property
    def diameter(self) -> float:
        pts = np.asarray(self.vertices, dtype=float)
        d = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    def bbox(self):
        pts = np.asarray(self.vertices, dtype=float)
        return pts.min(0), pts.max(0)

    def to_json(self) -> dict:
        return {"format": 1, "vertices": [[float(x), float(y)] for x, y in self.vertices]}


def polygon_area(vertices) -> float:
    s = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _exact_area_sign(vertices) -> int:
    s = Fraction(0)
    n = len(vertices)
    for i in range(n):
        x0, y0 = (Fraction(c) for c in vertices[i])
        x1, y1 = (Fraction(c) for c in vertices[(i + 1) % n])
        s += x0 * y1 - x1 * y0
    return _sign(s)


def _normalize_ring(pts):
    pts = [p for i, p in enumerate(pts) if p != pts[i - 1]] if len(pts) > 1 else list(pts)
    changed = True
    while changed and len(pts) >= 3:
        changed = False
        for i in range(len(pts)):
            if orient_sign(pts[i - 1], pts[i], pts[(i + 1) % len(pts)]) == 0:
                del pts[i]
                changed = True
                break
    return pts


def validate_polygon(vertices) -> Polygon:
    """Normalize a vertex list into a :class:`Polygon`.

    Repeated and collinear vertices are merged, clockwise input is reversed.
    Raises :class:`Degenerate` for zero area and :class:`NotSimple` (witness:
    the offending pair of edge indices) for self-intersection.
    """
    pts = [(float(x), float(y)) for x, y in vertices]
    if len(pts) < 3:
        raise Degenerate("polygon needs at least 3 vertices")
    for p in pts:
        if not (math.isfinite(p[0]) and math.isfinite(p[1])):
            raise ValueError("non-finite vertex")
    pts = _normalize_ring(pts)
    if len(pts) < 3:
        raise Degenerate("polygon has zero area")
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            c, d = pts[j], pts[(j + 1) % n]
            if segments_intersect(a, b, c, d):
                raise NotSimple(f"edges {i} and {j} intersect", witness=(i, j))
    # Adjacent edges can still fold back onto each other only through a
    # collinear spike, which normalization removed.
    sgn = _exact_area_sign(pts)
    if sgn == 0:
        raise Degenerate("polygon has zero area")
    if sgn < 0:
        pts.reverse()
    return Polygon(tuple(pts))


def point_in_polygon(P: Polygon, x) -> Location:
    """Exact winding-number classification."""
    wn = 0
    px, py = x
    for a, b in P.edges():
        o = orient_sign(a, b, x)
        if o == 0 and _on_segment(a, b, x):
            return Location.BOUNDARY
        if a[1] <= py:
            if b[1] > py and o > 0:
                wn += 1
        elif b[1] <= py and o < 0:
            wn -= 1
    return Location.INSIDE if wn != 0 else Location.OUTSIDE


def distance_point_segment(p, a, b) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    L2 = dx * dx + dy * dy
    t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / L2))
    return math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy)


def distance_to_boundary(P: Polygon, x) -> float:
    return min(distance_point_segment(x, a, b) for a, b in P.edges())


def signed_distance_outside(P: Polygon, x) -> float:
    """Distance to P when x lies outside, otherwise 0."""
    if point_in_polygon(P, x) is Location.OUTSIDE:
        return distance_to_boundary(P, x)
    return 0.0


def _segment_pieces_inside(A: Polygon, a, b) -> bool:
    """Every point of segment ab lies in closed A, assuming no proper crossings."""
    ax, ay, bx, by = (Fraction(c) for c in (a[0], a[1], b[0], b[1]))
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    ts = {Fraction(0), Fraction(1)}
    if L2 > 0:
        for v in A.vertices:
            if point_on_segment(a, b, v):
                ts.add(((Fraction(v[0]) - ax) * dx + (Fraction(v[1]) - ay) * dy) / L2)
    ts = sorted(ts)
    for t0, t1 in zip(ts, ts[1:]):
        tm = (t0 + t1) / 2
        if point_in_polygon(A, (ax + tm * dx, ay + tm * dy)) is Location.OUTSIDE:
            return False
    return True


def polygon_contains_polygon(A: Polygon, B) -> bool:
    """True iff every point of polygon B lies in closed polygon A.

    ``B`` may be a Polygon or a raw vertex sequence (e.g. a transformed copy
    whose float coordinates are not re-validated).
    """
    bv = B.vertices if isinstance(B, Polygon) else tuple(map(tuple, B))
    for v in bv:
        if point_in_polygon(A, v) is Location.OUTSIDE:
            return False
    nb = len(bv)
    bedges = [(bv[i], bv[(i + 1) % nb]) for i in range(nb)]
    for a, b in bedges:
        for c, d in A.edges():
            if segments_cross_properly(a, b, c, d):
                return False
    for a, b in bedges:
        if not _segment_pieces_inside(A, a, b):
            return False
    Bp = B if isinstance(B, Polygon) else Polygon(bv)
    for v in A.vertices:
        if point_in_polygon(Bp, v) is Location.INSIDE:
            return False
    return True


# --------------------------------------------------------------------------
# Half-planes and convex regions


@dataclass(frozen=True)
class HalfPlane:
    """The set ``{c : c . normal >= offset}``.

    Coordinates may be floats or Fractions; Fractions are kept exactly.
    """

    normal: tuple
    offset: object

    def __post_init__(self):
        if self.normal[0] == 0 and self.normal[1] == 0:
            raise ValueError("half-plane normal must be nonzero")

    def slack(self, c) -> float:
        """Signed distance of c inside the boundary line (unit-normal slack)."""
        nx, ny = float(self.normal[0]), float(self.normal[1])
        nn = math.hypot(nx, ny)
        return (c[0] * nx + c[1] * ny - float(self.offset)) / nn

    def contains(self, c) -> bool:
        nx, ny = (Fraction(v) for v in self.normal)
        return Fraction(c[0]) * nx + Fraction(c[1]) * ny >= Fraction(self.offset)

    def to_json(self):
        return {"normal": [float(self.normal[0]), float(self.normal[1])],
                "offset": float(self.offset)}


class RegionStatus(enum.Enum):
    EMPTY = "empty"
    BOUNDED = "bounded"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class ConvexRegion:
    """Intersection of closed half-planes.

    ``exact_vertices`` lists the finite corners counterclockwise as Fractions.
    Unbounded regions additionally carry ``rays`` ``(origin, direction)`` and
    ``lines`` ``(point, direction)`` for boundary pieces reaching infinity.
    Degenerate (segment or point) regions are nonempty with zero area.
    """

    status: RegionStatus
    exact_vertices: tuple = ()
    rays: tuple = ()
    lines: tuple = ()
    _clip: tuple = field(default=(), repr=False, compare=False)

    @property
    def vertices(self):
        return [(float(x), float(y)) for x, y in self.exact_vertices]

    @property
    def is_empty(self) -> bool:
        return self.status is RegionStatus.EMPTY

    def normalized(self):
        """Exact vertex list with duplicates and collinear points removed,
        rotated to start at the lexicographically smallest vertex."""
        pts = list(self.exact_vertices)
        pts = [p for i, p in enumerate(pts) if p != pts[i - 1]] if len(pts) > 1 else pts
        if len(pts) >= 3:
            pts = _normalize_ring(pts)
        if not pts:
            return ()
        k = min(range(len(pts)), key=lambda i: pts[i])
        return tuple(pts[k:] + pts[:k])

    def contains(self, c) -> bool:
        """Exact membership test against the clipped boundary polygon."""
        if self.status is RegionStatus.EMPTY:
            return False
        poly = self._clip
        q = (Fraction(c[0]), Fraction(c[1]))
        if len(poly) == 1:
            return poly[0] == q
        if len(poly) == 2 or all(orient_sign(poly[0], poly[1], p) == 0 for p in poly[2:]):
            lo, hi = min(poly), max(poly)
            return orient_sign(lo, hi, q) == 0 and _on_segment(lo, hi, q)
        n = len(poly)
        for i in range(n):
            if orient_sign(poly[i], poly[(i + 1) % n], q) < 0:
                return False
        return True

    @property
    def area(self) -> float:
        if len(self.exact_vertices) < 3:
            return 0.0
        return polygon_area(self.vertices)

    def centroid(self):
        v = np.asarray(self.vertices, dtype=float)
        return tuple(v.mean(0)) if len(v) else None

    def to_json(self) -> dict:
        return {
            "format": 1,
            "status": self.status.value,
            "vertices": [[float(x), float(y)] for x, y in self.exact_vertices],
            "rays": [{"origin": [float(o[0]), float(o[1])], "direction": [float(d[0]), float(d[1])]}
                     for o, d in self.rays],
            "lines": [{"point": [float(o[0]), float(o[1])], "direction": [float(d[0]), float(d[1])]}
                      for o, d in self.lines],
        }


def _line_value(line, p):
    (nx, ny), off = line
    return nx * p[0] + ny * p[1] - off


def _intersect_lines(l1, l2):
    (a1, b1), c1 = l1
    (a2, b2), c2 = l2
    det = a1 * b2 - a2 * b1
    return ((c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det)


def _clip(poly, line, lid):
    """Sutherland-Hodgman step on an edge-labelled convex ring.

    ``poly`` is a list of ``(vertex, label)`` where label names the line
    carrying the edge from this vertex to the next.
    """
    n = len(poly)
    if n == 0:
        return []
    vals = [_line_value(line, v) for v, _ in poly]
    if all(s >= 0 for s in vals):
        return poly
    if all(s < 0 for s in vals):
        return []
    out = []
    for i in range(n):
        v, e = poly[i]
        w, _ = poly[(i + 1) % n]
        sv, sw = vals[i], vals[(i + 1) % n]
        if sv >= 0:
            out.append((v, e))
            if sw < 0:
                x = v if sv == 0 else _intersect_lines(line, e[1])
                if out[-1][0] == x:
                    out[-1] = (x, (lid, line))
                else:
                    out.append((x, (lid, line)))
        elif sw > 0:
            out.append((_intersect_lines(line, e[1]), e))
    cleaned = []
    for v, e in out:
        if cleaned and cleaned[-1][0] == v:
            cleaned[-1] = (v, e)
        else:
            cleaned.append((v, e))
    while len(cleaned) > 1 and cleaned[0][0] == cleaned[-1][0]:
        cleaned.pop()
    return cleaned


def _exact_line(h: HalfPlane):
    return ((Fraction(h.normal[0]), Fraction(h.normal[1])), Fraction(h.offset))


def intersect_halfplanes(hs: Sequence[HalfPlane]) -> ConvexRegion:
    """Exact intersection by incremental convex clipping, O(n^2).

    Clipping starts from a power-of-two box far outside every constraint
    line's closest point to the origin; box edges surviving the clip mark the
    region unbounded.
    """
    lines = [_exact_line(h) for h in hs]
    scale = Fraction(1)
    for (nx, ny), off in lines:
        scale = max(scale, abs(off) / max(abs(nx), abs(ny)))
    for i, ((nx, ny), off) in enumerate(lines):
        for (mx, my), off2 in lines[i + 1:]:
            det = nx * my - mx * ny
            if det != 0:
                x, y = _intersect_lines(((nx, ny), off), ((mx, my), off2))
                scale = max(scale, abs(x), abs(y))
    M = Fraction(2) ** (int(math.log2(float(scale))) + 12)
    box = [((Fraction(1), Fraction(0)), -M), ((Fraction(0), Fraction(1)), -M),
           ((Fraction(-1), Fraction(0)), -M), ((Fraction(0), Fraction(-1)), -M)]
    corners = [(-M, -M), (M, -M), (M, M), (-M, M)]
    # edge from corner k lies on: bottom (y>=-M), right (x<=M), top, left
    poly = [(corners[0], (-2, box[1])), (corners[1], (-3, box[2])),
            (corners[2], (-4, box[3])), (corners[3], (-1, box[0]))]
    for lid, line in enumerate(lines):
        poly = _clip(poly, line, lid)
        if not poly:
            return ConvexRegion(RegionStatus.EMPTY)
    verts = [v for v, _ in poly]
    lbls = [e for _, e in poly]
    clip = tuple(verts)
    n = len(poly)
    on_box = [abs(v[0]) == M or abs(v[1]) == M for v in verts]
    if not any(on_box):
        return ConvexRegion(RegionStatus.BOUNDED, tuple(verts), _clip=clip)
    finite = tuple(v for v, b in zip(verts, on_box) if not b)
    rays, lns = [], []
    for i in range(n):
        lid, line = lbls[i]
        if lid < 0:
            continue
        a, b = verts[i], verts[(i + 1) % n]
        if a == b:
            continue
        d = (b[0] - a[0], b[1] - a[1])
        if on_box[i] and on_box[(i + 1) % n]:
            (nx, ny), off = line
            mid = ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)
            t = (off - (nx * mid[0] + ny * mid[1])) / (nx * nx + ny * ny)
            p = (mid[0] + t * nx, mid[1] + t * ny)
            if not any(p == q for q, _ in lns):
                lns.append((p, d))
        elif on_box[i]:
            rays.append((b, (-d[0], -d[1])))
        elif on_box[(i + 1) % n]:
            rays.append((a, d))
    return ConvexRegion(RegionStatus.UNBOUNDED, finite, tuple(rays), tuple(lns), _clip=clip)


def max_margin(hs: Sequence[HalfPlane]):
    """Chebyshev-style LP: maximize t with unit-normal slack >= t everywhere.

    Returns ``(point, t)``. ``t`` is negative when the intersection is empty
    and ``math.inf`` when arbitrarily large discs fit.
    """
    if not hs:
        return (0.0, 0.0), math.inf
    N = np.array([[float(h.normal[0]), float(h.normal[1])] for h in hs])
    off = np.array([float(h.offset) for h in hs])
    nn = np.hypot(N[:, 0], N[:, 1])
    U = N / nn[:, None]
    b = off / nn
    A_ub = np.hstack([-U, np.ones((len(hs), 1))])
    res = linprog([0.0, 0.0, -1.0], A_ub=A_ub, b_ub=-b,
                  bounds=[(None, None)] * 3, method="highs")
    if res.status == 3:
        res = linprog([0.0, 0.0, -1.0], A_ub=A_ub, b_ub=-b,
                      bounds=[(None, None), (None, None), (None, 1.0)], method="highs")
        return (float(res.x[0]), float(res.x[1])), math.inf
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return (float(res.x[0]), float(res.x[1])), float(res.x[2])


def feasible_point(hs: Sequence[HalfPlane], tol: float = EPS_GEO) -> Optional[tuple]:
    """Point of maximum minimum slack, or None if the intersection is empty.

    Returns ``((x, y), margin)`` with ``margin >= 0``; margins within ``tol``
    below zero count as the degenerate (zero-width) case.
    """
    p, t = max_margin(hs)
    scale = 1.0 + max((abs(float(h.offset)) / math.hypot(float(h.normal[0]), float(h.normal[1]))
                       for h in hs), default=0.0)
    if t < -tol * scale:
        return None
    return p, max(t, 0.0)


def edge_halfplanes(P: Polygon):
    """Inward half-plane of each edge, built from exact coordinate differences."""
    hs = []
    for a, b in P.edges():
        ax, ay, bx, by = (Fraction(c) for c in (a[0], a[1], b[0], b[1]))
        n = (-(by - ay), bx - ax)
        hs.append(HalfPlane(n, n[0] * ax + n[1] * ay))
    return hs


def scale_polygon(P: Polygon, factor: float, center) -> list:
    if factor == 1:
        return list(P.vertices)
    cx, cy = center
    return [(cx + factor * (x - cx), cy + factor * (y - cy)) for x, y in P.vertices]
