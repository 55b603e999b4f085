"""Independent reference implementations used only by the tests.

Nothing here imports the algorithms under test beyond plain data types.
"""

import itertools
import math
import random

import numpy as np
import shapely
from shapely.geometry import LineString, Polygon as SPolygon

SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]
L_POLY = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]
SPIRAL_POLY = [(0, 0), (5, 0), (5, 5), (1, 5), (1, 2), (2, 2), (2, 4), (4, 4), (4, 1), (0, 1)]


def pinwheel(m=4, rhi=1.0, rlo=0.5, hook=0.1):
    """Hooked star whose arms block every straight shrink but admit a spiral one."""
    pts = []
    for k in range(m):
        phi = 2 * math.pi * k / m
        pts.append((rlo * math.cos(phi - hook), rlo * math.sin(phi - hook)))
        phi2 = 2 * math.pi * (k + 1) / m
        pts.append((rhi * math.cos(phi2), rhi * math.sin(phi2)))
    return pts


def comb(teeth=6, depth=3.0, width=1.0):
    """Zigzag comb: long alternating spikes, far from spiral-shaped."""
    pts = [(0.0, 0.0)]
    for k in range(teeth):
        x = 2 * k * width
        pts += [(x + width, depth), (x + 2 * width, 0.0)]
    pts += [(2 * teeth * width, -1.0), (0.0, -1.0)]
    return pts


def random_radial_polygon(rng: random.Random, n=None, wobble=0.8):
    """Random simple polygon from sorted angles and random radii about the origin."""
    n = n or rng.randint(3, 12)
    while True:
        angles = sorted(rng.uniform(0, 2 * math.pi) for _ in range(n))
        gaps = np.diff(angles + [angles[0] + 2 * math.pi])
        if gaps.max() < math.pi - 0.05 and gaps.min() > 1e-3:
            break
    return [(r * math.cos(a), r * math.sin(a))
            for a, r in zip(angles, (rng.uniform(1 - wobble, 1) for _ in range(n)))]


def random_simple_polygon(rng: random.Random, n=None):
    """Random points untangled by 2-opt moves until the ring is simple."""
    n = n or rng.randint(4, 12)
    while True:
        pts = [(rng.random(), rng.random()) for _ in range(n)]
        for _ in range(2000):
            ring = LineString(pts + pts[:1])
            if ring.is_simple:
                break
            fixed = False
            for i in range(n):
                for j in range(i + 2, n):
                    if i == 0 and j == n - 1:
                        continue
                    a, b = LineString([pts[i], pts[i + 1]]), LineString([pts[j], pts[(j + 1) % n]])
                    if a.crosses(b):
                        pts[i + 1:j + 1] = pts[i + 1:j + 1][::-1]
                        fixed = True
                        break
                if fixed:
                    break
            if not fixed:
                break
        poly = SPolygon(pts)
        if poly.is_valid and poly.area > 0.02:
            return pts


def _cross(o, a, b):
    return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0])


def grid_visibility(vertices, N=200, window=None):
    """Boolean N x N grid of points that see every vertex.

    The grid spans the bounding box, or ``window = (lo, hi)`` if given. A grid
    point sees vertex v when it is strictly inside the polygon and the segment
    to v properly crosses no edge. Returns (mask, xs, ys).
    """
    V = np.asarray(vertices, dtype=float)
    lo, hi = (V.min(axis=0), V.max(axis=0)) if window is None else map(np.asarray, window)
    xs = np.linspace(lo[0], hi[0], N + 2)[1:-1]
    ys = np.linspace(lo[1], hi[1], N + 2)[1:-1]
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    G = np.stack([X.ravel(), Y.ravel()], axis=1)
    inside = shapely.contains_xy(SPolygon(vertices), G[:, 0], G[:, 1])
    ok = inside.copy()
    A = V
    B = np.roll(V, -1, axis=0)
    for v in V:
        g = G[ok]
        if len(g) == 0:
            break
        vv = np.broadcast_to(v, g.shape)
        # proper crossing between segment g-v and each edge a-b
        d1 = _cross(g[:, None], vv[:, None], A[None])
        d2 = _cross(g[:, None], vv[:, None], B[None])
        d3 = _cross(A[None], B[None], g[:, None])
        d4 = _cross(A[None], B[None], vv[:, None])
        crosses = ((d1 * d2) < 0) & ((d3 * d4) < 0)
        blocked = crosses.any(axis=1)
        idx = np.nonzero(ok)[0]
        ok[idx[blocked]] = False
    return ok.reshape(N, N), xs, ys


def halfplane_mask(hs, pts):
    """Pointwise conjunction of {c . n >= offset} (floats)."""
    pts = np.asarray(pts, dtype=float)
    ok = np.ones(len(pts), dtype=bool)
    for n, off in hs:
        ok &= pts @ np.asarray(n, dtype=float) >= float(off) - 1e-12
    return ok


def complex_spiral(center, theta, rate, t, z):
    """Spiral map through complex exponentials: c + exp(q t)(z - c), q = -rate e^{i theta}."""
    c = complex(*center)
    q = -rate * complex(math.cos(theta), math.sin(theta))
    w = c + np.exp(q * t) * (complex(*z) - c)
    return (w.real, w.imag)


# --------------------------------------------------------------------------
# 1D layered-drawing oracle


def epsilon_drawing(length, folds, start_image, start_direction, order, eps=1e-3):
    """Draw a 1D folding with a global layer order as a planar polyline.

    Piece q sits at height eps * rank(q); each fold becomes a bracket sticking
    out past the crease image, wider brackets for wider layer spans so nested
    creases nest. Free ends are pulled back slightly, so a layer that merely
    ends at a crease does not touch the bracket. The folding is valid iff the
    polyline is simple.
    """
    xs = [0.0, *folds, float(length)]
    imgs = [float(start_image)]
    for j in range(len(xs) - 1):
        d = start_direction * (-1) ** j
        imgs.append(imgs[-1] + d * (xs[j + 1] - xs[j]))
    # brackets must stay narrower than the smallest gap between distinct images
    u = np.unique(np.round(imgs, 9))
    if len(u) > 1:
        eps = min(eps, float(np.diff(u).min()) / (len(xs) + 2))
    rank = {p: r for r, p in enumerate(order)}
    h = [eps * rank[j] for j in range(len(xs) - 1)]
    pull = eps * 1e-3
    pts = []
    for j in range(len(xs) - 1):
        a, b = imgs[j], imgs[j + 1]
        d = 1 if b > a else -1
        if j == 0:
            pts.append((a + d * pull, h[j]))
        if j == len(xs) - 2:
            pts.append((b - d * pull, h[j]))
            break
        out = b + d * eps * 0.5 * (1 + abs(rank[j] - rank[j + 1]))
        pts += [(b, h[j]), (out, h[j]), (out, h[j + 1]), (b, h[j + 1])]
    return LineString(pts)


def epsilon_valid(length, folds, start_image, start_direction, order):
    if not folds:
        return True
    return epsilon_drawing(length, folds, start_image, start_direction, order).is_simple


def epsilon_valid_stacking(length, folds, start_image, start_direction, stacking):
    """Some global layer order agreeing with every cell's order draws simply.

    Per-cell orders leave layers that never share a cell unordered, so this
    tries every linear extension. Small inputs only.
    """
    n = len(folds) + 1
    below = set()
    for cell in stacking:
        for a in range(len(cell)):
            for b in range(a + 1, len(cell)):
                below.add((cell[a], cell[b]))
    for perm in itertools.permutations(range(n)):
        rank = {p: r for r, p in enumerate(perm)}
        if all(rank[a] < rank[b] for a, b in below):
            if epsilon_valid(length, folds, start_image, start_direction, list(perm)):
                return True
    return False


def kernel_nonempty_oracle(vertices, hint=None, N=200):
    """Grid visibility over the bbox; if that finds nothing and a hint box is
    given, one more grid over the hint. Any hit is a verified witness."""
    mask, _, _ = grid_visibility(vertices, N)
    if mask.any() or hint is None:
        return bool(mask.any())
    lo, hi = np.asarray(hint[0], float), np.asarray(hint[1], float)
    pad = np.maximum((hi - lo) * 0.05, 1e-12)
    mask, _, _ = grid_visibility(vertices, N, (lo - pad, hi + pad))
    return bool(mask.any())


def gauss_linking(A, B):
    """Linking number of closed polygons by summing exact solid angles per segment pair."""
    A, B = np.asarray(A, float), np.asarray(B, float)
    total = 0.0
    for p1, p2 in zip(A, np.roll(A, -1, axis=0)):
        for p3, p4 in zip(B, np.roll(B, -1, axis=0)):
            r13, r14, r23, r24 = p3 - p1, p4 - p1, p3 - p2, p4 - p2
            ns = [np.cross(r13, r14), np.cross(r14, r24), np.cross(r24, r23), np.cross(r23, r13)]
            if any(np.linalg.norm(n) < 1e-300 for n in ns):
                continue
            ns = [n / np.linalg.norm(n) for n in ns]
            om = sum(math.asin(max(-1.0, min(1.0, float(ns[k] @ ns[(k + 1) % 4])))) for k in range(4))
            total += om * np.sign(np.cross(p4 - p3, p2 - p1) @ r13)
    return total / (4 * math.pi)


def gauss_linking_quadrature(A, B, n=400):
    """Plain midpoint quadrature of the double integral, for checking signs."""
    def sample(V):
        V = np.asarray(V, float)
        W = np.roll(V, -1, axis=0)
        t = (np.arange(n) + 0.5) / n
        pts = (V[:, None, :] + t[None, :, None] * (W - V)[:, None, :]).reshape(-1, 3)
        d = np.repeat((W - V) / n, n, axis=0)
        return pts, d
    pa, da = sample(A)
    pb, db = sample(B)
    r = pa[:, None, :] - pb[None, :, :]
    num = (r * np.cross(da[:, None, :], db[None, :, :])).sum(-1)
    return float((num / np.linalg.norm(r, axis=-1) ** 3).sum() / (4 * math.pi))


def developed_length(E, p, q):
    """Length in space of the image of the material segment pq, summed face by face."""
    seg = LineString([p, q])
    total = 0.0
    for f, poly in enumerate(E.faces):
        piece = SPolygon(poly).intersection(seg)
        if piece.is_empty or piece.length == 0:
            continue
        parts = piece.geoms if hasattr(piece, "geoms") else [piece]
        for g in parts:
            if g.length == 0:
                continue
            a, b = np.asarray(g.coords)[[0, -1]]
            A, B = E.face_map(f).plane(np.array([a, b]))
            total += float(np.linalg.norm(B - A))
    return total
