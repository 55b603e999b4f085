"""Flat foldings of a segment and their unfolding by conjugated scaling.

A folding of ``[0, L]`` is fixed by its fold points, the image of 0 and the
initial direction; pieces are the maximal fold-free material intervals,
indexed in material order. Layer order is stored per image cell (maximal open
interval between images of folds and ends), bottom to top.

The layer checks in :func:`check_layers` work on bare image intervals and
creases, so the 2D validator reuses them for transversal restrictions.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    AtFoldPoint,
    BasePointOnFold,
    CreasePenetration,
    FoldingError,
    InconsistentStacking,
    NonNested,
)


def merge_values(values, tol):
    """Sorted values with clusters closer than tol collapsed to their first."""
    out = []
    for v in sorted(values):
        if not out or v - out[-1] > tol:
            out.append(v)
    return out


@dataclass
class Validity:
    ok: bool
    code: str = "ok"
    message: str = ""
    witness: object = None

    def to_json(self):
        return {"format": 1, "valid": self.ok, "code": self.code,
                "message": self.message, "witness": _jsonable(self.witness)}


def _jsonable(w):
    if isinstance(w, (list, tuple)):
        return [_jsonable(x) for x in w]
    if isinstance(w, dict):
        return {str(k): _jsonable(v) for k, v in w.items()}
    if isinstance(w, (np.integer,)):
        return int(w)
    if isinstance(w, (np.floating,)):
        return float(w)
    return w


def layer_cells(intervals, tol):
    """Cells of the image subdivision and the pieces covering each."""
    cuts = merge_values([v for iv in intervals for v in iv], tol)
    cells = []
    for u0, u1 in zip(cuts, cuts[1:]):
        cover = [j for j, (lo, hi) in enumerate(intervals) if lo <= u0 + tol and hi >= u1 - tol]
        cells.append((u0, u1, cover))
    return cells


def check_layers(intervals, creases, orders, tol, cells=None):
    """Raise on the first violation of local layer consistency.

    ``intervals``: image interval ``(lo, hi)`` per piece.
    ``creases``: ``(a, b, y, side, label)``; pieces a and b meet at image y
    and both lie on ``side`` of it (-1 left, +1 right).
    ``orders``: per cell, bottom-to-top list of piece indices.

    A piece strictly between the two layers of a crease may end at the crease
    point (tucked) but not continue past it.
    """
    if cells is None:
        cells = layer_cells(intervals, tol)
    if len(orders) != len(cells):
        raise InconsistentStacking(
            f"{len(orders)} stacking lists for {len(cells)} cells", witness={"cells": len(cells)})
    ranks = []
    for k, ((u0, u1, cover), order) in enumerate(zip(cells, orders)):
        if sorted(order) != sorted(cover) or len(set(order)) != len(order):
            raise InconsistentStacking(
                f"cell {k} ({u0:g}, {u1:g}) lists {list(order)}, covering pieces are {cover}",
                witness={"cell": k})
        ranks.append({p: r for r, p in enumerate(order)})
    for k in range(len(cells) - 1):
        if abs(cells[k][1] - cells[k + 1][0]) > tol:
            continue
        shared = [p for p in orders[k] if p in ranks[k + 1]]
        again = sorted(shared, key=lambda p: ranks[k + 1][p])
        if shared != again:
            raise InconsistentStacking(
                f"cells {k} and {k + 1} order shared pieces differently", witness={"cells": [k, k + 1]})

    def cell_beside(y, side):
        for k, (u0, u1, _) in enumerate(cells):
            if side < 0 and abs(u1 - y) <= tol:
                return k
            if side > 0 and abs(u0 - y) <= tol:
                return k
        return None

    spans = {}
    for a, b, y, side, label in creases:
        k = cell_beside(y, side)
        if k is None:
            continue
        ra, rb = ranks[k].get(a), ranks[k].get(b)
        if ra is None or rb is None:
            continue
        lo_r, hi_r = min(ra, rb), max(ra, rb)
        for q in orders[k][lo_r + 1:hi_r]:
            qlo, qhi = intervals[q]
            past = qhi > y + tol if side < 0 else qlo < y - tol
            if past:
                raise CreasePenetration(
                    f"piece {q} passes through the crease {label} at {y:g}",
                    witness={"fold": label, "piece": q, "image": y, "cell": k})
        spans.setdefault((k, side), []).append((lo_r, hi_r, label))
    for (k, side), group in spans.items():
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a0, a1, la = group[i]
                b0, b1, lb = group[j]
                if a0 < b0 < a1 < b1 or b0 < a0 < b1 < a1:
                    raise NonNested(
                        f"creases {la} and {lb} interleave in cell {k}",
                        witness={"folds": [la, lb], "cell": k})


@dataclass(frozen=True)
class Folding1D:
    length: float
    folds: tuple = ()
    start_image: float = 0.0
    start_direction: int = 1
    stacking: tuple = ((0,),)

    @property
    def tol(self) -> float:
        return 1e-9 * max(1.0, self.length)

    @property
    def breakpoints(self):
        return (0.0, *self.folds, float(self.length))

    @property
    def n_pieces(self) -> int:
        return len(self.folds) + 1

    def piece_direction(self, j: int) -> int:
        return self.start_direction * (-1) ** j

    @property
    def breakpoint_images(self):
        xs = self.breakpoints
        imgs = [float(self.start_image)]
        for j in range(len(xs) - 1):
            imgs.append(imgs[-1] + self.piece_direction(j) * (xs[j + 1] - xs[j]))
        return imgs

    def piece_intervals(self):
        im = self.breakpoint_images
        return [(min(im[j], im[j + 1]), max(im[j], im[j + 1])) for j in range(self.n_pieces)]

    def cells(self):
        return layer_cells(self.piece_intervals(), self.tol)

    def creases(self):
        im = self.breakpoint_images
        out = []
        for j, x in enumerate(self.folds):
            side = -1 if self.piece_direction(j) > 0 else 1
            out.append((j, j + 1, im[j + 1], side, j))
        return out

    def evaluate(self, x):
        """Image positions for an array of material points (vectorized)."""
        return np.interp(x, self.breakpoints, self.breakpoint_images)

    def piece_of(self, x: float) -> int:
        return min(bisect.bisect_right(self.folds, x), self.n_pieces - 1)

    @classmethod
    def with_order(cls, length, folds, start_image=0.0, start_direction=1, order=None):
        """Build the per-cell stacking induced by one global bottom-to-top order."""
        folds = tuple(float(x) for x in folds)
        proto = cls(float(length), folds, float(start_image), int(start_direction), ())
        if order is None:
            order = list(range(proto.n_pieces))
        rank = {p: r for r, p in enumerate(order)}
        stacking = tuple(tuple(sorted(cover, key=rank.__getitem__)) for _, _, cover in proto.cells())
        return cls(proto.length, folds, proto.start_image, proto.start_direction, stacking)

    def to_json(self) -> dict:
        return {"format": 1, "length": float(self.length), "folds": [float(x) for x in self.folds],
                "startImage": float(self.start_image), "startDirection": int(self.start_direction),
                "stacking": [list(map(int, c)) for c in self.stacking]}

    @classmethod
    def from_json(cls, d) -> "Folding1D":
        return cls(float(d["length"]), tuple(float(x) for x in d.get("folds", [])),
                   float(d.get("startImage", 0.0)), int(d.get("startDirection", 1)),
                   tuple(tuple(int(p) for p in c) for c in d.get("stacking", [[0]])))


def check_folding1d(f: Folding1D) -> None:
    if not f.length > 0:
        raise FoldingError("length must be positive")
    if f.start_direction not in (1, -1):
        raise FoldingError("startDirection must be +1 or -1")
    xs = f.breakpoints
    for a, b in zip(xs, xs[1:]):
        if not b > a:
            raise FoldingError("folds must be strictly increasing inside (0, length)",
                               witness={"fold": b})
    check_layers(f.piece_intervals(), f.creases(), f.stacking, f.tol)


def validate_folding1d(f: Folding1D) -> Validity:
    try:
        check_folding1d(f)
    except FoldingError as e:
        return Validity(False, type(e).__name__, str(e), e.witness)
    return Validity(True)


def image_of(f: Folding1D, x: float):
    """``(position, layer_index)`` of material point x."""
    if not 0 <= x <= f.length:
        raise ValueError(f"x={x} outside [0, {f.length}]")
    pos = float(f.evaluate(x))
    if x in f.folds:
        raise AtFoldPoint(f"x={x} is a fold point", witness={"x": x}, position=pos)
    j = f.piece_of(x)
    lo, hi = f.piece_intervals()[j]
    for k, (u0, u1, cover) in enumerate(f.cells()):
        if j not in cover:
            continue
        inside = u0 - f.tol <= pos <= u1 + f.tol
        if inside and (pos < u1 - f.tol or hi <= u1 + f.tol):
            return pos, list(f.stacking[k]).index(j)
    return pos, None


# --------------------------------------------------------------------------
# Unfolding motion


@dataclass
class Motion1D:
    params: list
    frames: list
    base_point: float = 0.0

    def to_json(self) -> dict:
        return {"format": 1, "basePoint": self.base_point,
                "frames": [dict(fr.to_json(), i=float(i)) for i, fr in zip(self.params, self.frames)]}


def default_base_point(f: Folding1D) -> float:
    xs = f.breakpoints
    j = max(range(len(xs) - 1), key=lambda k: xs[k + 1] - xs[k])
    return 0.5 * (xs[j] + xs[j + 1])


def survival_threshold(f: Folding1D, x: float, p: float) -> float:
    """Largest scale at which fold x no longer appears in the conjugated frame."""
    if x > p:
        return (x - p) / (f.length - p)
    return (p - x) / p


def flat_frame(f: Folding1D, p: float) -> Folding1D:
    d = f.piece_direction(f.piece_of(p))
    fp = float(f.evaluate(p))
    return Folding1D(f.length, (), fp - d * p, d, ((0,),))


def conjugated_frame(f: Folding1D, p: float, i: float) -> Folding1D:
    """Shrink by i about p, apply f, expand by 1/i about f(p)."""
    if i == 1:
        return f
    L = f.length
    lo_m, hi_m = p * (1 - i), p + i * (L - p)
    first = f.piece_of(lo_m)
    surv = [j for j, x in enumerate(f.folds) if lo_m < x < hi_m]
    if not surv:
        return flat_frame(f, p)
    folds = tuple(p + (f.folds[j] - p) / i for j in surv)
    fp = float(f.evaluate(p))
    start = fp + (float(f.evaluate(lo_m)) - fp) / i
    proto = Folding1D(L, folds, start, f.piece_direction(first), ())
    # frame piece m is (part of) original piece first + m
    orig_cells = f.cells()
    stacking = []
    for u0, u1, cover in proto.cells():
        w0, w1 = sorted((fp + i * (u0 - fp), fp + i * (u1 - fp)))
        best = max(range(len(orig_cells)),
                   key=lambda k: min(w1, orig_cells[k][1]) - max(w0, orig_cells[k][0]))
        frame_of = {first + m: m for m in cover}
        stacking.append(tuple(frame_of[q] for q in f.stacking[best] if q in frame_of))
    return Folding1D(L, folds, start, proto.start_direction, tuple(stacking))


def _frame_images(f: Folding1D, p: float, i_values, X):
    """Images f_i(X[r]) for each row r (vectorized over scales)."""
    fp = float(f.evaluate(p))
    i = np.asarray(i_values, dtype=float)[:, None]
    return fp + (f.evaluate(p + i * (X - p)) - fp) / i


def _row_breaks(f: Folding1D, p: float, i_values):
    L = f.length
    i = np.asarray(i_values, dtype=float)[:, None]
    if not f.folds:
        return np.zeros((len(i), 0))
    pos = p + (np.asarray(f.folds)[None, :] - p) / i
    return np.clip(pos, 0.0, L)


def sup_distances(f: Folding1D, p: float, i_values):
    """Exact sup-norm distance between consecutive conjugated frames."""
    i_values = np.asarray(i_values, dtype=float)
    a, b = i_values[:-1], i_values[1:]
    L = f.length
    ends = np.tile([0.0, L], (len(a), 1))
    X = np.hstack([ends, _row_breaks(f, p, a), _row_breaks(f, p, b)])
    return np.abs(_frame_images(f, p, a, X) - _frame_images(f, p, b, X)).max(axis=1)


def sup_distance(f: Folding1D, g: Folding1D) -> float:
    """Sup over material points of |f(x) - g(x)| for foldings of one segment."""
    X = np.unique(np.concatenate([f.breakpoints, g.breakpoints]))
    return float(np.abs(f.evaluate(X) - g.evaluate(X)).max())


def equal_arclength_params(i_lo: float, i_hi: float, dist_fn, steps: int, fine: int = 1024,
                           max_grid: int = 200_000, rounds: int = 6):
    """Scale values from i_hi down to i_lo spaced evenly in sup-norm arclength.

    ``dist_fn(grid)`` returns distances between consecutive grid frames. The
    fine grid is refined until each cell is a small fraction of the per-step
    budget; picks land on grid points, so consecutive picks are within
    budget + one fine cell.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if i_hi <= i_lo:
        raise ValueError("need i_lo < i_hi")
    grid = np.geomspace(i_hi, i_lo, fine)
    for _ in range(rounds):
        d = dist_fn(grid)
        total = float(d.sum())
        budget = total / (steps - 1)
        big = np.nonzero(d > max(budget / 16, 1e-15))[0]
        if total == 0 or len(big) == 0 or len(grid) + len(big) > max_grid:
            break
        mids = np.sqrt(grid[big] * grid[big + 1])
        grid = np.sort(np.concatenate([grid, mids]))[::-1]
    d = dist_fn(grid)
    cum = np.concatenate([[0.0], np.cumsum(d)])
    total = cum[-1]
    picks = [0]
    for k in range(1, steps - 1):
        idx = int(np.searchsorted(cum, total * k / (steps - 1), side="left"))
        idx = max(idx, picks[-1] + 1)
        picks.append(min(idx, len(grid) - 1))
    picks.append(len(grid) - 1)
    out = []
    for idx in picks:
        if not out or grid[idx] < out[-1]:
            out.append(float(grid[idx]))
    while len(out) < steps:
        gaps = dist_fn(np.asarray(out))
        k = int(np.argmax(gaps))
        out.insert(k + 1, math.sqrt(out[k] * out[k + 1]))
    return out


def unfold_motion_1d(f: Folding1D, base_point: Optional[float] = None, steps: int = 256) -> Motion1D:
    """Unfold by shrinking about a non-fold point and re-expanding the image.

    Frames run in motion order: the first is ``f`` itself (scale 1), the last
    is the flat folding reached once every fold has left the shrunk copy.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    p = default_base_point(f) if base_point is None else float(base_point)
    if p in f.folds:
        raise BasePointOnFold(f"base point {p} is a fold", witness={"x": p})
    if not 0 < p < f.length:
        raise ValueError("base point must lie strictly inside the segment")
    if not f.folds:
        return Motion1D([1.0] * steps, [f] * steps, p)
    i_star = min(survival_threshold(f, x, p) for x in f.folds)
    params = equal_arclength_params(i_star, 1.0, lambda g: sup_distances(f, p, g), steps)
    params[-1] = i_star
    frames = [conjugated_frame(f, p, i) for i in params]
    frames[-1] = flat_frame(f, p)
    return Motion1D(params, frames, p)
