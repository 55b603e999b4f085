"""Star-shaped and spiral-shaped recognition and the shrinking motion.

A spiral motion about center ``c`` moves every point with velocity
``rate * R(theta) (c - z)``; ``theta = 0`` is plain linear shrinking. For a
fixed ``theta`` the admissible centers form a convex region, two half-planes
per edge (one per endpoint, since the inward test is linear along the edge).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import NegativeTime, ThetaOutOfRange
from .geom import (
    ConvexRegion,
    HalfPlane,
    Location,
    Polygon,
    edge_halfplanes,
    intersect_halfplanes,
    max_margin,
    point_in_polygon,
    polygon_contains_polygon,
    signed_distance_outside,
)

THETA_EPS = 1e-6


@dataclass(frozen=True)
class SpiralParams:
    center: tuple
    theta: float
    rate: float = 1.0
    margin: float = 0.0
    marginal: bool = False

    def __post_init__(self):
        if not abs(self.theta) < math.pi / 2:
            raise ThetaOutOfRange(f"theta={self.theta} outside (-pi/2, pi/2)")
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    @property
    def sigma(self) -> float:
        """Log-scale speed; negative for every admissible theta."""
        return -self.rate * math.cos(self.theta)

    @property
    def omega(self) -> float:
        return -self.rate * math.sin(self.theta)

    def time_for_scale(self, i: float) -> float:
        return math.log(i) / self.sigma

    def to_json(self) -> dict:
        return {"format": 1, "center": [float(self.center[0]), float(self.center[1])],
                "theta": float(self.theta), "rate": float(self.rate),
                "margin": float(self.margin), "marginal": bool(self.marginal)}


@dataclass
class ShrinkReport:
    samples: list = field(default_factory=list)  # (t, contained, worst_violation)

    @property
    def verdict(self) -> bool:
        return all(ok for _, ok, _ in self.samples)

    def to_json(self) -> dict:
        return {"format": 1, "verdict": self.verdict,
                "samples": [{"t": t, "contained": ok, "worstViolation": w}
                            for t, ok, w in self.samples]}


@dataclass(frozen=True)
class Similarity:
    """z -> center + scale * R(angle) (z - center)."""

    center: tuple
    scale: float
    angle: float

    def matrix(self):
        c, s = math.cos(self.angle), math.sin(self.angle)
        return self.scale * np.array([[c, -s], [s, c]])

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self.scale == 1 and self.angle == 0:
            return z.copy()
        c = np.asarray(self.center, dtype=float)
        return c + (z - c) @ self.matrix().T

    def inverse(self) -> "Similarity":
        return Similarity(self.center, 1.0 / self.scale, -self.angle)


def star_kernel(P: Polygon) -> ConvexRegion:
    return intersect_halfplanes(edge_halfplanes(P))


def _check_theta(theta):
    if not abs(theta) < math.pi / 2:
        raise ThetaOutOfRange(f"theta={theta} outside (-pi/2, pi/2)")


def spiral_halfplanes(P: Polygon, theta: float):
    _check_theta(theta)
    cos_t, sin_t = Fraction(math.cos(theta)), Fraction(math.sin(theta))
    if theta == 0:
        cos_t, sin_t = Fraction(1), Fraction(0)
    hs = []
    for a, b in P.edges():
        ax, ay, bx, by = (Fraction(c) for c in (a[0], a[1], b[0], b[1]))
        nx, ny = -(by - ay), bx - ax
        # m = R(-theta) n
        m = (cos_t * nx + sin_t * ny, -sin_t * nx + cos_t * ny)
        hs.append(HalfPlane(m, m[0] * ax + m[1] * ay))
        hs.append(HalfPlane(m, m[0] * bx + m[1] * by))
    return hs


def spiral_feasible_region(P: Polygon, theta: float) -> ConvexRegion:
    """Centers from which a spiral of angle theta leaves every edge inward."""
    return intersect_halfplanes(spiral_halfplanes(P, theta))


def _float_halfplanes(P: Polygon, theta: float):
    # Float-only variant for the sweep; LP tolerances dominate anyway.
    c, s = math.cos(theta), math.sin(theta)
    hs = []
    for a, b in P.edges():
        nx, ny = -(b[1] - a[1]), b[0] - a[0]
        m = (c * nx + s * ny, -s * nx + c * ny)
        hs.append(HalfPlane(m, m[0] * a[0] + m[1] * a[1]))
        hs.append(HalfPlane(m, m[0] * b[0] + m[1] * b[1]))
    return hs


def spiral_margin(P: Polygon, theta: float):
    """Best center and its minimum unit slack for a fixed theta."""
    center, t = max_margin(_float_halfplanes(P, theta))
    if t >= 0 and point_in_polygon(P, center) is Location.OUTSIDE:
        t = -math.inf
    return center, t


def margin_curve(P: Polygon, angle_samples: int = 720):
    """Sampled (theta, margin) pairs over the open admissible range."""
    lo, hi = -math.pi / 2 + THETA_EPS, math.pi / 2 - THETA_EPS
    thetas = np.linspace(lo, hi, angle_samples)
    return [(float(th), spiral_margin(P, float(th))[1]) for th in thetas]


def find_spiral_params(P: Polygon, angle_samples: int = 720, refine_iters: int = 60,
                       tol: float = 1e-12) -> Optional[SpiralParams]:
    """Resolution-bounded search for a feasible spiral angle and center.

    Samples theta on a uniform grid (plus theta = 0), then ternary-searches
    the margin around the best sample. Feasibility windows narrower than the
    grid spacing can be missed.
    """
    if angle_samples < 8:
        raise ValueError("angle_samples must be >= 8")
    curve = margin_curve(P, angle_samples)
    curve.append((0.0, spiral_margin(P, 0.0)[1]))
    best_theta, best_margin = max(curve, key=lambda tm: (tm[1], -abs(tm[0])))
    step = (math.pi - 2 * THETA_EPS) / (angle_samples - 1)
    lo = max(best_theta - step, -math.pi / 2 + THETA_EPS)
    hi = min(best_theta + step, math.pi / 2 - THETA_EPS)
    for _ in range(refine_iters):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if spiral_margin(P, m1)[1] < spiral_margin(P, m2)[1]:
            lo = m1
        else:
            hi = m2
    refined = 0.5 * (lo + hi)
    theta, margin = best_theta, best_margin
    rm = spiral_margin(P, refined)[1]
    if rm > margin:
        theta, margin = refined, rm
    if margin < -tol:
        return None
    center, margin = spiral_margin(P, theta)
    return SpiralParams(tuple(center), float(theta), 1.0, max(margin, 0.0), margin <= tol)


def spiral_map(sp: SpiralParams, t: float) -> Similarity:
    if t < 0:
        raise NegativeTime(f"t={t} < 0")
    return Similarity(tuple(sp.center), math.exp(sp.sigma * t), sp.omega * t)


def shrink_to_scale(sp: SpiralParams, i: float) -> Similarity:
    """The spiral map at the time where the scale factor equals i."""
    return spiral_map(sp, sp.time_for_scale(i))


def verify_shrinking_motion(P: Polygon, sp: SpiralParams, steps: int = 64,
                            horizon: Optional[float] = None) -> ShrinkReport:
    """Check every sampled spiral copy of P stays in P.

    Times are uniform in t, i.e. scale factors geometrically spaced down to
    ``exp(sigma * horizon)``.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if horizon is None:
        horizon = 5.0 / sp.rate
    report = ShrinkReport()
    for k in range(steps):
        t = horizon * k / (steps - 1)
        pts = spiral_map(sp, t)(np.asarray(P.vertices, dtype=float))
        verts = [tuple(map(float, p)) for p in pts]
        ok = polygon_contains_polygon(P, verts)
        worst = 0.0
        if not ok:
            n = len(verts)
            probes = verts + [((verts[j][0] + verts[(j + 1) % n][0]) / 2,
                               (verts[j][1] + verts[(j + 1) % n][1]) / 2) for j in range(n)]
            worst = max(signed_distance_outside(P, v) for v in probes)
        report.samples.append((float(t), ok, float(worst)))
    return report
