"""Dimension-generic geometric primitives.

Points are 1-D float64 numpy arrays.  Everything here is a pure function of
its inputs: nearest point on a segment, closest points between two segments
(works in any dimension), and perpendicular-bisector hyperplanes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Relative tolerance below which two segment directions count as parallel.
PARALLEL_REL_TOL = 1e-12


def as_point(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class Hyperplane:
    """Hyperplane {x : normal.x = offset}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", as_point(self.normal))
        object.__setattr__(self, "offset", float(self.offset))
        if not np.any(self.normal):
            raise ValueError("hyperplane normal must be nonzero")

    def evaluate(self, x) -> float:
        return float(self.normal @ as_point(x)) - self.offset

    def signed_distance(self, x) -> float:
        return self.evaluate(x) / float(np.linalg.norm(self.normal))

    def side(self, x) -> int:
        return int(np.sign(self.evaluate(x)))


@dataclass(frozen=True)
class SegmentPair:
    """Two segments [p, v] and [p2, v2]; all four endpoints share a dimension."""

    p: np.ndarray
    v: np.ndarray
    p2: np.ndarray
    v2: np.ndarray

    def __post_init__(self):
        pts = [as_point(q) for q in (self.p, self.v, self.p2, self.v2)]
        dims = {q.shape for q in pts}
        if len(dims) != 1:
            raise ValueError("segment endpoints must share one dimension")
        for name, q in zip(("p", "v", "p2", "v2"), pts):
            object.__setattr__(self, name, q)


class SegmentFoot(NamedTuple):
    point: np.ndarray
    alpha: float
    degenerate: bool = False


class SegmentClosest(NamedTuple):
    q: np.ndarray
    q2: np.ndarray
    s: float
    t: float


def nearest_on_segment(x, y, z) -> SegmentFoot:
    """Nearest point to ``x`` on the segment [y, z].

    Returns the point together with its parameter ``alpha`` in [0, 1]
    (point = (1-alpha)*y + alpha*z).  A zero-length segment is reported with
    ``degenerate=True`` and alpha 0 so solver loops can treat it as "no
    progress possible" instead of blowing up.
    """
    x, y, z = as_point(x), as_point(y), as_point(z)
    d = z - y
    dd = float(d @ d)
    if dd == 0.0:
        return SegmentFoot(y.copy(), 0.0, True)
    alpha = float((x - y) @ d) / dd
    alpha = min(1.0, max(0.0, alpha))
    return SegmentFoot((1.0 - alpha) * y + alpha * z, alpha, False)


def closest_segment_points(pair: SegmentPair) -> SegmentClosest:
    """Closest pair of points between segments [p, v] and [p2, v2].

    Solves the two-by-two normal equations for the segment parameters, clips
    them to [0, 1] and re-minimizes the free parameter after a clip, which
    yields the exact constrained minimizer.  Parallel segments (denominator
    vanishing relative to the direction norms) fall back to fixing s = 0 and
    solving for t; a zero-length segment falls back to a single point
    projection.
    """
    p, v, p2, v2 = pair.p, pair.v, pair.p2, pair.v2
    a = v - p
    b = v2 - p2
    w = p - p2
    aa = float(a @ a)
    bb = float(b @ b)
    if aa == 0.0 and bb == 0.0:
        return SegmentClosest(p.copy(), p2.copy(), 0.0, 0.0)
    if aa == 0.0:
        foot = nearest_on_segment(p, p2, v2)
        return SegmentClosest(p.copy(), foot.point, 0.0, foot.alpha)
    if bb == 0.0:
        foot = nearest_on_segment(p2, p, v)
        return SegmentClosest(foot.point, p2.copy(), foot.alpha, 0.0)

    ab = float(a @ b)
    aw = float(a @ w)
    bw = float(b @ w)
    den = aa * bb - ab * ab
    if den <= PARALLEL_REL_TOL * aa * bb:
        s = 0.0
        t = min(1.0, max(0.0, bw / bb))
    else:
        s = (ab * bw - bb * aw) / den
        t = (aa * bw - ab * aw) / den

    if 0.0 <= s <= 1.0 and 0.0 <= t <= 1.0:
        return SegmentClosest(p + s * a, p2 + t * b, s, t)

    s_out = s < 0.0 or s > 1.0
    t_out = t < 0.0 or t > 1.0
    if s_out and not t_out:
        s = min(1.0, max(0.0, s))
        t = min(1.0, max(0.0, (bw + s * ab) / bb))
        return SegmentClosest(p + s * a, p2 + t * b, s, t)
    if t_out and not s_out:
        t = min(1.0, max(0.0, t))
        s = min(1.0, max(0.0, (t * ab - aw) / aa))
        return SegmentClosest(p + s * a, p2 + t * b, s, t)

    # Both parameters clipped: evaluate the two one-sided re-minimizations
    # and keep whichever pair is closer.
    sc = min(1.0, max(0.0, s))
    tc = min(1.0, max(0.0, t))
    t_a = min(1.0, max(0.0, (bw + sc * ab) / bb))
    s_b = min(1.0, max(0.0, (tc * ab - aw) / aa))
    qa, qa2 = p + sc * a, p2 + t_a * b
    qb, qb2 = p + s_b * a, p2 + tc * b
    da = qa - qa2
    db = qb - qb2
    if float(da @ da) <= float(db @ db):
        return SegmentClosest(qa, qa2, sc, t_a)
    return SegmentClosest(qb, qb2, s_b, tc)


def bisector(p, p2) -> Hyperplane:
    """Perpendicular bisector of the segment from ``p`` to ``p2``.

    normal = p - p2, offset = (p.p - p2.p2)/2; the midpoint evaluates to the
    offset up to rounding.  Coincident inputs have no bisector and raise,
    which in solver context signals the hulls already touch at the iterates.
    """
    p, p2 = as_point(p), as_point(p2)
    h = p - p2
    if not np.any(h):
        raise ValueError("bisector undefined for coincident points")
    offset = 0.5 * (float(p @ p) - float(p2 @ p2))
    return Hyperplane(h, offset)
