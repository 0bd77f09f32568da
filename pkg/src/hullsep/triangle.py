"""Triangle-algorithm solvers for hull intersection and hull distance.

Phase one walks a pair of iterates (p, p2), one inside each hull, toward
each other using pivot vertices until either the gap is epsilon-small
relative to the last pivot distance (the hulls intersect approximately) or
no pivot exists, in which case the perpendicular bisector of the pair
certifies separation.  Phase two starts from such a witness pair and shrinks
the gap between the upper bound d(p, p2) and the supporting-hyperplane lower
bound until the pair is a strong epsilon-approximation of the hull distance,
returning the optimal pair of parallel supporting hyperplanes.

Acceleration heuristics (all optional, all on by default): joint segment
moves that update both iterates at once, incrementally maintained dot
products so each scan costs O(n) after the first, a zig-zag guard that
inserts the midpoint of two alternating pivots as a synthetic vertex, and a
non-bounding candidate filter that narrows pivot scans.
"""

from __future__ import annotations

import enum
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .geometry import Hyperplane, SegmentPair, bisector, closest_segment_points
from .pointset import ConvexIterate, PointSet
from .report import SolveReport, Status

WITNESS_TOL = 1e-9  # strict-side slack, scaled by the largest vertex norm


class DimensionMismatchError(ValueError):
    pass


class NotAWitnessError(ValueError):
    pass


class CacheStaleError(ValueError):
    pass


class PivotSide(enum.Enum):
    V = "v"
    V2 = "v-prime"


@dataclass(frozen=True)
class PivotResult:
    kind: Optional[PivotSide]
    index: int = -1
    is_weak: bool = False


@dataclass
class ApproxIntersection:
    """Iterate pair certifying epsilon-approximate hull intersection."""

    p: ConvexIterate
    p2: ConvexIterate
    gap: float


@dataclass
class WitnessCertificate:
    """Iterate pair whose perpendicular bisector separates the hulls."""

    p: ConvexIterate
    p2: ConvexIterate
    bisector: Hyperplane

    def validate(self, V: PointSet, W: PointSet, tol: float = WITNESS_TOL) -> bool:
        """Strict full-scan halfspace test: V entirely on the positive side
        of the bisector, W entirely on the negative side."""
        h = self.bisector.normal
        hn = float(np.linalg.norm(h))
        if hn == 0.0:
            return False
        scale = max(1.0, float(np.sqrt(V.squared_norms.max())),
                    float(np.sqrt(W.squared_norms.max())))
        mv = (V.points @ h - self.bisector.offset) / hn
        mw = (W.points @ h - self.bisector.offset) / hn
        cut = -tol * scale
        return float(mv.min()) > cut and float((-mw).min()) > cut


@dataclass
class GapEstimate:
    """Distance sandwich quantities for a pair of iterates."""

    delta: float          # d(p, p2), upper bound
    delta_lower: float    # supporting-plane gap, lower bound
    E: float              # delta - delta_lower
    E_v: float            # first-set share of E
    E_v2: float           # second-set share of E
    rho: float            # d(p, extreme vertex of V)
    rho2: float           # d(p2, extreme vertex of W)
    v_index: int = -1
    v2_index: int = -1


@dataclass
class TAOptions:
    joint_steps: bool = True
    use_cache: bool = True
    zigzag: bool = True
    zigzag_window: int = 8
    zigzag_eps: float = 1e-3
    zigzag_cap: int = 64
    nonbounding_filter: bool = True
    gram_budget: int = 1024
    record_trace: bool = False


class StepRecord(NamedTuple):
    side: str          # "p" or "p2": which iterate moved
    pivot: int         # working-set index stepped toward
    gap: float         # d(p, p2) after the step


@dataclass
class SyntheticVertex:
    side: str
    point: np.ndarray
    expansion: np.ndarray
    parents: Tuple[int, int]


def _pt(x) -> np.ndarray:
    p = getattr(x, "point", None)
    return np.asarray(p if p is not None else x, dtype=np.float64)


class _WorkingSet:
    """A point set plus appended synthetic vertices, each tracked as a
    convex combination of the originals."""

    def __init__(self, base: PointSet):
        self.base = base
        self._array = base.points
        self._sq = base.squared_norms
        self._expansions = {}

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def sq_norms(self) -> np.ndarray:
        return self._sq

    @property
    def n(self) -> int:
        return self._array.shape[0]

    def expansion(self, j: int) -> np.ndarray:
        if j < self.base.n:
            e = np.zeros(self.base.n)
            e[j] = 1.0
            return e
        return self._expansions[j]

    def append(self, point: np.ndarray, expansion: np.ndarray) -> int:
        idx = self.n
        self._array = np.vstack([self._array, point[None, :]])
        self._sq = np.append(self._sq, float(point @ point))
        self._expansions[idx] = expansion
        return idx


class DotCache:
    """Incrementally maintained dot products between both iterates and every
    working vertex, plus the three iterate self-products.

    After an iterate moves to (1-a)*old + a*vertex, every cached product
    updates by the same affine rule, which costs O(n + n') per step given
    the vertex's Gram rows.  Gram rows are computed lazily and kept in an
    LRU map capped at ``budget`` rows.  The cache tracks iterate versions
    and refuses to update (CacheStaleError) if the coefficients were
    modified outside the step protocol.
    """

    def __init__(self, p: ConvexIterate, p2: ConvexIterate,
                 work_v: _WorkingSet, work_w: _WorkingSet, budget: int = 1024):
        self._p, self._p2 = p, p2
        self._wv, self._ww = work_v, work_w
        self._budget = budget
        self._gram: "OrderedDict[tuple, tuple]" = OrderedDict()
        self.resync()

    def resync(self):
        p, q = self._p.point, self._p2.point
        self.pv = self._wv.array @ p
        self.pw = self._ww.array @ p
        self.qv = self._wv.array @ q
        self.qw = self._ww.array @ q
        self.pp = float(p @ p)
        self.qq = float(q @ q)
        self.pq = float(p @ q)
        self._versions = (self._p.version, self._p2.version)

    @property
    def stale(self) -> bool:
        return (self._p.version, self._p2.version) != self._versions

    def _rows(self, side: str, j: int):
        key = (side, j)
        hit = self._gram.get(key)
        if hit is not None:
            self._gram.move_to_end(key)
            return hit
        vert = (self._wv if side == "p" else self._ww).array[j]
        rows = (self._wv.array @ vert, self._ww.array @ vert)
        self._gram[key] = rows
        if len(self._gram) > self._budget:
            self._gram.popitem(last=False)
        return rows

    def step(self, side: str, j: int, alpha: float):
        """Apply the affine update for ``side`` having stepped toward
        working vertex ``j`` with coefficient ``alpha``."""
        expect = (self._versions[0] + (1 if side == "p" else 0),
                  self._versions[1] + (1 if side == "p2" else 0))
        if (self._p.version, self._p2.version) != expect:
            raise CacheStaleError("iterates were modified outside the cache protocol")
        a = float(alpha)
        row_v, row_w = self._rows(side, j)
        if side == "p":
            pv_j = float(self.pv[j])
            self.pp = (1 - a) ** 2 * self.pp + 2 * a * (1 - a) * pv_j \
                + a * a * float(self._wv.sq_norms[j])
            self.pq = (1 - a) * self.pq + a * float(self.qv[j])
            self.pv = (1 - a) * self.pv + a * row_v
            self.pw = (1 - a) * self.pw + a * row_w
        elif side == "p2":
            qw_j = float(self.qw[j])
            self.qq = (1 - a) ** 2 * self.qq + 2 * a * (1 - a) * qw_j \
                + a * a * float(self._ww.sq_norms[j])
            self.pq = (1 - a) * self.pq + a * float(self.pw[j])
            self.qv = (1 - a) * self.qv + a * row_v
            self.qw = (1 - a) * self.qw + a * row_w
        else:
            raise ValueError(f"unknown side {side!r}")
        self._versions = expect

    def extend(self, which: str, point: np.ndarray):
        """Register one appended working vertex ('v' or 'w' set)."""
        if which == "v":
            self.pv = np.append(self.pv, float(self._p.point @ point))
            self.qv = np.append(self.qv, float(self._p2.point @ point))
        else:
            self.pw = np.append(self.pw, float(self._p.point @ point))
            self.qw = np.append(self.qw, float(self._p2.point @ point))
        self._gram.clear()  # cached rows predate the new column

    def recompute(self) -> dict:
        """Fresh-from-coordinates values, for coherence checks."""
        p, q = self._p.point, self._p2.point
        return {
            "pv": self._wv.array @ p, "pw": self._ww.array @ p,
            "qv": self._wv.array @ q, "qw": self._ww.array @ q,
            "pp": float(p @ p), "qq": float(q @ q), "pq": float(p @ q),
        }


def update_error_cache(cache: DotCache, step_alpha: float, pivot_index: int,
                       side: str) -> DotCache:
    """Fold one iterate step into the running dot-product cache.

    Called after the ``side`` iterate moved to
    (1-step_alpha)*old + step_alpha*vertex[pivot_index]; every cached
    product follows the same affine combination.  Raises CacheStaleError
    when the iterates changed outside this protocol.
    """
    cache.step(side, pivot_index, step_alpha)
    return cache


def find_pivot(p, p2, V: PointSet, W: PointSet,
               filters: Optional[Tuple[Optional[np.ndarray], Optional[np.ndarray]]] = None
               ) -> PivotResult:
    """Search both vertex sets for a pivot for the pair (p, p2).

    Scans V for the maximizer of (p2-p).v and accepts it when
    2v.(p2-p) >= |p2|^2 - |p|^2, then W symmetrically.  When ``filters``
    supplies candidate index subsets the subset is scanned first and the
    full set only if the subset yields nothing.
    """
    pa, pb = _pt(p), _pt(p2)
    d = pb - pa
    thr_v = 0.5 * (float(pb @ pb) - float(pa @ pa))
    fv = filters[0] if filters else None
    fw = filters[1] if filters else None

    j = _scan_scores(V.points, d, thr_v, fv)
    if j is not None:
        return PivotResult(PivotSide.V, j)
    j = _scan_scores(W.points, -d, -thr_v, fw)
    if j is not None:
        return PivotResult(PivotSide.V2, j)
    return PivotResult(None)


def _scan_scores(arr: np.ndarray, direction: np.ndarray, threshold: float,
                 subset: Optional[np.ndarray]) -> Optional[int]:
    if subset is not None and len(subset):
        sub = np.asarray(subset)
        scores = arr[sub] @ direction
        j = int(sub[np.argmax(scores)])
        if float(arr[j] @ direction) >= threshold:
            return j
    scores = arr @ direction
    j = int(np.argmax(scores))
    if float(scores[j]) >= threshold:
        return j
    return None


def support_extremes(h, V: PointSet, W: PointSet) -> Tuple[int, int, float]:
    """Extreme vertices along the normal h and the supporting-plane gap.

    Returns (argmin of h.x over V, argmax of h.x over W,
    (h.v - h.v') / |h|).  The gap is a lower bound on the hull distance
    whenever it is positive; a non-positive value means h does not separate.
    """
    h = np.asarray(h, dtype=np.float64)
    hn = float(np.linalg.norm(h))
    if hn == 0.0:
        raise ValueError("support extremes need a nonzero normal")
    hv = V.points @ h
    hw = W.points @ h
    vi = int(np.argmin(hv))
    wi = int(np.argmax(hw))
    return vi, wi, (float(hv[vi]) - float(hw[wi])) / hn


def measure_gap(p, p2, V: PointSet, W: PointSet) -> GapEstimate:
    """Distance sandwich for the pair (p, p2) against the original sets."""
    pa, pb = _pt(p), _pt(p2)
    h = pa - pb
    delta = float(np.linalg.norm(h))
    if delta == 0.0:
        raise ValueError("gap estimate undefined for coincident iterates")
    a = 0.5 * (float(pa @ pa) - float(pb @ pb))
    vi, wi, lower = support_extremes(h, V, W)
    d_v = (float(V.points[vi] @ h) - a) / delta
    d_w = (a - float(W.points[wi] @ h)) / delta
    return GapEstimate(
        delta=delta,
        delta_lower=lower,
        E=delta - lower,
        E_v=0.5 * delta - d_v,
        E_v2=0.5 * delta - d_w,
        rho=float(np.linalg.norm(pa - V.points[vi])),
        rho2=float(np.linalg.norm(pb - W.points[wi])),
        v_index=vi,
        v2_index=wi,
    )


def joint_step(p: ConvexIterate, v_index: int, p2: ConvexIterate, v2_index: int
               ) -> Tuple[ConvexIterate, ConvexIterate]:
    """Move both iterates at once to the closest pair of points between the
    segments [p, v] and [p2, v2].

    Never worse than the better of the two single-segment moves; degenerate
    segments fall back to the single-point projection inside the segment
    solver.  Returns stepped copies, leaving the inputs untouched.
    """
    va = p.parent.points[v_index]
    vb = p2.parent.points[v2_index]
    res = closest_segment_points(SegmentPair(p.point, va, p2.point, vb))
    new_p, new_p2 = p.copy(), p2.copy()
    new_p.step_toward(va, res.s, index=v_index)
    new_p2.step_toward(vb, res.t, index=v2_index)
    return new_p, new_p2


def _pick_zigzag_pair(history: Sequence[StepRecord], current_gap: float,
                      epsilon_zz: float, window: int) -> Optional[Tuple[str, int, int]]:
    if len(history) < window:
        return None
    recent = list(history)[-window:]
    g0 = recent[0].gap
    if g0 - current_gap >= epsilon_zz * current_gap:
        return None
    counts = {"p": 0, "p2": 0}
    for rec in recent:
        counts[rec.side] += 1
    side = "p" if counts["p"] >= counts["p2"] else "p2"
    freq: dict = {}
    for rec in recent:
        if rec.side == side:
            freq[rec.pivot] = freq.get(rec.pivot, 0) + 1
    if len(freq) < 2:
        return None
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    return side, ranked[0][0], ranked[1][0]


def zigzag_guard(history: Sequence[StepRecord], p: ConvexIterate, p2: ConvexIterate,
                 epsilon_zz: float = 1e-3, window: int = 8) -> Optional[SyntheticVertex]:
    """Detect pivot zig-zagging and propose a synthetic midpoint vertex.

    When the gap reduction over the trailing window falls below
    epsilon_zz relative to the current gap, returns the midpoint of the two
    most frequently used pivots on the side that stepped most, expressed as
    a convex combination of that side's original vertices.  Returns None
    while convergence is healthy.
    """
    gap = float(np.linalg.norm(p.point - p2.point))
    pick = _pick_zigzag_pair(history, gap, epsilon_zz, window)
    if pick is None:
        return None
    side, i, j = pick
    parent = p.parent if side == "p" else p2.parent
    point = 0.5 * (parent.points[i] + parent.points[j])
    expansion = np.zeros(parent.n)
    expansion[i] += 0.5
    expansion[j] += 0.5
    return SyntheticVertex(side, point, expansion, (i, j))


class _Engine:
    """One solve's worth of triangle-algorithm state."""

    def __init__(self, V: PointSet, W: PointSet,
                 p: Optional[ConvexIterate] = None, p2: Optional[ConvexIterate] = None,
                 epsilon: float = 1e-3, options: Optional[TAOptions] = None):
        if V.dim != W.dim:
            raise DimensionMismatchError(
                f"point sets have dimensions {V.dim} and {W.dim}")
        if not 0.0 < epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        self.V, self.W = V, W
        self.eps = float(epsilon)
        self.opt = options or TAOptions()
        if p is not None and p.parent is not V:
            raise ValueError("p must be an iterate over the first point set")
        if p2 is not None and p2.parent is not W:
            raise ValueError("p2 must be an iterate over the second point set")
        self.p = p.copy() if p is not None else ConvexIterate.centroid(V)
        self.p2 = p2.copy() if p2 is not None else ConvexIterate.centroid(W)
        self.work_v = _WorkingSet(V)
        self.work_w = _WorkingSet(W)
        self.cache = DotCache(self.p, self.p2, self.work_v, self.work_w,
                              self.opt.gram_budget) if self.opt.use_cache else None
        self.ref_v: Optional[int] = None
        self.ref_w: Optional[int] = None
        self.cand_v: Optional[np.ndarray] = None
        self.cand_w: Optional[np.ndarray] = None
        self.forced: Optional[Tuple[str, int]] = None
        self.gap_window: List[Tuple[int, float]] = []    # (step_no, gap), one per step
        self.pivot_window: List[Tuple[int, str, int]] = []  # (step_no, side, pivot)
        self.synth_count = 0
        self.steps = 0
        self.trace: Optional[List[float]] = [] if self.opt.record_trace else None
        self.witness_snapshot: Optional[Tuple[ConvexIterate, ConvexIterate]] = None

    # -- cached / fresh scalar helpers ------------------------------------

    def gap(self) -> float:
        if self.cache is not None:
            return float(np.sqrt(max(self.cache.pp + self.cache.qq - 2 * self.cache.pq, 0.0)))
        return float(np.linalg.norm(self.p.point - self.p2.point))

    def _self_dots(self) -> Tuple[float, float]:
        if self.cache is not None:
            return self.cache.pp, self.cache.qq
        return (float(self.p.point @ self.p.point),
                float(self.p2.point @ self.p2.point))

    def _ref_dist(self, side: str) -> float:
        ref = self.ref_v if side == "p" else self.ref_w
        if ref is None:
            return 0.0
        if self.cache is not None:
            if side == "p":
                d2 = self.cache.pp - 2 * float(self.cache.pv[ref]) + float(self.work_v.sq_norms[ref])
            else:
                d2 = self.cache.qq - 2 * float(self.cache.qw[ref]) + float(self.work_w.sq_norms[ref])
            return float(np.sqrt(max(d2, 0.0)))
        work = self.work_v if side == "p" else self.work_w
        own = self.p if side == "p" else self.p2
        return float(np.linalg.norm(own.point - work.array[ref]))

    def _scores(self, side: str, subset: Optional[np.ndarray] = None) -> np.ndarray:
        # pivot-scan scores: (p2-p).v over V for side "p", (p-p2).v' over W
        # for side "p2"
        if self.cache is not None:
            full = (self.cache.qv - self.cache.pv) if side == "p" else (self.cache.pw - self.cache.qw)
            return full if subset is None else full[subset]
        d = self.p2.point - self.p.point
        if side == "p":
            arr = self.work_v.array
            return (arr @ d) if subset is None else (arr[subset] @ d)
        arr = self.work_w.array
        return (arr @ -d) if subset is None else (arr[subset] @ -d)

    def _threshold(self, side: str) -> float:
        pp, qq = self._self_dots()
        return 0.5 * ((qq - pp) if side == "p" else (pp - qq))

    def _iterate_score(self, side: str) -> float:
        # score of the moving iterate itself: (p2-p).p resp. (p-p2).p2
        if self.cache is not None:
            return (self.cache.pq - self.cache.pp) if side == "p" \
                else (self.cache.pq - self.cache.qq)
        d = self.p2.point - self.p.point
        return float(d @ self.p.point) if side == "p" else float(-d @ self.p2.point)

    # -- pivot scanning ----------------------------------------------------

    def _scan(self, side: str) -> Optional[int]:
        thr = self._threshold(side)
        if self.forced is not None and self.forced[0] == side:
            j = self.forced[1]
            self.forced = None
            if float(self._scores(side, np.array([j]))[0]) >= thr:
                return j
        cand = self.cand_v if side == "p" else self.cand_w
        if self.opt.nonbounding_filter and cand is not None and cand.size:
            sub_scores = self._scores(side, cand)
            j = int(cand[np.argmax(sub_scores)])
            if float(sub_scores.max()) >= thr:
                return j
        scores = self._scores(side)
        if self.opt.nonbounding_filter:
            fresh = np.nonzero(scores > self._iterate_score(side))[0]
            if side == "p":
                self.cand_v = fresh
            else:
                self.cand_w = fresh
        j = int(np.argmax(scores))
        if float(scores[j]) >= thr:
            return j
        return None

    def _fresh_pivot(self) -> Optional[Tuple[str, int]]:
        # exact-from-coordinates re-check before declaring a witness
        d = self.p2.point - self.p.point
        pp = float(self.p.point @ self.p.point)
        qq = float(self.p2.point @ self.p2.point)
        sv = self.work_v.array @ d
        j = int(np.argmax(sv))
        if 2 * float(sv[j]) >= qq - pp:
            return "p", j
        sw = self.work_w.array @ -d
        j = int(np.argmax(sw))
        if 2 * float(sw[j]) >= pp - qq:
            return "p2", j
        return None

    # -- stepping ----------------------------------------------------------

    def _step_alpha(self, side: str, j: int) -> float:
        if self.cache is not None:
            c = self.cache
            if side == "p":
                num = float(c.qv[j]) - c.pq - float(c.pv[j]) + c.pp
                den = float(self.work_v.sq_norms[j]) - 2 * float(c.pv[j]) + c.pp
            else:
                num = float(c.pw[j]) - c.pq - float(c.qw[j]) + c.qq
                den = float(self.work_w.sq_norms[j]) - 2 * float(c.qw[j]) + c.qq
        else:
            if side == "p":
                v = self.work_v.array[j]
                diff = self.p2.point - self.p.point
                rel = v - self.p.point
            else:
                v = self.work_w.array[j]
                diff = self.p.point - self.p2.point
                rel = v - self.p2.point
            num = float(diff @ rel)
            den = float(rel @ rel)
        if den <= 0.0 or num <= 0.0:
            return 0.0
        return min(1.0, num / den)

    def _apply(self, side: str, j: int, alpha: float):
        work = self.work_v if side == "p" else self.work_w
        own = self.p if side == "p" else self.p2
        expansion = work._expansions.get(j)
        own.step_toward(work.array[j], alpha,
                        index=j if expansion is None else None,
                        expansion=expansion)
        if self.cache is not None:
            self.cache.step(side, j, alpha)
        if side == "p":
            self.ref_v = j
        else:
            self.ref_w = j

    def _record(self, sides_pivots):
        g = self.gap()
        self.gap_window.append((self.steps, g))
        for side, j in sides_pivots:
            self.pivot_window.append((self.steps, side, j))
        w = self.opt.zigzag_window
        cut = self.steps - w
        while self.gap_window and self.gap_window[0][0] < cut:
            self.gap_window.pop(0)
        while self.pivot_window and self.pivot_window[0][0] < cut:
            self.pivot_window.pop(0)

    def _single(self, side: str, j: int) -> bool:
        alpha = self._step_alpha(side, j)
        if alpha <= 0.0:
            return False
        self._apply(side, j, alpha)
        self._record([(side, j)])
        return True

    def _joint(self, jv: int, jw: int) -> bool:
        res = closest_segment_points(SegmentPair(
            self.p.point, self.work_v.array[jv],
            self.p2.point, self.work_w.array[jw]))
        if res.s <= 0.0 and res.t <= 0.0:
            return False
        self._apply("p", jv, res.s)
        self._apply("p2", jw, res.t)
        self._record([("p", jv), ("p2", jw)])
        return True

    # -- zig-zag guard -------------------------------------------------------

    def _zigzag_check(self):
        if not self.opt.zigzag or self.synth_count >= self.opt.zigzag_cap:
            return
        if len(self.gap_window) < self.opt.zigzag_window:
            return
        g0 = self.gap_window[0][1]
        g1 = self.gap_window[-1][1]
        if g0 - g1 >= self.opt.zigzag_eps * g1:
            return
        counts = {"p": 0, "p2": 0}
        for _, side, _j in self.pivot_window:
            counts[side] += 1
        side = "p" if counts["p"] >= counts["p2"] else "p2"
        freq: dict = {}
        for _, s, j in self.pivot_window:
            if s == side:
                freq[j] = freq.get(j, 0) + 1
        if len(freq) < 2:
            return
        ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
        i, j = ranked[0][0], ranked[1][0]
        work = self.work_v if side == "p" else self.work_w
        point = 0.5 * (work.array[i] + work.array[j])
        expansion = 0.5 * (work.expansion(i) + work.expansion(j))
        idx = work.append(point, expansion)
        if self.cache is not None:
            self.cache.extend("v" if side == "p" else "w", point)
        if side == "p":
            self.cand_v = None
        else:
            self.cand_w = None
        # give the midpoint one priority shot at being the pivot; under
        # argmax selection it can never beat its parents otherwise
        self.forced = (side, idx)
        self.gap_window.clear()
        self.pivot_window.clear()
        self.synth_count += 1

    # -- phase one -----------------------------------------------------------

    def ta1(self, max_steps: int) -> str:
        while True:
            g = self.gap()
            if self.trace is not None:
                self.trace.append(g)
            if g <= self.eps * self._ref_dist("p") or g <= self.eps * self._ref_dist("p2"):
                return "intersect"
            if self.steps >= max_steps:
                return "maxiter"
            jv = self._scan("p")
            if jv is not None:
                jw = self._scan("p2") if self.opt.joint_steps else None
                moved = self._joint(jv, jw) if jw is not None else self._single("p", jv)
            else:
                jw = self._scan("p2")
                if jw is not None:
                    moved = self._single("p2", jw)
                else:
                    if self.cache is not None:
                        fresh = self._fresh_pivot()
                        if fresh is not None:
                            self.cache.resync()
                            if self._single(*fresh):
                                self.steps += 1
                                self._zigzag_check()
                                continue
                            return "intersect"
                    self.witness_snapshot = (self.p.copy(), self.p2.copy())
                    return "witness"
            if not moved:
                # a pivot exists but the step is numerically nil: the gap is
                # at floating-point resolution, which only happens far below
                # any sane epsilon threshold
                return "intersect"
            self.steps += 1
            self._zigzag_check()

    # -- phase two -----------------------------------------------------------

    def measure(self) -> GapEstimate:
        delta = self.gap()
        if delta == 0.0:
            raise ValueError("gap estimate undefined for coincident iterates")
        if self.cache is not None:
            c = self.cache
            pp, qq = c.pp, c.qq
            hv = c.pv - c.qv
            hw = c.pw - c.qw
        else:
            pp = float(self.p.point @ self.p.point)
            qq = float(self.p2.point @ self.p2.point)
            h = self.p.point - self.p2.point
            hv = self.work_v.array @ h
            hw = self.work_w.array @ h
        a = 0.5 * (pp - qq)
        vi = int(np.argmin(hv))
        wi = int(np.argmax(hw))
        lower = (float(hv[vi]) - float(hw[wi])) / delta
        d_v = (float(hv[vi]) - a) / delta
        d_w = (a - float(hw[wi])) / delta
        if self.cache is not None:
            c = self.cache
            rho2_sq = c.pp - 2 * float(c.pv[vi]) + float(self.work_v.sq_norms[vi])
            rho2b_sq = c.qq - 2 * float(c.qw[wi]) + float(self.work_w.sq_norms[wi])
            rho = float(np.sqrt(max(rho2_sq, 0.0)))
            rho2 = float(np.sqrt(max(rho2b_sq, 0.0)))
        else:
            rho = float(np.linalg.norm(self.p.point - self.work_v.array[vi]))
            rho2 = float(np.linalg.norm(self.p2.point - self.work_w.array[wi]))
        return GapEstimate(delta, lower, delta - lower,
                           0.5 * delta - d_v, 0.5 * delta - d_w,
                           rho, rho2, vi, wi)

    def ta2(self, max_steps: int) -> str:
        stalls = 0
        while True:
            g = self.measure()
            done = g.E <= self.eps * g.rho or g.E <= self.eps * g.rho2
            step_failed = False
            if not done:
                if self.steps >= max_steps:
                    return "maxiter"
                if g.E_v > 0.5 * self.eps * g.rho:
                    step_failed = not self._single("p", g.v_index)
                elif g.E_v2 > 0.5 * self.eps * g.rho2:
                    step_failed = not self._single("p2", g.v2_index)
                else:
                    # both shares at their bounds: E is within rounding of the
                    # stop threshold
                    done = True
            if done or step_failed:
                if self.certificate().validate(self.V, self.W):
                    return "separated"
                # the pair stopped being a witness (an inner run hit its
                # epsilon-intersection stop); try to re-establish it
                stalls += 1
                if stalls > 3 or self.steps >= max_steps:
                    return "maxiter"
                if self.ta1(max_steps) == "maxiter":
                    return "maxiter"
                continue
            self.steps += 1
            if self.trace is not None:
                self.trace.append(self.gap())
            inner = self.ta1(max_steps)
            if inner == "maxiter":
                return "maxiter"
            # inner "witness" restores the invariant; inner "intersect" is
            # revisited by the stop test at the top

    def certificate(self) -> WitnessCertificate:
        return WitnessCertificate(self.p.copy(), self.p2.copy(),
                                  bisector(self.p.point, self.p2.point))

    def sparsity(self) -> int:
        return self.p.sparsity() + self.p2.sparsity()

    def final_planes(self) -> Tuple[GapEstimate, Tuple[Hyperplane, Hyperplane]]:
        h = self.p.point - self.p2.point
        vi, wi, _ = support_extremes(h, self.V, self.W)
        g = measure_gap(self.p, self.p2, self.V, self.W)
        plane_v = Hyperplane(h, float(self.V.points[vi] @ h))
        plane_w = Hyperplane(h, float(self.W.points[wi] @ h))
        return g, (plane_v, plane_w)


def ta1_solve(V: PointSet, W: PointSet,
              p0: Optional[ConvexIterate] = None, p0_2: Optional[ConvexIterate] = None,
              epsilon: float = 1e-3, max_iters: int = 10_000,
              options: Optional[TAOptions] = None
              ) -> Tuple[SolveReport, Union[WitnessCertificate, ApproxIntersection, None]]:
    """Phase one: decide approximate intersection or produce a witness pair.

    Iterates start at the centroids unless given.  Returns the solve report
    plus an ApproxIntersection (status intersecting), a WitnessCertificate
    (status separated), or None when the iteration budget ran out.
    """
    eng = _Engine(V, W, p0, p0_2, epsilon, options)
    t0 = time.perf_counter()
    outcome = eng.ta1(max_iters)
    elapsed = time.perf_counter() - t0
    return _ta1_report(eng, outcome, elapsed)


def _ta1_report(eng: _Engine, outcome: str, elapsed: float):
    g = eng.gap()
    if outcome == "witness":
        est, planes = eng.final_planes()
        report = SolveReport(Status.SEPARATED, eng.steps, elapsed,
                             distance_upper=g, distance_lower=est.delta_lower,
                             sparsity=eng.sparsity(), support_planes=planes,
                             trace=eng.trace)
        return report, eng.certificate()
    if outcome == "intersect":
        report = SolveReport(Status.INTERSECTING, eng.steps, elapsed,
                             distance_upper=g, distance_lower=0.0,
                             sparsity=eng.sparsity(), trace=eng.trace)
        return report, ApproxIntersection(eng.p.copy(), eng.p2.copy(), g)
    report = SolveReport(Status.MAX_ITERATIONS, eng.steps, elapsed,
                         distance_upper=g, distance_lower=0.0,
                         sparsity=eng.sparsity(), trace=eng.trace)
    return report, None


def ta2_solve(witness: WitnessCertificate, V: PointSet, W: PointSet,
              epsilon: float = 1e-3, max_iters: int = 10_000,
              options: Optional[TAOptions] = None
              ) -> Tuple[SolveReport, WitnessCertificate]:
    """Phase two: refine a witness pair to a strong epsilon-approximation of
    the hull distance with its pair of supporting hyperplanes."""
    if not witness.validate(V, W):
        raise NotAWitnessError("input pair is not a witness pair for these sets")
    eng = _Engine(V, W, witness.p, witness.p2, epsilon, options)
    eng.witness_snapshot = (eng.p.copy(), eng.p2.copy())
    t0 = time.perf_counter()
    outcome = eng.ta2(max_iters)
    elapsed = time.perf_counter() - t0
    return _ta2_report(eng, outcome, elapsed)


def _ta2_report(eng: _Engine, outcome: str, elapsed: float):
    est, planes = eng.final_planes()
    status = Status.SEPARATED if outcome == "separated" else Status.MAX_ITERATIONS
    report = SolveReport(status, eng.steps, elapsed,
                         distance_upper=est.delta, distance_lower=est.delta_lower,
                         sparsity=eng.sparsity(), support_planes=planes,
                         trace=eng.trace)
    cert = eng.certificate()
    if not cert.validate(eng.V, eng.W) and eng.witness_snapshot is not None:
        # only reachable on max-iteration exits: fall back to the last pair
        # of iterates that did certify separation
        ps, qs = eng.witness_snapshot
        cert = WitnessCertificate(ps.copy(), qs.copy(), bisector(ps.point, qs.point))
    return report, cert


def solve_distance(V: PointSet, W: PointSet, epsilon: float = 1e-3,
                   max_iters: int = 10_000, options: Optional[TAOptions] = None
                   ) -> Tuple[SolveReport, Union[WitnessCertificate, ApproxIntersection, None]]:
    """Run phase one and, if the hulls are separated, phase two on the same
    solver state.  One report covering both phases."""
    eng = _Engine(V, W, epsilon=epsilon, options=options)
    t0 = time.perf_counter()
    outcome = eng.ta1(max_iters)
    if outcome != "witness":
        return _ta1_report(eng, outcome, time.perf_counter() - t0)
    outcome = eng.ta2(max_iters)
    return _ta2_report(eng, outcome, time.perf_counter() - t0)
