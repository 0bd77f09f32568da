"""Independent ground-truth computations and certificate checkers.

Everything here stands alone: the exact hull projection is a small
active-set (minimum-norm point) iteration written in this module, grid
enumeration shares nothing with the solvers beyond array arithmetic, and no
external QP/LP machinery is involved.  Tests and acceptance criteria compare
solver output against these routines.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from math import comb
from typing import Optional, Tuple

import numpy as np

from .geometry import Hyperplane
from .pointset import ConvexIterate, PointSet, diameter

GRID_DEFAULT_RESOLUTION = 64
GRID_MAX_POINTS = 2_000_000  # per-side cap on enumerated grid nodes
GRID_MAX_SIZES = (8, 4)  # (max points per set, max dimension)


class GridTooLargeError(ValueError):
    pass


class OracleMethod(enum.Enum):
    GRID_ENUM = "grid-enum"
    ALTERNATING_PROJECTION = "alternating-projection"


@dataclass
class OracleResult:
    delta_star: float
    p: ConvexIterate
    p2: ConvexIterate
    method: OracleMethod
    error_bound: float


def project_onto_hull(z, S: PointSet, tol: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
    """Exact nearest point to ``z`` in conv(S).

    Minimum-norm-point iteration over the shifted vertices: grow a support
    set by linear minimization, solve the affine least-norm system on the
    support, and walk back dropping vertices whose coefficient would turn
    negative.  Returns (point, coefficients).
    """
    z = np.asarray(z, dtype=np.float64)
    U = S.points - z
    n = S.n
    sq = np.einsum("ij,ij->i", U, U)
    scale = max(1.0, float(sq.max()))

    support = [int(np.argmin(sq))]
    weights = np.array([1.0])
    x = U[support[0]].copy()

    for _ in range(16 * n + 256):
        xx = float(x @ x)
        dots = U @ x
        j = int(np.argmin(dots))
        if xx - float(dots[j]) <= tol * scale:
            break
        if j in support:
            break  # numerically stalled; x is optimal to working precision
        support.append(j)
        weights = np.append(weights, 0.0)
        for _minor in range(4 * n + 64):
            k = len(support)
            G = U[support] @ U[support].T
            A = np.zeros((k + 1, k + 1))
            A[:k, :k] = G
            A[:k, k] = 1.0
            A[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            try:
                beta = np.linalg.solve(A, rhs)[:k]
            except np.linalg.LinAlgError:
                beta = np.linalg.lstsq(A, rhs, rcond=None)[0][:k]
            if np.all(beta > 1e-14):
                weights = beta
                break
            # step from weights toward beta until the first coefficient hits 0
            neg = beta <= 1e-14
            denom = weights[neg] - beta[neg]
            denom[denom <= 0.0] = np.inf
            theta = float(np.min(weights[neg] / denom))
            weights = weights + theta * (beta - weights)
            weights[weights < 1e-12] = 0.0
            keep = weights > 0.0
            if keep.all():
                # walk made no progress; treat the current support as final
                weights /= weights.sum()
                break
            support = [s for s, k_ in zip(support, keep) if k_]
            weights = weights[keep]
            weights /= weights.sum()
        x = weights @ U[support]

    lam = np.zeros(n)
    lam[support] = weights
    lam[lam < 0.0] = 0.0
    lam /= lam.sum()
    return z + x, lam


def _support_gap(h: np.ndarray, V: PointSet, W: PointSet) -> float:
    # gap between the supporting hyperplanes orthogonal to h; a valid lower
    # bound on d(conv(V), conv(W)) whenever it is positive
    hn = float(np.linalg.norm(h))
    return (float(np.min(V.points @ h)) - float(np.max(W.points @ h))) / hn


def _alternating_projection(V: PointSet, W: PointSet, stall: float = 1e-10,
                            max_rounds: int = 100_000) -> OracleResult:
    q = W.points.mean(axis=0)
    mu = np.full(W.n, 1.0 / W.n)
    prev = np.inf
    p, lam = project_onto_hull(q, V)
    for _ in range(max_rounds):
        q, mu = project_onto_hull(p, W)
        p, lam = project_onto_hull(q, V)
        d = float(np.linalg.norm(p - q))
        if prev - d < stall:
            break
        prev = d
    d = float(np.linalg.norm(p - q))
    if d > 0.0:
        lower = max(_support_gap(p - q, V, W), 0.0)
        err = max(d - lower, 0.0)
    else:
        err = 0.0
    return OracleResult(d, ConvexIterate(V, lam, p), ConvexIterate(W, mu, q),
                        OracleMethod.ALTERNATING_PROJECTION, err)


def _simplex_grid(n: int, resolution: int) -> np.ndarray:
    """All coefficient vectors with entries k/resolution summing to 1."""
    count = comb(resolution + n - 1, n - 1)
    if count > GRID_MAX_POINTS:
        raise GridTooLargeError(
            f"simplex grid would need {count} nodes (cap {GRID_MAX_POINTS})")
    out = np.empty((count, n))
    r = resolution
    for i, cuts in enumerate(itertools.combinations(range(r + n - 1), n - 1)):
        prev = -1
        for j, c in enumerate(cuts):
            out[i, j] = c - prev - 1
            prev = c
        out[i, n - 1] = r + n - 2 - prev
    out /= r
    return out


def _grid_enum(V: PointSet, W: PointSet, resolution: int) -> OracleResult:
    if V.n > GRID_MAX_SIZES[0] or W.n > GRID_MAX_SIZES[0] or V.dim > GRID_MAX_SIZES[1]:
        raise GridTooLargeError(
            f"grid enumeration limited to n <= {GRID_MAX_SIZES[0]}, dim <= {GRID_MAX_SIZES[1]}")
    grid_a = _simplex_grid(V.n, resolution)
    grid_b = _simplex_grid(W.n, resolution)
    if grid_a.shape[0] * grid_b.shape[0] > 5 * GRID_MAX_POINTS:
        raise GridTooLargeError(
            f"grid pair count {grid_a.shape[0] * grid_b.shape[0]} exceeds the enumeration cap")
    pa = grid_a @ V.points
    pb = grid_b @ W.points
    sqa = np.einsum("ij,ij->i", pa, pa)
    sqb = np.einsum("ij,ij->i", pb, pb)
    best = np.inf
    best_idx = (0, 0)
    block = max(1, int(2**22 // max(pb.shape[0], 1)))
    for lo in range(0, pa.shape[0], block):
        hi = min(pa.shape[0], lo + block)
        d2 = sqa[lo:hi, None] + sqb[None, :] - 2.0 * (pa[lo:hi] @ pb.T)
        k = int(np.argmin(d2))
        i, j = divmod(k, pb.shape[0])
        if d2[i, j] < best:
            best = float(d2[i, j])
            best_idx = (lo + i, j)
    i, j = best_idx
    delta = float(np.sqrt(max(best, 0.0)))
    err = ((V.n - 1) * diameter(V) + (W.n - 1) * diameter(W)) / resolution
    return OracleResult(delta, ConvexIterate(V, grid_a[i]), ConvexIterate(W, grid_b[j]),
                        OracleMethod.GRID_ENUM, err)


def brute_force_distance(V: PointSet, W: PointSet,
                         resolution: int = GRID_DEFAULT_RESOLUTION,
                         method: Optional[OracleMethod] = None) -> OracleResult:
    """Ground-truth hull distance.

    Grid enumeration is exhaustive over both coefficient simplices and only
    feasible for tiny inputs; the alternating exact-projection path works at
    any size and is iterated to a 1e-10 stall with a supporting-gap error
    bound attached.  With ``method=None`` the grid is used when it fits and
    the projection path otherwise.
    """
    if V.dim != W.dim:
        raise ValueError("point sets must share a dimension")
    if method is OracleMethod.GRID_ENUM:
        return _grid_enum(V, W, resolution)
    if method is OracleMethod.ALTERNATING_PROJECTION:
        return _alternating_projection(V, W)
    try:
        return _grid_enum(V, W, resolution)
    except GridTooLargeError:
        return _alternating_projection(V, W)


def check_separation(h: Hyperplane, V: PointSet, W: PointSet, tol: float = 1e-9) -> bool:
    """True iff the hyperplane puts all of V strictly on one side and all of
    W strictly on the other, with slack tol * max vertex norm."""
    hn = float(np.linalg.norm(h.normal))
    if hn == 0.0:
        return False
    scale = max(float(np.max(np.abs(V.points))), float(np.max(np.abs(W.points))), 1.0)
    margin_v = (V.points @ h.normal - h.offset) / hn
    margin_w = (W.points @ h.normal - h.offset) / hn
    cut = -tol * scale
    one_way = float(margin_v.min()) > cut and float((-margin_w).min()) > cut
    other_way = float((-margin_v).min()) > cut and float(margin_w.min()) > cut
    return one_way or other_way


def reported_distance(w, b: float, V: PointSet, W: PointSet) -> float:
    """Separation gap along direction w between the two sets.

    d = (1/|w|) * (-max{w.v + b : v in V} + min{w.v' + b : v' in W}); scale
    invariant in w, independent of b, negative when w fails to separate
    (interpretable as the overlap depth along w).
    """
    w = np.asarray(w, dtype=np.float64)
    wn = float(np.linalg.norm(w))
    if wn == 0.0:
        raise ValueError("reported distance needs a nonzero direction")
    return (-float(np.max(V.points @ w + b)) + float(np.min(W.points @ w + b))) / wn
