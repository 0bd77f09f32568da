"""Sequential minimal optimization for the maximum-margin separator dual.

Works on the standard two-variable subproblem: pick a pair of multipliers,
solve their box-and-line constrained maximization in closed form, update the
threshold and the incrementally maintained error cache, repeat under the
usual outer loop that alternates full sweeps with sweeps over the non-bound
set.  C may be any positive value or infinity; the infinite-C (hard margin)
problem has an unbounded dual on overlapping hulls and the solver then exits
at the iteration cap rather than converging.
"""

from __future__ import annotations

import math
import time
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .geometry import Hyperplane
from .pointset import PointSet
from .report import SolveReport, Status

STEP_EPS = 1e-12        # minimum relative multiplier movement to accept
ETA_TOL = 1e-12         # curvature threshold: eta >= -ETA_TOL rejects the pair
SPARSITY_REL = 1e-8     # alpha > SPARSITY_REL * max(alpha) counts as nonzero


class LabeledProblem:
    """Merged training points with +/-1 labels and a box constant C.

    Gram rows (dot products of one point against all points) are computed
    lazily and kept in an LRU map capped at ``gram_budget`` rows.
    """

    def __init__(self, points: PointSet, labels, C: float = math.inf, gram_budget: int = 512):
        y = np.asarray(labels, dtype=np.float64)
        if y.shape != (points.n,):
            raise ValueError("labels length must match the point count")
        if not np.all(np.abs(y) == 1.0):
            raise ValueError("labels must be -1 or +1")
        if not (np.any(y < 0) and np.any(y > 0)):
            raise ValueError("both classes must be present")
        if not C > 0:
            raise ValueError("C must be positive (infinity allowed)")
        self.points = points
        self.labels = y
        self.C = float(C)
        self.gram_budget = gram_budget
        self._rows: "OrderedDict[int, np.ndarray]" = OrderedDict()

    @classmethod
    def from_two_sets(cls, V: PointSet, W: PointSet, C: float = math.inf,
                      gram_budget: int = 512) -> "LabeledProblem":
        """Label the first set -1 and the second +1."""
        if V.dim != W.dim:
            raise ValueError("point sets must share a dimension")
        pts = PointSet(np.vstack([V.points, W.points]))
        labels = np.concatenate([np.full(V.n, -1.0), np.full(W.n, 1.0)])
        return cls(pts, labels, C, gram_budget)

    @property
    def n(self) -> int:
        return self.points.n

    def gram_row(self, i: int) -> np.ndarray:
        row = self._rows.get(i)
        if row is not None:
            self._rows.move_to_end(i)
            return row
        row = self.points.points @ self.points.points[i]
        self._rows[i] = row
        if len(self._rows) > self.gram_budget:
            self._rows.popitem(last=False)
        return row


@dataclass
class DualState:
    alphas: np.ndarray
    b: float
    error_cache: np.ndarray     # E_k = f(x_k) - y_k under the running b
    objective: float            # W(alpha) as of the last refresh
    rng: np.random.Generator

    @classmethod
    def initial(cls, problem: LabeledProblem, seed: int = 0) -> "DualState":
        return cls(
            alphas=np.zeros(problem.n),
            b=0.0,
            error_cache=-problem.labels.copy(),
            objective=0.0,
            rng=np.random.default_rng(seed),
        )

    def non_bound(self, C: float) -> np.ndarray:
        return np.nonzero((self.alphas > 0.0) & (self.alphas < C))[0]


@dataclass
class SvmSolution:
    w: np.ndarray
    b: float
    alphas: np.ndarray
    report: SolveReport
    state: DualState


def compute_bounds(alpha_i: float, alpha_j: float, y_i: float, y_j: float,
                   C: float):
    """Feasible range [L, H] for the second multiplier of a working pair."""
    if y_i != y_j:
        return max(0.0, alpha_j - alpha_i), min(C, C + alpha_j - alpha_i)
    return max(0.0, alpha_j + alpha_i - C), min(C, alpha_j + alpha_i)


def take_step(state: DualState, i1: int, i2: int, problem: LabeledProblem) -> bool:
    """Jointly reoptimize the pair (alpha_i1, alpha_i2).

    Returns True when the multipliers moved; rejected when the box collapses
    (L = H), the pair has degenerate curvature, or the clipped update is
    negligible.  On acceptance the threshold and the whole error cache are
    updated in place.
    """
    if i1 == i2:
        return False
    y1 = problem.labels[i1]
    y2 = problem.labels[i2]
    a1 = float(state.alphas[i1])
    a2 = float(state.alphas[i2])
    E1 = float(state.error_cache[i1])
    E2 = float(state.error_cache[i2])
    C = problem.C

    L, H = compute_bounds(a1, a2, y1, y2, C)
    if not L < H:
        return False

    row1 = problem.gram_row(i1)
    row2 = problem.gram_row(i2)
    k11 = float(row1[i1])
    k12 = float(row1[i2])
    k22 = float(row2[i2])
    eta = 2.0 * k12 - k11 - k22
    if eta >= -ETA_TOL:
        return False

    a2_new = a2 - y2 * (E1 - E2) / eta
    a2_new = min(H, max(L, a2_new))
    if abs(a2_new - a2) < STEP_EPS * (a2_new + a2 + STEP_EPS):
        return False
    a1_new = a1 + y1 * y2 * (a2 - a2_new)

    d1 = a1_new - a1
    d2 = a2_new - a2
    b1 = state.b - E1 - y1 * d1 * k11 - y2 * d2 * k12
    b2 = state.b - E2 - y1 * d1 * k12 - y2 * d2 * k22
    if 0.0 < a1_new < C:
        b_new = b1
    elif 0.0 < a2_new < C:
        b_new = b2
    else:
        b_new = 0.5 * (b1 + b2)

    state.alphas[i1] = a1_new
    state.alphas[i2] = a2_new
    state.error_cache += y1 * d1 * row1 + y2 * d2 * row2 + (b_new - state.b)
    state.b = b_new
    return True


def examine_example(state: DualState, i2: int, problem: LabeledProblem,
                    tol: float = 1e-3) -> int:
    """KKT-screen one example and hunt for a partner to step with.

    Partner order: the non-bound index with the largest error difference,
    then the non-bound set from a random start, then all indices from a
    random start.  Returns 1 on the first accepted step, else 0.
    """
    y2 = problem.labels[i2]
    a2 = float(state.alphas[i2])
    E2 = float(state.error_cache[i2])
    r2 = E2 * y2
    C = problem.C
    if not ((r2 < -tol and a2 < C) or (r2 > tol and a2 > 0.0)):
        return 0

    nb = state.non_bound(C)
    if nb.size > 1:
        diffs = np.abs(state.error_cache[nb] - E2)
        i1 = int(nb[np.argmax(diffs)])
        if i1 != i2 and take_step(state, i1, i2, problem):
            return 1
    if nb.size:
        start = int(state.rng.integers(nb.size))
        for k in range(nb.size):
            i1 = int(nb[(start + k) % nb.size])
            if i1 != i2 and take_step(state, i1, i2, problem):
                return 1
    n = problem.n
    start = int(state.rng.integers(n))
    for k in range(n):
        i1 = (start + k) % n
        if i1 != i2 and take_step(state, i1, i2, problem):
            return 1
    return 0


def dual_objective(state: DualState, problem: LabeledProblem) -> float:
    """W(alpha) by the explicit double sum over nonzero multipliers."""
    idx = np.nonzero(state.alphas)[0]
    if idx.size == 0:
        return 0.0
    X = problem.points.points[idx]
    coef = state.alphas[idx] * problem.labels[idx]
    return float(state.alphas[idx].sum() - 0.5 * coef @ (X @ X.T) @ coef)


def kkt_violations(state: DualState, problem: LabeledProblem,
                   tol: float = 1e-3) -> list:
    """Indices breaking the three-case optimality conditions beyond tol."""
    y = problem.labels
    margin = y * (state.error_cache + y)
    a = state.alphas
    C = problem.C
    at_zero = a == 0.0
    at_c = a == C
    interior = ~(at_zero | at_c)
    bad = (at_zero & (margin < 1.0 - tol)) \
        | (at_c & (margin > 1.0 + tol)) \
        | (interior & (np.abs(margin - 1.0) > tol))
    return list(np.nonzero(bad)[0])


def _recover(state: DualState, problem: LabeledProblem):
    w = (state.alphas * problem.labels) @ problem.points.points
    proj = problem.points.points @ w
    neg = problem.labels < 0
    b_star = -0.5 * (float(proj[neg].max()) + float(proj[~neg].min()))
    return w, b_star


def smo_solve(problem: LabeledProblem, tol: float = 1e-3, max_iters: int = 10_000,
              seed: int = 0, track_objective: bool = False) -> SvmSolution:
    """Run the main loop to convergence or the sweep cap.

    ``max_iters`` bounds outer sweeps; the reported iteration count is the
    number of accepted pair steps.  The returned w comes from the multiplier
    expansion and b from the two-sided extreme-projection recovery.
    """
    state = DualState.initial(problem, seed)
    trace = [0.0] if track_objective else None
    n = problem.n

    t0 = time.perf_counter()
    num_changed = 0
    examine_all = True
    sweeps = 0
    accepted = 0
    while (num_changed > 0 or examine_all) and sweeps < max_iters:
        num_changed = 0
        indices = range(n) if examine_all else state.non_bound(problem.C)
        for i in indices:
            took = examine_example(state, int(i), problem, tol)
            if took and trace is not None:
                trace.append(dual_objective(state, problem))
            num_changed += took
        accepted += num_changed
        if examine_all:
            examine_all = False
        elif num_changed == 0:
            examine_all = True
        sweeps += 1
    elapsed = time.perf_counter() - t0
    converged = num_changed == 0 and not examine_all

    w, b_star = _recover(state, problem)
    state.objective = dual_objective(state, problem)

    X = problem.points.points
    y = problem.labels
    neg = y < 0
    wn = float(np.linalg.norm(w))
    if wn > 0.0:
        proj = X @ w
        gap_along_w = (-float(proj[neg].max()) + float(proj[~neg].min())) / wn
    else:
        gap_along_w = 0.0

    # alpha-weighted class centroids are hull points, so their distance is a
    # valid upper bound on the hull distance
    s_neg = float(state.alphas[neg].sum())
    s_pos = float(state.alphas[~neg].sum())
    if s_neg > 0.0 and s_pos > 0.0:
        c_neg = (state.alphas[neg] @ X[neg]) / s_neg
        c_pos = (state.alphas[~neg] @ X[~neg]) / s_pos
        upper = float(np.linalg.norm(c_neg - c_pos))
    else:
        upper = math.inf

    if not converged:
        status = Status.MAX_ITERATIONS
    elif gap_along_w > 0.0:
        status = Status.SEPARATED
    else:
        status = Status.INTERSECTING

    a_max = float(state.alphas.max())
    sparsity = int(np.count_nonzero(state.alphas > SPARSITY_REL * a_max)) if a_max > 0 else 0

    planes = None
    if wn > 0.0:
        planes = (Hyperplane(w, -1.0 - b_star), Hyperplane(w, 1.0 - b_star))
    report = SolveReport(status, accepted, elapsed,
                         distance_upper=upper, distance_lower=gap_along_w,
                         sparsity=sparsity, support_planes=planes, trace=trace)
    return SvmSolution(w=w, b=b_star, alphas=state.alphas.copy(),
                       report=report, state=state)
