"""Point-set containers, convex-combination iterates, and instance generation.

A PointSet is an immutable (n, m) float64 array of n points in dimension m.
ConvexIterate tracks a point of the hull explicitly as a convex combination
of the set's vertices, so solvers can report sparsity and certificates can
be re-synthesized.  Synthetic two-ball instances are produced by a seeded,
portable generator (numpy PCG64) so every experiment is reproducible from
its seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COEFF_SNAP = 1e-15  # coefficients below this are snapped to exact zero


class CsvFormatError(ValueError):
    pass


class PointSet:
    """Immutable set of n points in R^m with lazily cached squared norms."""

    def __init__(self, points):
        arr = np.array(points, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("a point set needs at least one point of dimension >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("point coordinates must be finite")
        arr.setflags(write=False)
        self._points = arr
        self._sq_norms = None

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    @property
    def squared_norms(self) -> np.ndarray:
        if self._sq_norms is None:
            sq = np.einsum("ij,ij->i", self._points, self._points)
            sq.setflags(write=False)
            self._sq_norms = sq
        return self._sq_norms

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"PointSet(n={self.n}, dim={self.dim})"


class ConvexIterate:
    """A hull point stored as coefficients over its parent PointSet.

    Mutating steps keep the explicit point and the coefficient vector in
    lock-step; ``version`` increments on every mutation so caches keyed to
    the iterate can detect external modification.
    """

    def __init__(self, parent: PointSet, coefficients, point=None):
        self.parent = parent
        lam = np.array(coefficients, dtype=np.float64)
        if lam.shape != (parent.n,):
            raise ValueError("coefficient vector length must match the point set")
        if np.any(lam < -1e-12) or abs(lam.sum() - 1.0) > 1e-9:
            raise ValueError("coefficients must be a convex combination")
        lam[lam < COEFF_SNAP] = 0.0
        self.coefficients = lam
        self.point = np.asarray(point, dtype=np.float64).copy() if point is not None \
            else lam @ parent.points
        self.version = 0

    @classmethod
    def centroid(cls, parent: PointSet) -> "ConvexIterate":
        return cls(parent, np.full(parent.n, 1.0 / parent.n))

    @classmethod
    def at_vertex(cls, parent: PointSet, index: int) -> "ConvexIterate":
        lam = np.zeros(parent.n)
        lam[index] = 1.0
        return cls(parent, lam)

    def copy(self) -> "ConvexIterate":
        out = ConvexIterate.__new__(ConvexIterate)
        out.parent = self.parent
        out.coefficients = self.coefficients.copy()
        out.point = self.point.copy()
        out.version = self.version
        return out

    def step_toward(self, vertex_point, alpha: float, index=None, expansion=None):
        """Move to (1-alpha)*self + alpha*vertex.

        ``index`` names an original vertex; ``expansion`` gives the vertex as
        a coefficient vector over the original set (used for synthetic
        vertices) so the iterate always stays expressed over the originals.
        """
        a = float(alpha)
        self.coefficients *= 1.0 - a
        if expansion is not None:
            self.coefficients += a * expansion
        else:
            self.coefficients[index] += a
        self.coefficients[self.coefficients < COEFF_SNAP] = 0.0
        total = self.coefficients.sum()
        if abs(total - 1.0) > 1e-12 and total > 0.0:
            self.coefficients /= total
        self.point = (1.0 - a) * self.point + a * np.asarray(vertex_point, dtype=np.float64)
        self.version += 1

    def resynthesis_error(self) -> float:
        return float(np.linalg.norm(self.point - self.coefficients @ self.parent.points))

    def sparsity(self) -> int:
        return int(np.count_nonzero(self.coefficients))


@dataclass(frozen=True)
class InstanceSpec:
    """Parameters of a synthetic two-ball instance."""

    dim: int
    na: int
    nb: int
    factor: float
    seed: int

    def __post_init__(self):
        if self.dim < 1 or self.na < 1 or self.nb < 1:
            raise ValueError("dimension and point counts must be positive")
        if self.factor < 0:
            raise ValueError("translation factor must be nonnegative")


def diameter(S: PointSet) -> float:
    """Exact maximum pairwise distance, computed by the full O(n^2) scan."""
    pts = S.points
    n = S.n
    if n == 1:
        return 0.0
    sq = S.squared_norms
    best = 0.0
    block = max(1, int(2**22 // max(n, 1)))
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        cross = pts[lo:hi] @ pts.T
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * cross
        m = float(d2.max())
        if m > best:
            best = m
    return float(np.sqrt(max(best, 0.0)))


def sample_unit_ball(rng: np.random.Generator, n: int, dim: int, center=None) -> np.ndarray:
    """n points uniform in the unit ball: normalized Gaussian directions
    scaled by U^(1/dim) radii."""
    dirs = rng.normal(size=(n, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.random(n) ** (1.0 / dim)
    pts = dirs * radii[:, None]
    if center is not None:
        pts += np.asarray(center, dtype=np.float64)
    return pts


def generate_two_balls(spec: InstanceSpec):
    """Two point sets sampled from unit balls around one random mean, the
    second translated along a random unit direction by
    factor * max(diam(V), diam(V')).

    Draw order is fixed (mean, first ball, second ball, direction) so the
    output is bit-identical for a given seed.
    """
    rng = np.random.default_rng(spec.seed)
    mean = rng.normal(size=spec.dim)
    a = sample_unit_ball(rng, spec.na, spec.dim, mean)
    b = sample_unit_ball(rng, spec.nb, spec.dim, mean)
    direction = rng.normal(size=spec.dim)
    direction /= np.linalg.norm(direction)
    V = PointSet(a)
    shift = spec.factor * max(diameter(V), diameter(PointSet(b)))
    b += shift * direction
    return V, PointSet(b)


def save_csv(S: PointSet, path):
    """One point per row, comma-separated, 17 significant digits."""
    with open(path, "w", encoding="ascii") as fh:
        for row in S.points:
            fh.write(",".join("%.17g" % x for x in row))
            fh.write("\n")


def load_csv(path) -> PointSet:
    """Read a point set written by save_csv.

    An optional single leading row starting with '#' is skipped.  Ragged or
    non-numeric rows raise CsvFormatError naming the offending row.
    """
    rows = []
    width = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#") and lineno == 1:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise CsvFormatError(f"row {lineno}: expected {width} columns, got {len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise CsvFormatError(f"row {lineno}: non-numeric cell") from None
    if not rows:
        raise CsvFormatError(f"{path}: no points")
    return PointSet(np.array(rows))
