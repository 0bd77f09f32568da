"""Solve outcome containers shared by the triangle and SMO solvers."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .geometry import Hyperplane


class Status(enum.Enum):
    INTERSECTING = "intersecting"
    SEPARATED = "separated"
    MAX_ITERATIONS = "max-iterations"

    def __str__(self) -> str:
        return self.value


@dataclass
class SolveReport:
    status: Status
    iterations: int
    wall_time: float
    distance_upper: float
    distance_lower: float
    sparsity: int
    support_planes: Optional[Tuple[Hyperplane, Hyperplane]] = None
    # Per-step gap / objective values, populated only on instrumented runs.
    trace: Optional[list] = field(default=None, repr=False)
