"""Nested dyadic partitions of R^d and their quantizers.

Level ``l`` tiles the half-open cube ``[-2**l, 2**l)**d`` with cubes of side
``2**-l``; everything else falls into a single outside cell with id 0.  Cell
boundaries at level ``l + 1`` are aligned with those at level ``l``, so the
family is nested, every level is finite, and cells meeting a bounded set
shrink to diameter ``2**-l * sqrt(d)``.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SATURATION_LEVEL",
    "NestedPartition",
    "DyadicPartition",
    "PartitionError",
    "cell_id",
    "quantize_sequence",
    "check_partition_family",
]

# Every finite double is a multiple of 2**-1074 and below 2**1024 in
# magnitude, so from this level on distinct doubles never share a dyadic cell.
SATURATION_LEVEL = 1074


class PartitionError(ValueError):
    """Raised for malformed points or a family that fails validation."""


def _as_point(x, dimension: int) -> tuple[float, ...]:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape[0] != dimension:
        raise PartitionError(f"expected a point of dimension {dimension}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise PartitionError(f"non-finite coordinate in {arr.tolist()}")
    return tuple(float(v) for v in arr)


class NestedPartition:
    """Interface for a nested sequence of finite partitions ``P_1, P_2, ...``.

    Subclasses implement :meth:`cell_id` and :meth:`n_cells` and set
    ``saturation_level``: the level from which the partition separates exactly
    the distinct points it will ever see.  Experts at levels beyond it are
    indistinguishable from the expert at that level.
    """

    dimension: int
    saturation_level: int = SATURATION_LEVEL

    def cell_id(self, level: int, x) -> int:
        raise NotImplementedError

    def n_cells(self, level: int) -> int:
        raise NotImplementedError

    def cell_ids(self, x, max_level: int) -> list[int]:
        """Cell ids of ``x`` at levels ``1..max_level``."""
        return [self.cell_id(level, x) for level in range(1, max_level + 1)]

    def agreement(self, x, other, lower: int = 0) -> int:
        """Largest level at which ``x`` and ``other`` share a cell.

        Returns 0 if they are separated already at level 1 and
        ``saturation_level`` if they are never separated.  ``lower`` is a level
        known to be shared (0 if nothing is known); nestedness makes the set
        of shared levels an initial segment, so bisection is exact.
        """
        return self.point_agreement(_as_point(x, self.dimension), _as_point(other, self.dimension), lower)

    def point_agreement(self, p: tuple[float, ...], q: tuple[float, ...], lower: int = 0) -> int:
        """:meth:`agreement` for points already validated as float tuples."""
        if p == q:
            return self.saturation_level
        lo, hi = lower, self.saturation_level
        # invariant: level lo shared (or lo == 0), level hi not shared
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.cell_id(mid, p) == self.cell_id(mid, q):
                lo = mid
            else:
                hi = mid
        return lo


class DyadicPartition(NestedPartition):
    """Dyadic cubes of side ``2**-level`` on ``[-2**level, 2**level)**d``."""

    def __init__(self, dimension: int = 1):
        if dimension < 1:
            raise PartitionError("dimension must be >= 1")
        self.dimension = int(dimension)

    def __repr__(self) -> str:
        return f"DyadicPartition(dimension={self.dimension})"

    def n_cells(self, level: int) -> int:
        _check_level(level)
        return (2 ** (2 * level + 1)) ** self.dimension + 1

    def cell_diameter(self, level: int) -> float:
        """Diameter of every bounded cell at ``level``."""
        _check_level(level)
        return math.ldexp(math.sqrt(self.dimension), -level)

    def cell_id(self, level: int, x) -> int:
        _check_level(level)
        return self._cell(_as_point(x, self.dimension), level)

    def _cell(self, point: tuple[float, ...], level: int) -> int:
        half = 1 << (2 * level)  # cells per half-axis
        index = 0
        for v in point:
            j = _floor_scaled(v, level)
            if j < -half or j >= half:
                return 0
            index = index * (2 * half) + (j + half)
        return index + 1

    def point_agreement(self, p: tuple[float, ...], q: tuple[float, ...], lower: int = 0) -> int:
        if p == q:
            return self.saturation_level
        lo, hi = lower, self.saturation_level
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self._cell(p, mid) == self._cell(q, mid):
                lo = mid
            else:
                hi = mid
        return lo

    def cell_ids(self, x, max_level: int) -> list[int]:
        point = _as_point(x, self.dimension)
        if max_level <= 60 and all(abs(v) < 2.0 ** (61 - max_level) for v in point):
            # power-of-two scaling is exact and the floors fit in int64
            levels = np.arange(1, max_level + 1)
            scaled = np.floor(np.ldexp(np.asarray(point)[None, :], levels[:, None])).astype(np.int64)
            out = []
            for level, row in zip(levels.tolist(), scaled.tolist()):
                half = 1 << (2 * level)
                index = 0
                for j in row:
                    if j < -half or j >= half:
                        index = -1
                        break
                    index = index * (2 * half) + (j + half)
                out.append(index + 1)
            return out
        return [self._cell(point, level) for level in range(1, max_level + 1)]


def _check_level(level: int) -> None:
    if level < 1:
        raise PartitionError(f"resolution level must be >= 1, got {level}")


def _floor_scaled(v: float, level: int) -> int:
    """Exact ``floor(v * 2**level)``."""
    num, den = v.as_integer_ratio()
    return (num << level) // den


def cell_id(family: NestedPartition, level: int, x) -> int:
    """Quantizer ``G_level(x)``: index of the cell of ``family`` containing ``x``."""
    return family.cell_id(level, x)


def quantize_sequence(family: NestedPartition, level: int, xs: Iterable) -> list[int]:
    """Elementwise :func:`cell_id`, order preserved."""
    return [family.cell_id(level, x) for x in xs]


def check_partition_family(
    family: NestedPartition,
    levels: Sequence[int] = (1, 2, 3, 4),
    n_points: int = 2000,
    scale: float = 4.0,
    seed: int = 0,
) -> None:
    """Sample-based validation of a user-supplied family.

    Checks that ids are in range, that each point gets exactly one id
    (determinism), and that the level ``l + 1`` cell determines the level
    ``l`` cell.  Raises :class:`PartitionError` on the first violation.
    """
    rng = np.random.default_rng(seed)
    points = rng.normal(scale=scale, size=(n_points, family.dimension))
    # include points that sit exactly on dyadic boundaries
    points[: n_points // 4] = np.round(points[: n_points // 4] * 4) / 4
    for level in levels:
        limit = family.n_cells(level)
        refine: dict[int, int] = {}
        for p in points:
            fine = family.cell_id(level + 1, p)
            coarse = family.cell_id(level, p)
            if not 0 <= coarse < limit:
                raise PartitionError(f"cell id {coarse} out of range at level {level}")
            if family.cell_id(level, p) != coarse:
                raise PartitionError("cell_id is not deterministic")
            if refine.setdefault(fine, coarse) != coarse:
                raise PartitionError(f"level {level + 1} cell {fine} straddles two level-{level} cells")
