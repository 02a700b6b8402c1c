"""Regular lattice over coefficient space.

The density of the random coefficients is represented by one value per
cell of an axis-aligned box split into ``k`` cells along each axis. Cells
are half-open ``[lo + i h, lo + (i + 1) h)`` except the last cell on each
axis, which also owns the upper boundary, so every point of the box has
exactly one owner.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

DEFAULT_RANGE = (-5.0, 5.0)


@dataclass(frozen=True)
class Grid:
    """Axis-aligned lattice of ``points_per_axis ** dim`` cells.

    Parameters
    ----------
    dim : int
        Dimension of coefficient space (2 or 3).
    points_per_axis : int
        Number of cells along every axis.
    ranges : tuple of (float, float)
        Closed interval covered by each axis.
    """

    dim: int
    points_per_axis: int
    ranges: tuple

    def __post_init__(self):
        object.__setattr__(self, "ranges", tuple(
            (float(lo), float(hi)) for lo, hi in self.ranges))
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.points_per_axis < 2:
            raise ValueError(
                f"points_per_axis must be >= 2, got {self.points_per_axis}")
        if len(self.ranges) != self.dim:
            raise ValueError(
                f"expected {self.dim} ranges, got {len(self.ranges)}")
        for a, (lo, hi) in enumerate(self.ranges):
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
                raise ValueError(f"axis {a}: empty range [{lo}, {hi}]")

    @property
    def k(self) -> int:
        return self.points_per_axis

    @cached_property
    def lo(self) -> np.ndarray:
        return np.array([r[0] for r in self.ranges], dtype=float)

    @cached_property
    def hi(self) -> np.ndarray:
        return np.array([r[1] for r in self.ranges], dtype=float)

    @cached_property
    def step(self) -> np.ndarray:
        return (self.hi - self.lo) / self.k

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.step))

    @property
    def shape(self) -> tuple:
        return (self.k,) * self.dim

    @property
    def m(self) -> int:
        """Total number of cells."""
        return self.k ** self.dim

    def numgridpoints(self) -> int:
        return self.m

    @property
    def box_volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def edges(self, axis: int) -> np.ndarray:
        """Grid-line coordinates along ``axis`` (``k + 1`` values)."""
        e = self.lo[axis] + self.step[axis] * np.arange(self.k + 1)
        e[-1] = self.hi[axis]
        return e

    def centers(self, axis: int) -> np.ndarray:
        return self.lo[axis] + (np.arange(self.k) + 0.5) * self.step[axis]

    @cached_property
    def cell_centers(self) -> np.ndarray:
        """(m, dim) array of cell centers in flat-index order."""
        mesh = np.meshgrid(*[self.centers(a) for a in range(self.dim)],
                           indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    @cached_property
    def cell_lower(self) -> np.ndarray:
        """(m, dim) array of lower cell corners in flat-index order."""
        return self.cell_centers - 0.5 * self.step

    def flat_index(self, idx) -> int:
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def multi_index(self, flat: int) -> tuple:
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def translated(self, axis: int, offset: float) -> "Grid":
        """Copy of the grid with one axis range moved by ``offset``."""
        ranges = list(self.ranges)
        lo, hi = ranges[axis]
        ranges[axis] = (lo + offset, hi + offset)
        return Grid(self.dim, self.k, tuple(ranges))

    def cell_indices(self, points: np.ndarray) -> np.ndarray:
        """Vectorised owner lookup for points already known to be in the box.

        Coordinates are clipped into ``[0, k - 1]`` so points sitting on the
        upper boundary go to the last cell.
        """
        points = np.atleast_2d(points)
        idx = np.floor((points - self.lo) / self.step).astype(np.int64)
        return np.clip(idx, 0, self.k - 1)


def make_grid(points_per_axis: int, dim: int,
              ranges: Optional[Sequence[Optional[Sequence[float]]]] = None
              ) -> Grid:
    """Build a grid, defaulting every unspecified axis to ``[-5, 5]``.

    ``ranges`` may be shorter than ``dim`` or contain ``None`` entries.
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    given = list(ranges) if ranges is not None else []
    if len(given) > dim:
        raise ValueError(f"got {len(given)} ranges for a {dim}-d grid")
    out = []
    for a in range(dim):
        r = given[a] if a < len(given) else None
        if r is None:
            r = DEFAULT_RANGE
        lo, hi = r
        out.append((float(lo), float(hi)))
    return Grid(dim, int(points_per_axis), tuple(out))


def cell_of_point(grid: Grid, p) -> Optional[tuple]:
    """Multi-index of the cell owning ``p``, or None outside the box."""
    p = np.asarray(p, dtype=float)
    if p.shape != (grid.dim,):
        raise ValueError(f"point must have length {grid.dim}")
    if np.any(p < grid.lo) or np.any(p > grid.hi):
        return None
    return tuple(int(i) for i in grid.cell_indices(p)[0])


def cell_center(grid: Grid, idx) -> np.ndarray:
    idx = np.asarray(idx)
    if idx.shape != (grid.dim,):
        raise ValueError(f"index must have length {grid.dim}")
    if np.any(idx < 0) or np.any(idx >= grid.k):
        raise IndexError(f"cell index {tuple(idx)} out of range")
    return grid.lo + (idx + 0.5) * grid.step
