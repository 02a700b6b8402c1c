"""Summaries of an estimated density: moments, maxima and marginals."""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)


def _density(report):
    f = getattr(report, "f", report)
    return f.values, f.grid


def expected_value(report) -> np.ndarray:
    """Mean of each coefficient, ``sum_j center_j * f_j * dv``."""
    f, grid = _density(report)
    return grid.cell_centers.T @ f * grid.cell_volume


def maxval(report):
    """``(value, location)`` of the largest cell; ties go to the lowest index."""
    f, grid = _density(report)
    j = int(np.argmax(f))
    return float(f[j]), grid.cell_centers[j].copy()


def modes(report, top: Optional[int] = None):
    """Cells strictly larger than all their axis neighbours.

    Returns a list of ``(value, location)`` sorted by value, descending,
    truncated to ``top`` entries.  Plateaus produce no mode.
    """
    if top is not None and top < 1:
        raise ValueError(f"top must be >= 1, got {top}")
    f, grid = _density(report)
    F = f.reshape(grid.shape)
    is_max = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        nxt = np.full(grid.shape, -np.inf)
        prv = np.full(grid.shape, -np.inf)
        head = [slice(None)] * grid.dim
        tail = [slice(None)] * grid.dim
        head[axis] = slice(0, -1)
        tail[axis] = slice(1, None)
        nxt[tuple(head)] = F[tuple(tail)]
        prv[tuple(tail)] = F[tuple(head)]
        is_max &= (F > nxt) & (F > prv)
    flat = np.flatnonzero(is_max.ravel())
    flat = flat[np.argsort(-f[flat], kind="stable")]
    if top is not None:
        flat = flat[:top]
    return [(float(f[j]), grid.cell_centers[j].copy()) for j in flat]


def marginal_2d(report, axes=(0, 1)) -> np.ndarray:
    """Joint density of two coefficients, integrating out the third.

    For a 2-d estimate the density itself is returned.
    """
    f, grid = _density(report)
    F = f.reshape(grid.shape)
    if grid.dim == 2:
        log.info("estimate is already bivariate; returning it unchanged")
        return F.copy()
    a, b = (int(x) for x in axes)
    if a == b or not {a, b} <= {0, 1, 2}:
        raise ValueError(f"axes must be two distinct axes of 0..2, got {axes}")
    drop = ({0, 1, 2} - {a, b}).pop()
    M = F.sum(axis=drop) * grid.step[drop]
    # sum keeps the remaining axes in increasing order
    return M if a < b else M.T
