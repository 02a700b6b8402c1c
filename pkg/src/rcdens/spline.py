"""Display refinement of a coarse estimate by cubic spline interpolation."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import Grid
from .likelihood import DensityEstimate


def _density(report):
    return getattr(report, "f", report)


def interpolate(report, axes_points) -> np.ndarray:
    """Evaluate the tensor-product natural cubic spline on a point lattice.

    Parameters
    ----------
    report : EstimationReport or DensityEstimate
    axes_points : sequence of 1-d arrays
        Coordinates along each axis; the result has shape
        ``tuple(len(p) for p in axes_points)``.
    """
    f = _density(report)
    grid = f.grid
    if len(axes_points) != grid.dim:
        raise ValueError(f"need {grid.dim} coordinate arrays")
    vals = f.shaped
    for axis in range(grid.dim):
        cs = CubicSpline(grid.centers(axis), vals, axis=axis,
                         bc_type="natural", extrapolate=True)
        vals = cs(np.asarray(axes_points[axis], dtype=float))
    return vals


def refine(report, new_points_per_axis: int, return_details: bool = False):
    """Interpolate onto a grid with ``new_points_per_axis`` cells per axis.

    The spline passes through the cell-centre values and is evaluated at
    the refined cell centres.  Negative overshoot is clamped to zero and
    the result rescaled to unit mass.

    With ``return_details`` a dict with the raw mass and the clamped
    (negative) mass is returned as well.
    """
    f = _density(report)
    grid = f.grid
    if new_points_per_axis <= grid.k:
        raise ValueError(f"refinement to {new_points_per_axis} points is not "
                         f"finer than {grid.k}")
    fine = Grid(grid.dim, int(new_points_per_axis), grid.ranges)
    raw = interpolate(f, [fine.centers(a) for a in range(grid.dim)]).ravel()
    dv = fine.cell_volume
    clamped = float(-raw[raw < 0].sum() * dv)
    vals = np.maximum(raw, 0.0)
    mass = vals.sum() * dv
    if mass <= 0:
        raise ValueError("refined density has no positive mass")
    out = DensityEstimate(vals / mass, fine)
    if return_details:
        return out, {"raw_mass": float(raw.sum() * dv), "clamped_mass": clamped,
                     "scale": float(1.0 / mass)}
    return out


def spline_fit(report, num_grid_points: int):
    return refine(report, num_grid_points)
