"""Re-estimation under random intercept shifts.

A density whose single mode sits at the centre of the grid can be
reconstructed poorly.  Adding a constant ``c`` to every ``Y`` moves the
intercept coefficient by ``c`` and so moves the mode off-centre.  The
estimate is computed for several random shifts, each one is translated
back, and a representative is picked by 2-means clustering of their L2
norms: the member closest to the centroid of the larger cluster.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from .grid import Grid
from .likelihood import DensityEstimate
from .operator import as_sample, build_operator
from .solver import EstimationReport, SolverOptions, solve

log = logging.getLogger(__name__)


def kmeans_1d(values, n_clusters: int = 2):
    """Exact 1-d k-means for ``n_clusters = 2``.

    In one dimension the optimal 2-clustering splits the sorted values at
    one gap, so every split is scored and the cheapest kept (the first
    one on ties).

    Returns
    -------
    labels : (n,) int array, cluster 0 holds the smaller values
    centroids : (2,) array
    """
    if n_clusters != 2:
        raise NotImplementedError("only two clusters are supported")
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two values to cluster")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    best_cost, best_split = np.inf, 1
    for split in range(1, xs.size):
        lo, hi = xs[:split], xs[split:]
        cost = ((lo - lo.mean()) ** 2).sum() + ((hi - hi.mean()) ** 2).sum()
        if cost < best_cost:
            best_cost, best_split = cost, split
    labels = np.empty(x.size, dtype=int)
    labels[order[:best_split]] = 0
    labels[order[best_split:]] = 1
    centroids = np.array([xs[:best_split].mean(), xs[best_split:].mean()])
    return labels, centroids


def pick_representative(norms):
    """Index of the norm closest to the centroid of the larger cluster.

    Ties in cluster size go to the cluster of the first estimate; ties in
    distance go to the lowest index.
    """
    norms = np.asarray(norms, dtype=float)
    labels, centroids = kmeans_1d(norms)
    sizes = np.bincount(labels, minlength=2)
    if sizes[0] != sizes[1]:
        big = int(np.argmax(sizes))
    else:
        big = int(labels[0])
    members = np.flatnonzero(labels == big)
    dist = np.abs(norms[members] - centroids[big])
    return int(members[np.argmin(dist)]), labels, centroids


def shift_back(values: np.ndarray, grid: Grid, cells: int) -> np.ndarray:
    """Move a density down the intercept axis by ``cells`` cells.

    Cells that fall off the bottom are dropped and the vacated top cells
    are zero.
    """
    F = values.reshape(grid.shape)
    out = np.zeros_like(F)
    if cells == 0:
        out[...] = F
    else:
        out[:-cells] = F[cells:]
    return out.ravel()


def shift_estimate(sample, grid: Grid, alpha: float, kind,
                   opts: Optional[SolverOptions] = None, n_shifts: int = 10,
                   seed=0, shift_range=None, translate_grid: bool = False,
                   alpha_method: str = "User") -> EstimationReport:
    """Estimate under ``n_shifts`` random intercept shifts and pick one.

    Parameters
    ----------
    sample : (n, dim + 1) array
        Must have a constant first column of ones.
    shift_range : (float, float), optional
        Bounds ``(a, b)`` of the uniform shift distribution.  Defaults to
        one intercept cell up to a quarter of the intercept range.  Draws
        are snapped to whole intercept cells.
    translate_grid : bool
        If True the grid is moved along with the data.  The operator is
        translation covariant, so this reproduces the unshifted problem up
        to rounding; the default keeps the grid fixed so the mode really
        moves relative to the lattice, and the solution is moved back by
        whole cells afterwards.
    """
    s = as_sample(sample, grid.dim)
    if not np.all(s[:, 0] == 1.0):
        raise ValueError("shifting needs an intercept column of ones")
    if n_shifts < 2:
        raise ValueError(f"n_shifts must be >= 2, got {n_shifts}")
    if grid.k < 4:
        raise ValueError("intercept axis too coarse to shift (k < 4)")
    h0 = float(grid.step[0])
    width = float(grid.hi[0] - grid.lo[0])
    a, b = shift_range if shift_range is not None else (h0, width / 4)
    if not 0 < a <= b:
        raise ValueError(f"invalid shift range ({a}, {b})")

    rng = np.random.default_rng(seed)
    raw = rng.uniform(a, b, n_shifts)
    cells = np.maximum(1, np.rint(raw / h0)).astype(int)
    cells = np.minimum(cells, grid.k - 1)
    shifts = cells * h0

    reports, estimates, lost = [], [], []
    dv = grid.cell_volume
    # snapped draws repeat; the solve is deterministic, so reuse it
    done = {}
    for t, (c, nc) in enumerate(zip(shifts, cells)):
        nc = int(nc)
        if nc not in done:
            shifted = s.copy()
            shifted[:, -1] += c
            if translate_grid:
                g_t = grid.translated(0, c)
                rep = solve(build_operator(shifted, g_t), alpha, kind, opts,
                            alpha_method)
                f, kept = rep.f.values.copy(), 1.0
            else:
                rep = solve(build_operator(shifted, grid), alpha, kind, opts,
                            alpha_method)
                f = shift_back(rep.f.values, grid, nc)
                kept = f.sum() * dv
                if kept <= 0:
                    raise RuntimeError(f"shift {c}: all mass left the grid")
                f /= kept
            done[nc] = (rep, f, 1.0 - kept)
            log.info("shift %d: c = %g", t, c)
        rep, f, lost_t = done[nc]
        reports.append(rep)
        estimates.append(f)
        lost.append(lost_t)

    norms = np.array([np.sqrt(np.dot(f, f) * dv) for f in estimates])
    chosen, labels, centroids = pick_representative(norms)
    rep = reports[chosen]
    details = dict(rep.details)
    details.update({
        "shift": {
            "shifts": shifts.tolist(),
            "shift_cells": cells.tolist(),
            "norms": norms.tolist(),
            "labels": labels.tolist(),
            "centroids": centroids.tolist(),
            "chosen": chosen,
            "lost_mass": [float(x) for x in lost],
            "distinct_solves": len(done),
            "translate_grid": translate_grid,
            "converged": [r.details["converged"] for r in reports],
        }
    })
    return EstimationReport(DensityEstimate(estimates[chosen], grid),
                            float(alpha), alpha_method, rep.operator,
                            rep.penalty, details)
