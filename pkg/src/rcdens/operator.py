"""Finite-volume discretisation of the hyperplane-integral operator.

Row ``i`` of the operator holds, for every grid cell, the measure of the
intersection of the hyperplane ``{b : x_i . b = y_i}`` with that cell: a
segment length when the coefficient space is 2-d and a polygon area when
it is 3-d.  ``T @ f`` then approximates the integral of the density over
each sample's hyperplane, i.e. the conditional density of ``Y`` given
``X`` evaluated at the observations.
"""

from __future__ import annotations

import logging
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .grid import Grid

log = logging.getLogger(__name__)

# relative to the widest axis
GEOM_EPS = 1e-10

_MAGIC = b"RCDENSOP"
_VERSION = 1

# Cell edges as (axis, offset of the start vertex); 4 per axis.
_EDGES = [(e, s) for e in range(3)
          for s in product((0.0, 1.0), repeat=2)]


def _edge_start(axis, offs):
    start = [0.0, 0.0, 0.0]
    others = [a for a in range(3) if a != axis]
    start[others[0]], start[others[1]] = offs
    return np.array(start)


_EDGE_AXES = np.array([e for e, _ in _EDGES])
_EDGE_STARTS = np.stack([_edge_start(e, s) for e, s in _EDGES])


def n_threads() -> int:
    cap = os.environ.get("RCDENS_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"RCDENS_THREADS must be an integer, got {cap!r}")
    return n


def as_sample(sample, dim: Optional[int] = None) -> np.ndarray:
    """Validate an ``n x (d + 1)`` sample matrix with ``Y`` last."""
    s = np.asarray(sample, dtype=float)
    if s.ndim != 2 or s.shape[0] < 1:
        raise ValueError("sample must be a non-empty 2-d array")
    if dim is not None and s.shape[1] != dim + 1:
        raise ValueError(
            f"sample has {s.shape[1]} columns, grid needs {dim + 1}")
    if not np.all(np.isfinite(s)):
        raise ValueError("sample contains non-finite entries")
    return s


@dataclass(frozen=True)
class OperatorMatrix:
    """Sparse ``n x m`` operator together with its provenance."""

    matrix: sp.csr_matrix
    grid: Grid
    sample: Optional[np.ndarray] = None
    empty_rows: int = 0
    weighted: bool = False
    details: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.matrix.shape[1]

    @property
    def Tmat(self) -> sp.csr_matrix:
        return self.matrix

    def rows(self, index) -> "OperatorMatrix":
        """Operator restricted to a subset of samples (exact row slice)."""
        index = np.asarray(index)
        sub = self.matrix[index]
        sub.sort_indices()
        sample = None if self.sample is None else self.sample[index]
        empty = int(np.count_nonzero(np.diff(sub.indptr) == 0))
        return OperatorMatrix(sub, self.grid, sample, empty, self.weighted)


def row_2d(a, y: float, grid: Grid):
    """Segment lengths of the line ``a . b = y`` inside each grid cell.

    Returns
    -------
    cells : (p,) int array of flat cell indices
    lengths : (p,) float array
    """
    a = np.asarray(a, dtype=float)
    if grid.dim != 2:
        raise ValueError("row_2d needs a 2-d grid")
    if a.shape != (2,) or not np.any(a != 0):
        raise ValueError("line normal must be a nonzero 2-vector")
    rows, cells, vals = _rows_2d(a[None, :], np.array([float(y)]), grid)
    return cells, vals


def _rows_2d(A, Y, grid):
    k = grid.k
    lo, hi, h = grid.lo, grid.hi, grid.step
    eps = GEOM_EPS * float(np.max(hi - lo))
    norm = np.hypot(A[:, 0], A[:, 1])
    d = np.stack([-A[:, 1], A[:, 0]], axis=1) / norm[:, None]
    p0 = A * (Y / norm ** 2)[:, None]

    ts = []
    for axis in range(2):
        lines = grid.edges(axis)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (lines[None, :] - p0[:, axis:axis + 1]) / d[:, axis:axis + 1]
        t[np.abs(d[:, axis]) < 1e-15] = np.nan
        other = 1 - axis
        coord = p0[:, other:other + 1] + t * d[:, other:other + 1]
        out = (coord < lo[other] - eps) | (coord > hi[other] + eps)
        t[out] = np.nan
        ts.append(t)
    t = np.sort(np.concatenate(ts, axis=1), axis=1)  # NaN sorts last
    seg = t[:, 1:] - t[:, :-1]
    ok = np.isfinite(seg) & (seg > eps)
    r, c = np.nonzero(ok)
    lengths = seg[r, c]
    tmid = 0.5 * (t[r, c] + t[r, c + 1])
    mid = p0[r] + tmid[:, None] * d[r]
    idx = grid.cell_indices(mid)
    cells = idx[:, 0] * k + idx[:, 1]
    return r, cells, lengths


def row_3d(a, y: float, grid: Grid):
    """Polygon areas of the plane ``a . b = y`` inside each grid cell.

    Returns
    -------
    cells : (p,) int array of flat cell indices
    areas : (p,) float array
    """
    a = np.asarray(a, dtype=float)
    if grid.dim != 3:
        raise ValueError("row_3d needs a 3-d grid")
    if a.shape != (3,) or not np.any(a != 0):
        raise ValueError("plane normal must be a nonzero 3-vector")
    rows, cells, vals = _rows_3d(a[None, :], np.array([float(y)]), grid)
    return cells, vals


def _slab(A, Y, grid):
    """(row, cell) pairs whose vertex value range brackets the plane."""
    base = A @ grid.cell_lower.T
    ah = A * grid.step
    vmin = base + np.minimum(ah, 0).sum(axis=1)[:, None]
    vmax = base + np.maximum(ah, 0).sum(axis=1)[:, None]
    tol = GEOM_EPS * np.abs(ah).sum(axis=1)[:, None]
    y = Y[:, None]
    return np.nonzero((vmin <= y + tol) & (vmax >= y - tol))


def _polygon_areas(a, y, lower, h):
    """Area of plane/box sections for a batch of (plane, cell) pairs.

    Each plane is intersected with the 12 cell edges; the hits are
    expressed in an orthonormal in-plane basis, sorted by angle about
    their centroid and closed into a polygon whose shoelace sum gives the
    area.  In an orthonormal basis this equals ``0.5 |sum p_i x p_{i+1}|``
    taken in 3-d.  Hits at shared vertices are repeated points, which sort
    next to each other and add nothing to the sum.
    """
    P = a.shape[0]
    offs = _EDGE_STARTS * h  # (12, 3) start vertex relative to the corner
    he = h[_EDGE_AXES]
    ae = a[:, _EDGE_AXES] * he
    resid = (y - np.einsum("pj,pj->p", a, lower))[:, None] - a @ offs.T
    with np.errstate(divide="ignore", invalid="ignore"):
        t = resid / ae
    valid = (ae != 0) & (t >= -1e-12) & (t <= 1 + 1e-12)
    t = np.clip(np.where(valid, t, 0.0), 0.0, 1.0)
    count = valid.sum(axis=1)

    nrm = a / np.linalg.norm(a, axis=1, keepdims=True)
    ref = np.zeros_like(a)
    ref[np.arange(P), np.argmin(np.abs(nrm), axis=1)] = 1.0
    u = np.cross(nrm, ref)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = np.cross(nrm, u)

    # in-plane coordinates of the hits, relative to the cell corner
    x = u @ offs.T + t * he * u[:, _EDGE_AXES]
    z = v @ offs.T + t * he * v[:, _EDGE_AXES]
    w = valid / np.maximum(count, 1)[:, None]
    x -= (x * w).sum(axis=1, keepdims=True)
    z -= (z * w).sum(axis=1, keepdims=True)

    ang = np.where(valid, np.arctan2(z, x), np.inf)
    order = np.argsort(ang, axis=1)
    x = np.take_along_axis(x, order, axis=1)
    z = np.take_along_axis(z, order, axis=1)
    vs = np.take_along_axis(valid, order, axis=1)
    # pad the tail with the first vertex so the closing edge wraps correctly
    x = np.where(vs, x, x[:, :1])
    z = np.where(vs, z, z[:, :1])
    cross = x * np.roll(z, -1, axis=1) - np.roll(x, -1, axis=1) * z
    area = 0.5 * np.abs(cross.sum(axis=1))
    area[count < 3] = 0.0
    return area


def _rows_3d(A, Y, grid, pair_chunk=60000):
    h = grid.step
    lower = grid.cell_lower
    r, c = _slab(A, Y, grid)
    areas = np.empty(r.size)
    for s in range(0, r.size, pair_chunk):
        sl = slice(s, s + pair_chunk)
        areas[sl] = _polygon_areas(A[r[sl]], Y[r[sl]], lower[c[sl]], h)

    # A plane that contains a whole cell face is found by the cells on
    # both sides; keep only the half-open owner.
    axis_aligned = np.count_nonzero(A, axis=1) == 1
    if np.any(axis_aligned[r]):
        q = np.argmax(np.abs(A), axis=1)
        coord = Y / A[np.arange(len(A)), q]
        owner = np.clip(np.floor((coord - grid.lo[q]) / h[q]), 0, grid.k - 1)
        cell_multi = np.stack(np.unravel_index(c, grid.shape), axis=1)
        own = cell_multi[np.arange(c.size), q[r]] == owner[r]
        areas[axis_aligned[r] & ~own] = 0.0

    keep = areas > GEOM_EPS * float(np.max(h)) ** 2
    return r[keep], c[keep], areas[keep]


def _build_chunk(A, Y, grid):
    if grid.dim == 2:
        return _rows_2d(A, Y, grid)
    return _rows_3d(A, Y, grid)


def build_operator(sample, grid: Grid, weighted: bool = False,
                   threads: Optional[int] = None,
                   rows_per_chunk: Optional[int] = None) -> OperatorMatrix:
    """Assemble the discrete operator for ``sample`` on ``grid``.

    Parameters
    ----------
    sample : (n, dim + 1) array_like
        Rows ``[X_0, ..., X_{dim-1}, Y]``.
    grid : Grid
    weighted : bool
        Scale each row by ``1 / |x_i|`` so that ``T f`` approximates the
        conditional density exactly.  Off by default.
    threads : int, optional
        Worker threads; defaults to the CPU count capped by
        ``RCDENS_THREADS``.  Output does not depend on it.
    """
    s = as_sample(sample, grid.dim)
    A, Y = s[:, :-1], s[:, -1]
    if np.any(np.all(A == 0, axis=1)):
        raise ValueError("sample row with all-zero regressors")
    n = len(s)
    if rows_per_chunk is None:
        rows_per_chunk = max(1, 2_000_000 // grid.m) if grid.dim == 3 else 4096
    starts = list(range(0, n, rows_per_chunk))
    work = [(A[i:i + rows_per_chunk], Y[i:i + rows_per_chunk], grid)
            for i in starts]
    threads = n_threads() if threads is None else threads
    if threads > 1 and len(work) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda w: _build_chunk(*w), work))
    else:
        parts = [_build_chunk(*w) for w in work]

    rows = np.concatenate([p[0] + off for p, off in zip(parts, starts)])
    cols = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([p[2] for p in parts])
    if weighted:
        vals = vals / np.linalg.norm(A, axis=1)[rows]
    T = sp.csr_matrix((vals, (rows, cols)), shape=(n, grid.m))
    T.sum_duplicates()
    T.sort_indices()
    empty = int(np.count_nonzero(np.diff(T.indptr) == 0))
    if empty:
        log.warning("%d of %d hyperplanes miss the grid", empty, n)
    return OperatorMatrix(T, grid, s, empty, weighted)


def transmatrix(sample, grid: Grid) -> OperatorMatrix:
    return build_operator(sample, grid)


def apply(T: OperatorMatrix, f) -> np.ndarray:
    values = getattr(f, "values", f)
    values = np.asarray(values, dtype=float)
    if values.shape != (T.m,):
        raise ValueError(f"density has length {values.size}, operator has "
                         f"{T.m} columns")
    return T.matrix @ values


def dump_operator(T, path) -> None:
    """Write the CSR arrays of ``T`` in the little-endian cache format.

    Layout: 8-byte magic ``RCDENSOP``, uint32 version, uint64 ``n``,
    ``m``, ``nnz``, then int64 ``indptr[n + 1]``, int64 ``indices[nnz]``
    and float64 ``data[nnz]``.
    """
    M = T.matrix if isinstance(T, OperatorMatrix) else sp.csr_matrix(T)
    n, m = M.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQQQ", _VERSION, n, m, M.nnz))
        fh.write(np.asarray(M.indptr, dtype="<i8").tobytes())
        fh.write(np.asarray(M.indices, dtype="<i8").tobytes())
        fh.write(np.asarray(M.data, dtype="<f8").tobytes())


def load_operator(path, grid: Optional[Grid] = None, sample=None):
    """Read a matrix written by :func:`dump_operator`.

    Returns an :class:`OperatorMatrix` when ``grid`` is given, otherwise
    the bare CSR matrix.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _MAGIC:
        raise ValueError(f"{path}: not an operator dump")
    version, n, m, nnz = struct.unpack_from("<IQQQ", raw, 8)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    off = 8 + struct.calcsize("<IQQQ")
    indptr = np.frombuffer(raw, "<i8", n + 1, off)
    off += 8 * (n + 1)
    indices = np.frombuffer(raw, "<i8", nnz, off)
    off += 8 * nnz
    data = np.frombuffer(raw, "<f8", nnz, off)
    M = sp.csr_matrix((data.copy(), indices.copy(), indptr.copy()),
                      shape=(n, m))
    if grid is None:
        return M
    if grid.m != m:
        raise ValueError(f"dump has {m} columns, grid has {grid.m} cells")
    empty = int(np.count_nonzero(np.diff(M.indptr) == 0))
    s = None if sample is None else as_sample(sample, grid.dim)
    return OperatorMatrix(M, grid, s, empty)
