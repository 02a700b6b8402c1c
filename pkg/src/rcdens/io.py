"""CSV ingestion, density dumps and plot-data emission.

Density dump format (text, line oriented)::

    # rcdens-density v1
    dim 2
    points_per_axis 20
    range 0 -1.5 1.5
    range 1 -1.5 1.5
    alpha 0.14999999999999999
    alpha_method User
    penalty h1
    n 10000
    timestamp 2026-01-01T00:00:00Z
    values 400
    <one value per line, flat row-major cell order, %.17g>

Plot-data format: one block per bivariate panel, each introduced by
``# block <label_x> <label_y>`` and a column header ``# x y z``, rows
``x y z`` with a blank line after every x-scan line and two blank lines
between blocks (the gnuplot ``index`` layout).
"""

from __future__ import annotations

import csv
import datetime as _dt
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import Grid
from .likelihood import DensityEstimate, PenaltyKind
from .results import marginal_2d

DUMP_MAGIC = "# rcdens-density v1"
PLOT_MAGIC = "# rcdens-plot v1"
N_LEVELS = 10
_MISSING = {"", "nan", "na", "n/a", "null"}


# CSV input ------------------------------------------------------------------

def _parse_cell(text: str, row: int, col: int) -> float:
    s = text.strip()
    if s.lower() in _MISSING:
        return math.nan
    try:
        return float(s)
    except ValueError:
        raise ValueError(f"row {row}, column {col}: non-numeric value {s!r}") \
            from None


def read_csv(path, columns: Optional[Sequence] = None,
             subsample: Optional[int] = None, seed=None,
             add_intercept: bool = False, transforms: Optional[dict] = None,
             header: bool = False) -> np.ndarray:
    """Load a sample matrix from a CSV file.

    Parameters
    ----------
    columns : sequence of int or str, optional
        Columns to keep, in output order.  Names require ``header``.
        The last selected column is the response.
    subsample : int, optional
        Draw this many rows uniformly without replacement after filtering.
    add_intercept : bool
        Prepend a column of ones.
    transforms : dict, optional
        Maps a position in the selected columns to ``(scale, offset)``;
        the column becomes ``scale * x + offset``.
    header : bool
        Treat the first row as column names.

    Rows holding an empty or NaN-like cell (or any non-finite value) are
    dropped before transforms and subsampling.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    names = None
    if header:
        if not rows:
            raise ValueError(f"{path}: empty file")
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0])
    if columns is None:
        sel = list(range(width))
    else:
        sel = []
        for c in columns:
            if isinstance(c, str) and not c.lstrip("-").isdigit():
                if names is None or c not in names:
                    raise ValueError(f"unknown column {c!r}")
                sel.append(names.index(c))
            else:
                sel.append(int(c))
        if any(not 0 <= j < width for j in sel):
            raise ValueError(f"column index out of range 0..{width - 1}")
    data = np.empty((len(rows), len(sel)))
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ValueError(f"row {i + 1} has {len(r)} fields, expected {width}")
        data[i] = [_parse_cell(r[j], i + 1, j) for j in sel]
    data = data[np.isfinite(data).all(axis=1)]

    for pos, (scale, offset) in (transforms or {}).items():
        pos = int(pos)
        if not 0 <= pos < data.shape[1]:
            raise ValueError(f"transform column {pos} out of range")
        data[:, pos] = scale * data[:, pos] + offset
    if add_intercept:
        data = np.column_stack([np.ones(len(data)), data])
    if subsample is not None:
        if subsample < 1:
            raise ValueError(f"subsample must be >= 1, got {subsample}")
        if subsample > len(data):
            raise ValueError(f"subsample {subsample} exceeds the {len(data)} "
                             "usable rows")
        rng = np.random.default_rng(seed)
        data = data[np.sort(rng.choice(len(data), subsample, replace=False))]
    return data


def write_csv(path, sample: np.ndarray, header: Optional[Sequence[str]] = None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in np.asarray(sample, dtype=float):
            w.writerow(["%.17g" % v for v in row])


# density dumps ---------------------------------------------------------------

def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        t = _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc)
    else:
        t = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0)
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class DensityDump:
    """A density plus the metadata needed to reproduce its grid."""

    f: DensityEstimate
    alpha: float = 0.0
    alpha_method: str = "User"
    penalty: PenaltyKind = PenaltyKind.NONE
    n: int = 0
    timestamp: str = field(default_factory=_timestamp)

    @property
    def grid(self) -> Grid:
        return self.f.grid

    @classmethod
    def from_report(cls, report, timestamp: Optional[str] = None):
        T = getattr(report, "operator", None)
        return cls(report.f, float(report.alpha), report.alpha_method,
                   PenaltyKind.parse(report.penalty),
                   int(T.n) if T is not None else 0,
                   timestamp or _timestamp())

    def to_text(self) -> str:
        g = self.grid
        lines = [DUMP_MAGIC, f"dim {g.dim}", f"points_per_axis {g.k}"]
        lines += [f"range {a} {lo!r} {hi!r}" for a, (lo, hi) in enumerate(g.ranges)]
        lines += [f"alpha {self.alpha!r}", f"alpha_method {self.alpha_method}",
                  f"penalty {self.penalty.value}", f"n {self.n}",
                  f"timestamp {self.timestamp}", f"values {g.m}"]
        lines += ["%.17g" % v for v in self.f.values]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DensityDump":
        lines = text.splitlines()
        if not lines or lines[0].strip() != DUMP_MAGIC:
            raise ValueError("not a density dump (bad header line)")
        meta, ranges, pos = {}, {}, 1
        while pos < len(lines):
            key, _, rest = lines[pos].partition(" ")
            pos += 1
            if key == "range":
                a, lo, hi = rest.split()
                ranges[int(a)] = (float(lo), float(hi))
            else:
                meta[key] = rest.strip()
            if key == "values":
                break
        need = ("dim", "points_per_axis", "alpha", "alpha_method", "penalty",
                "n", "timestamp", "values")
        missing = [k for k in need if k not in meta]
        if missing:
            raise ValueError(f"density dump lacks {missing}")
        dim = int(meta["dim"])
        if sorted(ranges) != list(range(dim)):
            raise ValueError("density dump has incomplete ranges")
        grid = Grid(dim, int(meta["points_per_axis"]),
                    tuple(ranges[a] for a in range(dim)))
        count = int(meta["values"])
        body = [s for s in lines[pos:] if s.strip()]
        if count != grid.m or len(body) != count:
            raise ValueError(f"density dump holds {len(body)} values, "
                             f"grid needs {grid.m}")
        vals = np.array([float(s) for s in body])
        return cls(DensityEstimate(vals, grid), float(meta["alpha"]),
                   meta["alpha_method"], PenaltyKind.parse(meta["penalty"]),
                   int(meta["n"]), meta["timestamp"])


def write_dump(obj, path) -> DensityDump:
    """Write a report or DensityDump to ``path``; returns the dump."""
    dump = obj if isinstance(obj, DensityDump) else DensityDump.from_report(obj)
    with open(path, "w", newline="\n") as fh:
        fh.write(dump.to_text())
    return dump


def read_dump(path) -> DensityDump:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path) as fh:
        return DensityDump.from_text(fh.read())


# plot data -------------------------------------------------------------------

def plot_panels(report):
    """``[(axes, X-centers, Y-centers, Z)]``: the density in 2-d, the three
    bivariate marginals in 3-d.  ``Z[i, j]`` belongs to ``(x_i, y_j)``."""
    f = getattr(report, "f", report)
    g = f.grid
    if g.dim == 2:
        pairs = [(0, 1)]
    elif g.dim == 3:
        pairs = [(0, 1), (0, 2), (1, 2)]
    else:
        raise ValueError(f"unsupported dim {g.dim}")
    return [((a, b), g.centers(a), g.centers(b), marginal_2d(f, (a, b)))
            for a, b in pairs]


def emit_plot_data(report, kind: str = "contour", out_path=None,
                   svg_path=None) -> str:
    """Write gridded ``x y z`` blocks, and optionally an SVG rendering.

    Returns the plot-data text.
    """
    if kind not in ("contour", "surface"):
        raise ValueError(f"kind must be 'contour' or 'surface', got {kind!r}")
    panels = plot_panels(report)
    out = [f"{PLOT_MAGIC} kind={kind}"]
    for n, ((a, b), xs, ys, Z) in enumerate(panels):
        if n:
            out += ["", ""]
        out += [f"# block b{a} b{b}", "# x y z"]
        for i, x in enumerate(xs):
            out += ["%.17g %.17g %.17g" % (x, y, Z[i, j]) for j, y in enumerate(ys)]
            out.append("")
    text = "\n".join(out) + "\n"
    if out_path is not None:
        with open(out_path, "w", newline="\n") as fh:
            fh.write(text)
    if svg_path is not None:
        with open(svg_path, "w", newline="\n") as fh:
            fh.write(render_svg(panels))
    return text


def read_plot_data(text: str) -> list:
    """Parse plot-data text into ``[(label, (N, 3) array)]``."""
    blocks, label, rows = [], None, []
    for line in text.splitlines():
        if line.startswith("# block"):
            if label is not None:
                blocks.append((label, np.array(rows)))
            label, rows = tuple(line.split()[2:]), []
        elif line and not line.startswith("#"):
            rows.append([float(v) for v in line.split()])
    if label is not None:
        blocks.append((label, np.array(rows)))
    return blocks


# fixed 10-step ramp, light to dark
_PALETTE = ["#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6",
            "#4292c6", "#2171b5", "#08519c", "#08306b", "#041c40"]


def quantize(Z: np.ndarray, zmax: float) -> np.ndarray:
    """Level index ``0..N_LEVELS-1`` on the linear scale ``[0, zmax]``."""
    if zmax <= 0:
        return np.zeros(Z.shape, dtype=int)
    return np.clip((Z / zmax * N_LEVELS).astype(int), 0, N_LEVELS - 1)


def render_svg(panels, cell_px: int = 12) -> str:
    """Filled-level rendering of each panel with a shared legend."""
    pad, gap, legend_w = 40, 30, 90
    sizes = [(len(xs) * cell_px, len(ys) * cell_px) for _, xs, ys, _ in panels]
    width = pad + sum(w + gap for w, _ in sizes) + legend_w
    height = pad * 2 + max(h for _, h in sizes)
    zmax = max(float(Z.max()) for *_, Z in panels)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    x0 = pad
    for ((a, b), xs, ys, Z), (w, h) in zip(panels, sizes):
        levels = quantize(Z, zmax)
        parts.append(f'<g transform="translate({x0},{pad})">')
        for i in range(len(xs)):
            for j in range(len(ys)):
                # y grows upward in the plot
                parts.append(f'<rect x="{i * cell_px}" y="{h - (j + 1) * cell_px}" '
                             f'width="{cell_px}" height="{cell_px}" '
                             f'fill="{_PALETTE[levels[i, j]]}"/>')
        parts.append(f'<rect width="{w}" height="{h}" fill="none" stroke="black"/>')
        parts.append(f'<text x="{w / 2}" y="{h + 18}" text-anchor="middle" '
                     f'font-size="12">b{a} [{xs[0]:.3g}, {xs[-1]:.3g}]</text>')
        parts.append(f'<text x="-8" y="{h / 2}" text-anchor="end" '
                     f'font-size="12">b{b}</text>')
        parts.append("</g>")
        x0 += w + gap
    parts.append(f'<g transform="translate({x0},{pad})">')
    for lv in range(N_LEVELS):
        y = (N_LEVELS - 1 - lv) * 14
        parts.append(f'<rect x="0" y="{y}" width="14" height="14" '
                     f'fill="{_PALETTE[lv]}" stroke="black" stroke-width="0.3"/>')
        parts.append(f'<text x="18" y="{y + 11}" font-size="10">'
                     f'{lv * zmax / N_LEVELS:.3g}</text>')
    parts.append("</g></svg>")
    return "\n".join(parts) + "\n"
