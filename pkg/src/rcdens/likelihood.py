"""Penalised negative log-likelihood and its gradient.

All quantities are discrete: the density is the vector of cell values
``f`` and integrals over coefficient space become sums weighted by the
cell volume ``dv``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import Grid

LIK_EPS = 1e-30
ENT_EPS = 1e-12


class PenaltyKind(enum.Enum):
    NONE = "none"
    L2 = "l2"
    H1 = "h1"
    ENTROPY = "entropy"

    @classmethod
    def parse(cls, value) -> "PenaltyKind":
        if isinstance(value, cls):
            return value
        if value is None:
            return cls.NONE
        key = str(value).strip().lower()
        aliases = {"l2squared": "l2", "sobolev": "h1", "sobolevh1": "h1",
                   "sobolev_h1": "h1", "ent": "entropy"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown penalty {value!r}; choose from "
                             f"{[k.value for k in cls]}") from None


@dataclass(frozen=True)
class DensityEstimate:
    """Cell values of a density on ``grid`` (flat, row-major order)."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.m,):
            raise ValueError(f"density has {v.size} values, grid has "
                             f"{self.grid.m} cells")
        object.__setattr__(self, "values", v)

    @property
    def shaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)


def _values(f):
    return np.asarray(getattr(f, "values", f), dtype=float)


def _matrix(T):
    return getattr(T, "matrix", T)


def neg_avg_loglik(T, f, details: dict = None) -> float:
    """``-(1/n) sum_i log (T f)_i`` with a floor inside the log.

    When ``details`` is given the number of clamped rows is stored under
    ``"lik_clamped"``.
    """
    Tf = _matrix(T) @ _values(f)
    low = Tf < LIK_EPS
    if details is not None:
        details["lik_clamped"] = int(np.count_nonzero(low))
    return float(-np.mean(np.log(np.maximum(Tf, LIK_EPS))))


def neg_avg_loglik_grad(T, f) -> np.ndarray:
    M = _matrix(T)
    Tf = M @ _values(f)
    w = 1.0 / np.maximum(Tf, LIK_EPS)
    return -(M.T @ w) / M.shape[0]


def _loglik_value_grad(M, f):
    Tf = M @ f
    Tf = np.maximum(Tf, LIK_EPS)
    value = float(-np.mean(np.log(Tf)))
    grad = -(M.T @ (1.0 / Tf)) / M.shape[0]
    return value, grad


@lru_cache(maxsize=16)
def difference_operator(grid: Grid) -> sp.csr_matrix:
    """Stacked forward differences along every axis, zero-padded.

    Each axis contributes ``(k + 1) * k**(dim - 1)`` rows: the ``k - 1``
    interior differences plus one at each end against the zero padding.
    """
    k = grid.k
    d1 = sp.diags([-np.ones(k), np.ones(k)], [-1, 0], shape=(k + 1, k))
    eye = sp.identity(k, format="csr")
    blocks = []
    for axis in range(grid.dim):
        factors = [eye] * grid.dim
        factors[axis] = d1 / grid.step[axis]
        op = factors[0]
        for fac in factors[1:]:
            op = sp.kron(op, fac)
        blocks.append(op)
    return sp.vstack(blocks).tocsr()


def penalty(kind, f, grid: Grid = None):
    """Value and gradient of the regularisation functional.

    Parameters
    ----------
    kind : PenaltyKind or str
    f : DensityEstimate or array_like
        A bare array needs ``grid``.

    Returns
    -------
    value : float
    grad : ndarray
    """
    kind = PenaltyKind.parse(kind)
    grid = getattr(f, "grid", grid)
    if grid is None:
        raise ValueError("penalty needs a grid for bare arrays")
    v = _values(f)
    dv = grid.cell_volume
    if kind is PenaltyKind.NONE:
        return 0.0, np.zeros_like(v)
    if kind is PenaltyKind.L2:
        return float(np.dot(v, v) * dv), 2.0 * dv * v
    if kind is PenaltyKind.H1:
        D = difference_operator(grid)
        Df = D @ v
        value = (np.dot(v, v) + np.dot(Df, Df)) * dv
        return float(value), 2.0 * dv * (v + D.T @ Df)
    # entropy, 0 log 0 = 0
    ft = np.maximum(v, ENT_EPS)
    logf = np.log(ft)
    return float(np.dot(v, logf) * dv), dv * (logf + 1.0)


def objective(T, f, alpha: float, kind, grid: Grid = None):
    """``-loglik(f) + alpha * R(f)`` and its gradient."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    grid = getattr(T, "grid", grid)
    v = _values(f)
    value, grad = _loglik_value_grad(_matrix(T), v)
    kind = PenaltyKind.parse(kind)
    if alpha > 0 and kind is not PenaltyKind.NONE:
        pv, pg = penalty(kind, v, grid)
        value += alpha * pv
        grad = grad + alpha * pg
    return value, grad
