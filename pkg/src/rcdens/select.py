"""Choice of the regularisation parameter.

Two rules are provided: Lepskii's balancing principle over a geometric
ladder of parameters, and k-fold cross-validation scored by the held-out
negative log-likelihood with a halving search over the candidate list.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .likelihood import LIK_EPS
from .operator import OperatorMatrix, build_operator
from .solver import SolverOptions, solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlphaLadder:
    """Geometric sequence ``alpha_1 = c_L ln(n) / sqrt(n)``, ``alpha_{i+1} = r alpha_i``."""

    c_L: float
    r: float
    count: int
    n: int

    def __post_init__(self):
        if not self.c_L > 0:
            raise ValueError(f"c_L must be > 0, got {self.c_L}")
        if not self.r > 1:
            raise ValueError(f"r must be > 1, got {self.r}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")

    @classmethod
    def for_sample_size(cls, n: int, c_L: float = 1.0, r: float = 1.3,
                        count: int = 10) -> "AlphaLadder":
        return cls(c_L, r, count, n)

    @property
    def alpha_1(self) -> float:
        return self.c_L * np.log(self.n) / np.sqrt(self.n)

    @property
    def values(self) -> np.ndarray:
        return self.alpha_1 * self.r ** np.arange(self.count)


def l2_distance(f, g, cell_volume: float) -> float:
    d = np.asarray(f) - np.asarray(g)
    return float(np.sqrt(np.dot(d, d) * cell_volume))


def balancing_index(estimates: Sequence[np.ndarray], r: float,
                    cell_volume: float) -> int:
    """Largest ``j`` with ``|f_i - f_j| <= 8 r^((1 - i) / 2)`` for all ``i < j``.

    Indices are 1-based as in the usual statement of the rule; ``j = 1``
    always qualifies.
    """
    m = len(estimates)
    best = 1
    for j in range(2, m + 1):
        if all(l2_distance(estimates[i - 1], estimates[j - 1], cell_volume)
               <= 8.0 * r ** ((1 - i) / 2) for i in range(1, j)):
            best = j
    return best


def lepskii(T, ladder: AlphaLadder, kind, opts: Optional[SolverOptions] = None):
    """Solve along the ladder and pick the balanced parameter.

    Returns
    -------
    alpha : float
    reports : list of EstimationReport, one per ladder value
    """
    if ladder.count < 2:
        raise ValueError("Lepskii's rule needs at least two ladder values")
    reports = [solve(T, a, kind, opts, "Lepskii") for a in ladder.values]
    j = balancing_index([rep.f.values for rep in reports], ladder.r,
                        T.grid.cell_volume)
    log.info("lepskii: j_bal = %d of %d (alpha = %g)", j, ladder.count,
             ladder.values[j - 1])
    return float(ladder.values[j - 1]), reports


def cv_loss(T_holdout, f_train) -> float:
    """``-sum_i log (T_holdout f_train)_i`` over the held-out rows."""
    grid = getattr(f_train, "grid", None)
    if grid is not None and grid != T_holdout.grid:
        raise ValueError("held-out operator and estimate use different grids")
    values = np.asarray(getattr(f_train, "values", f_train), dtype=float)
    Tf = T_holdout.matrix @ values
    return float(-np.sum(np.log(np.maximum(Tf, LIK_EPS))))


def make_folds(n: int, k: int, rng) -> list:
    """Shuffle ``range(n)`` once and cut it into ``k`` near-equal folds."""
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if k > n:
        raise ValueError(f"{k} folds requested for {n} samples")
    return np.array_split(rng.permutation(n), k)


def halving_search(candidates: Sequence[float], loss: Callable[[float], float],
                   rng):
    """Halving search over sorted ``candidates`` followed by a full scan.

    While more than three candidates remain, split the list at its middle,
    draw one value from each half, and keep the half whose draw scores
    lower.  Losses are cached so no value is scored twice.

    Returns
    -------
    alpha : float
    trace : list of dict
        One entry per halving step and a final ``scan`` entry.
    """
    alphas = [float(a) for a in candidates]
    if len(alphas) < 2:
        raise ValueError("need at least two candidate values")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("candidates must be strictly increasing")
    cache = {}

    def score(a):
        if a not in cache:
            cache[a] = loss(a)
        return cache[a]

    trace = []
    while len(alphas) > 3:
        j = len(alphas) // 2
        lower, upper = alphas[:j], alphas[j:]
        a = lower[rng.integers(len(lower))]
        b = upper[rng.integers(len(upper))]
        ja, jb = score(a), score(b)
        keep = "lower" if ja < jb else "upper"
        trace.append({"lower": lower, "upper": upper, "alpha_a": a,
                      "alpha_b": b, "J_a": ja, "J_b": jb, "kept": keep})
        alphas = lower if keep == "lower" else upper
    losses = [score(a) for a in alphas]
    best = alphas[int(np.argmin(losses))]
    trace.append({"scan": alphas, "J": losses, "alpha": best})
    return best, trace


def default_candidates(n: int, count: int = 16) -> np.ndarray:
    """Geometric candidate list spanning two decades around ``ln(n)/sqrt(n)``."""
    center = np.log(n) / np.sqrt(n)
    return center * np.logspace(-1, 1, count)


def cv_select(T, grid, k: int, candidates: Sequence[float], kind,
              opts: Optional[SolverOptions] = None, seed=0):
    """Choose alpha by k-fold cross-validation with halving search.

    Parameters
    ----------
    T : OperatorMatrix or array_like
        Operator for the full sample, or the sample itself (the operator
        is then built on ``grid``).  Fold operators are row slices, which
        is exact because every row depends on one sample only.
    grid : Grid
    k : int
        Number of folds.
    candidates : sorted sequence of float
    seed : int or numpy Generator
        Drives the shuffle and the draws within each half.

    Returns
    -------
    alpha : float
    trace : list of dict
        Halving steps, the final scan, and per-alpha fold losses under
        ``trace[-1]["fold_losses"]``.
    """
    if not isinstance(T, OperatorMatrix):
        T = build_operator(T, grid)
    elif grid != T.grid:
        raise ValueError("grid does not match the operator")
    rng = np.random.default_rng(seed)
    folds = make_folds(T.n, k, rng)
    fold_losses = {}

    def loss(alpha):
        total = []
        for j, hold in enumerate(folds):
            train = np.concatenate([folds[i] for i in range(k) if i != j])
            rep = solve(T.rows(np.sort(train)), alpha, kind, opts, "CV")
            total.append(cv_loss(T.rows(hold), rep.f))
        fold_losses[alpha] = total
        log.info("cv: alpha = %g, J = %g", alpha, sum(total))
        return float(sum(total))

    alpha, trace = halving_search(candidates, loss, rng)
    trace[-1]["fold_losses"] = fold_losses
    trace[-1]["folds"] = [len(f) for f in folds]
    return alpha, trace
