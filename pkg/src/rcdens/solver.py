"""Constrained minimisation of the penalised likelihood.

The feasible set ``{f >= 0, sum(f) * dv = 1}`` is a scaled simplex, so
Euclidean projection onto it is exact and cheap.  The solver is a
monotone spectral projected gradient method: Barzilai-Borwein trial
steps, projected onto the simplex, with Armijo backtracking along the
resulting feasible direction.  For the entropy penalty the projection is
taken in the diagonal metric ``diag(1 / f)``, which matches the curvature
of ``f log f``; the other penalties use the plain Euclidean metric.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .likelihood import (ENT_EPS, DensityEstimate, PenaltyKind,
                         neg_avg_loglik, objective)

ALPHA_METHODS = ("Lepskii", "CV", "User")

ARMIJO_C = 1e-4
SHRINK = 0.5
STEP_MIN, STEP_MAX = 1e-12, 1e12
MAX_EMPTY_FRACTION = 0.5


class SolverError(RuntimeError):
    pass


@dataclass
class SolverOptions:
    tolerance: float = 1e-6
    max_iter: int = 100
    initial_guess: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        self.max_iter = int(self.max_iter)


@dataclass
class EstimationReport:
    """Solution of one penalised likelihood problem plus metadata."""

    f: DensityEstimate
    alpha: float
    alpha_method: str
    operator: object = None
    penalty: PenaltyKind = PenaltyKind.NONE
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha_method not in ALPHA_METHODS:
            raise ValueError(f"alpha_method must be one of {ALPHA_METHODS}")

    @property
    def grid(self):
        return self.f.grid

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def f_shaped(self) -> np.ndarray:
        return self.f.shaped

    @property
    def alpmth(self) -> str:
        return self.alpha_method

    @property
    def T(self):
        return self.operator

    @property
    def Tmat(self):
        return None if self.operator is None else self.operator.matrix

    def ev(self):
        from .results import expected_value
        return expected_value(self)

    def maxval(self):
        from .results import maxval
        return maxval(self)

    def mode(self, top: Optional[int] = None):
        from .results import modes
        return modes(self, top)


def project_simplex(v, mass: float = 1.0) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{x >= 0, sum(x) = mass}``.

    Sort-and-threshold: find the largest ``rho`` with
    ``u_rho > (cumsum(u)_rho - mass) / rho`` for ``u`` sorted descending,
    then shift and clip.
    """
    if not mass > 0:
        raise ValueError(f"mass must be > 0, got {mass}")
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - mass
    ind = np.arange(1, v.size + 1)
    # index 0 always qualifies; huge inputs can lose that to rounding
    hits = np.nonzero(u * ind > css)[0]
    rho = hits[-1] if hits.size else 0
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def project_simplex_weighted(z, w, mass: float = 1.0) -> np.ndarray:
    """Projection onto the simplex in the norm ``sum w_j x_j**2``.

    The solution has the form ``x_j = max(z_j - theta / w_j, 0)``; the
    threshold is found by the same sort-and-scan as the unweighted case
    with breakpoints ``z_j w_j``.
    """
    z = np.asarray(z, dtype=float)
    c = 1.0 / np.asarray(w, dtype=float)
    b = z / c
    order = np.argsort(-b, kind="stable")
    num = np.cumsum(z[order]) - mass
    den = np.cumsum(c[order])
    theta_r = num / den
    hits = np.nonzero(b[order] > theta_r)[0]
    rho = hits[-1] if hits.size else 0
    return np.maximum(z - theta_r[rho] * c, 0.0)


def _project(v, mass, floor, w=None):
    if w is None:
        x = project_simplex(v, mass)
    else:
        x = project_simplex_weighted(v, w, mass)
    if floor > 0:
        # entropy needs strictly positive iterates
        x = np.maximum(x, floor)
        x *= mass / x.sum()
    return x


def _kkt_residual(f, g, mass, floor):
    return float(np.max(np.abs(f - _project(f - g, mass, floor))))


def solve(T, alpha: float, kind=PenaltyKind.NONE,
          opts: Optional[SolverOptions] = None,
          alpha_method: str = "User") -> EstimationReport:
    """Minimise ``objective(T, f, alpha, kind)`` over densities on T's grid.

    Terminates when the projected-gradient residual
    ``max|f - P(f - grad F(f))|`` drops to ``opts.tolerance`` or after
    ``opts.max_iter`` iterations; ``details["converged"]`` tells which.
    """
    if alpha < 0 or not np.isfinite(alpha):
        raise ValueError(f"alpha must be a finite number >= 0, got {alpha}")
    opts = SolverOptions() if opts is None else opts
    kind = PenaltyKind.parse(kind)
    grid = T.grid
    n = T.n
    empty = getattr(T, "empty_rows", 0)
    if empty > MAX_EMPTY_FRACTION * n:
        raise SolverError(
            f"{empty} of {n} hyperplanes miss the grid; enlarge the grid ranges")

    t0 = time.perf_counter()
    dv = grid.cell_volume
    mass = 1.0 / dv
    floor = ENT_EPS if (kind is PenaltyKind.ENTROPY and alpha > 0) else 0.0
    # the entropy curvature alpha * dv / f is badly scaled in the euclidean
    # metric; measure steps in diag(1 / f) instead
    scaled = floor > 0

    if opts.initial_guess is None:
        f = np.full(grid.m, mass / grid.m)
    else:
        f0 = np.asarray(opts.initial_guess, dtype=float)
        if f0.shape != (grid.m,):
            raise ValueError("initial_guess has the wrong length")
        f = _project(f0, mass, floor)

    def fg(x):
        return objective(T, x, alpha, kind)

    F, g = fg(f)
    history = [F]
    step = None
    converged = False
    stalled = False
    n_evals = 1
    it = 0
    res = _kkt_residual(f, g, mass, floor)
    while True:
        if res <= opts.tolerance:
            converged = True
            break
        if it >= opts.max_iter:
            break
        if step is None:
            # first trial moves the largest entry by about 10% of max(f)
            gmax = float(np.max(np.abs(g - g.mean())))
            step = 0.1 * float(np.max(f)) / gmax if gmax > 0 else 1.0
            if scaled:
                step /= float(np.max(f))
            step = float(np.clip(step, STEP_MIN, STEP_MAX))
        if scaled:
            w = 1.0 / f
            d = _project(f - step * g / w, mass, floor, w) - f
        else:
            d = _project(f - step * g, mass, floor) - f
        slope = float(np.dot(g, d))
        if slope >= 0:
            stalled = True
            break
        lam = 1.0
        while True:
            f_new = f + lam * d
            F_new, g_new = fg(f_new)
            n_evals += 1
            if F_new <= F + ARMIJO_C * lam * slope:
                break
            lam *= SHRINK
            if lam < 1e-20:
                break
        if not F_new <= F + ARMIJO_C * lam * slope:
            stalled = True
            break
        s = f_new - f
        yv = g_new - g
        sy = float(np.dot(s, yv))
        ss = float(np.dot(s, s / f)) if scaled else float(np.dot(s, s))
        step = ss / sy if sy > 0 else STEP_MAX
        step = float(np.clip(step, STEP_MIN, STEP_MAX))
        f, F, g = f_new, F_new, g_new
        history.append(F)
        it += 1
        res = _kkt_residual(f, g, mass, floor)

    lik_details = {}
    neg_avg_loglik(T, f, lik_details)
    details = {
        "iterations": it,
        "function_evals": n_evals,
        "objective": F,
        "kkt_residual": res,
        "converged": converged,
        "stalled": stalled,
        "metric": "scaled" if scaled else "euclidean",
        "terminated_by": ("tolerance" if converged else
                          "stall" if stalled else "max_iter"),
        "lik_clamped": lik_details["lik_clamped"],
        "empty_rows": empty,
        "history": history,
        "wall_time": time.perf_counter() - t0,
    }
    return EstimationReport(DensityEstimate(f, grid), float(alpha),
                            alpha_method, T, kind, details)


def rmle(kind, alpha, T, **kwargs) -> EstimationReport:
    """Convenience front end accepting ``alpha`` as a number, 'lepskii' or 'cv'.

    Keyword arguments ``k``, ``seed``, ``tolerance``, ``max_iter``,
    ``initial_guess`` and ``shift`` are forwarded to the relevant routine.
    """
    from .select import AlphaLadder, cv_select, lepskii, default_candidates
    from .shift import shift_estimate

    opts = SolverOptions(kwargs.pop("tolerance", 1e-6),
                         kwargs.pop("max_iter", 100),
                         kwargs.pop("initial_guess", None))
    seed = kwargs.pop("seed", 0)
    k = kwargs.pop("k", 10)
    shift = kwargs.pop("shift", False)
    if kwargs:
        raise TypeError(f"unexpected arguments {sorted(kwargs)}")

    method = "User"
    if isinstance(alpha, str):
        choice = alpha.lower()
        if choice == "lepskii":
            alpha, _ = lepskii(T, AlphaLadder.for_sample_size(T.n), kind, opts)
            method = "Lepskii"
        elif choice == "cv":
            alpha, _ = cv_select(T, T.grid, k, default_candidates(T.n), kind,
                                 opts, seed=seed)
            method = "CV"
        else:
            raise ValueError(f"alpha must be a number, 'lepskii' or 'cv'")
    if shift:
        return shift_estimate(T.sample, T.grid, alpha, kind, opts, seed=seed,
                              alpha_method=method)
    return solve(T, float(alpha), kind, opts, method)
