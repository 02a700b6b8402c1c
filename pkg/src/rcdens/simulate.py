"""Synthetic samples from the random coefficients model."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np


def default_mixture(dim: int):
    """Mixture used when no coefficient distribution is given."""
    if dim == 2:
        mu = [[-0.5, -0.5], [0.5, 0.5]]
        cov = [0.01 * np.eye(2)] * 2
        return mu, cov, [0.5, 0.5]
    if dim == 3:
        return [[2.0, 2.0, 2.0]], [0.01 * np.eye(3)], [1.0]
    raise ValueError(f"dim must be 2 or 3, got {dim}")


def _cholesky_psd(cov):
    cov = np.asarray(cov, dtype=float)
    if not np.allclose(cov, cov.T):
        raise ValueError("covariance matrix is not symmetric")
    w, V = np.linalg.eigh(cov)
    if w.min() < -1e-12 * max(1.0, abs(w.max())):
        raise ValueError("covariance matrix is not positive semi-definite")
    # eigen-factor handles singular covariances that Cholesky rejects
    return V * np.sqrt(np.clip(w, 0, None))


def sim_sample(n: int, dim: int,
               beta_mu: Optional[Sequence] = None,
               beta_cov: Optional[Sequence] = None,
               weights: Optional[Sequence[float]] = None,
               x_low: float = -2.0, x_high: float = 2.0,
               seed=None, intercept: bool = True,
               noise_sd: float = 0.0,
               return_beta: bool = False):
    """Draw ``n`` observations ``[X_0, ..., X_{dim-1}, Y]``.

    Coefficients come from a gaussian mixture, regressors are i.i.d.
    ``U(x_low, x_high)`` and ``Y = beta . X`` exactly unless ``noise_sd``
    adds a gaussian error.  With ``intercept`` the first regressor is the
    constant 1.

    Parameters
    ----------
    beta_mu : list of mean vectors, optional
    beta_cov : list of covariance matrices, optional
        Defaults to ``0.01 * I`` for every component.
    weights : list of float, optional
        Defaults to equal weights.
    return_beta : bool
        Also return the drawn coefficients.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if beta_mu is None and beta_cov is None and weights is None:
        beta_mu, beta_cov, weights = default_mixture(dim)
    elif beta_mu is None:
        raise ValueError("beta_cov/weights given without beta_mu")

    mu = np.asarray(beta_mu, dtype=float)
    if mu.ndim == 1:
        mu = mu[None, :]
    ncomp = mu.shape[0]
    if mu.shape[1] != dim:
        raise ValueError(f"means must have length {dim}")
    if beta_cov is None:
        beta_cov = [0.01 * np.eye(dim)] * ncomp
    covs = np.asarray(beta_cov, dtype=float)
    if covs.ndim == 2:
        covs = covs[None]
    if covs.shape != (ncomp, dim, dim):
        raise ValueError(f"need {ncomp} covariance matrices of shape "
                         f"({dim}, {dim})")
    if weights is None:
        weights = np.full(ncomp, 1.0 / ncomp)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (ncomp,) or np.any(weights < 0) or \
            not np.isclose(weights.sum(), 1.0):
        raise ValueError("weights must be nonnegative, one per component, "
                         "and sum to 1")
    factors = [_cholesky_psd(c) for c in covs]

    rng = np.random.default_rng(seed)
    comp = np.searchsorted(np.cumsum(weights), rng.random(n), side="right")
    comp = np.minimum(comp, ncomp - 1)
    z = rng.standard_normal((n, dim))
    beta = np.empty((n, dim))
    for c in range(ncomp):
        sel = comp == c
        beta[sel] = mu[c] + z[sel] @ factors[c].T

    X = rng.uniform(x_low, x_high, size=(n, dim))
    if intercept:
        X[:, 0] = 1.0
    Y = np.einsum("ij,ij->i", X, beta)
    if noise_sd > 0:
        Y = Y + noise_sd * rng.standard_normal(n)
    sample = np.column_stack([X, Y])
    if return_beta:
        return sample, beta
    return sample
