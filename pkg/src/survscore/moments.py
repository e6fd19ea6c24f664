"""Sequential risk-set probabilities, conditional moments, and Sigma-hat.

At each informative failure time the at-risk subjects carry weights
proportional to exp(beta(t)' Z_i(t)); the weighted mean and covariance of the
covariates under those weights are the building blocks of the residuals, the
standardized score process and the explained-variation ratio.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRiskSet
from .linalg import is_positive_definite, jacobi_eigh, sym_matrix_power, _clamped
from .transform import TransformedDataset


def _beta_at(beta, t: float, p: int) -> np.ndarray:
    if hasattr(beta, "evaluate"):
        return np.asarray(beta.evaluate(t), dtype=float).reshape(p)
    if callable(beta):
        return np.asarray(beta(t), dtype=float).reshape(p)
    return np.asarray(beta, dtype=float).reshape(p)


@dataclass
class RiskSetMoments:
    """Weights and conditional moments of the covariates at one grid point.

    ``pi`` is aligned with the at-risk subjects in transformed-time order
    (failing subject first).  ``cov_inv_sqrt`` is None when the covariance
    fails the positive-definiteness tolerance.
    """

    time: float
    pi: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    cov_sqrt: np.ndarray
    cov_inv_sqrt: np.ndarray | None

    def require_inv_sqrt(self) -> np.ndarray:
        if self.cov_inv_sqrt is None:
            raise DegenerateRiskSet(
                f"risk set at t={self.time:.6g} has a degenerate covariate spread"
            )
        return self.cov_inv_sqrt


def riskset_moments(data: TransformedDataset, t: float, beta) -> RiskSetMoments:
    """Moments over subjects with transformed time >= t, weighted at beta.

    ``beta`` may be a length-p vector, a TemporalEffect, or a callable of t;
    covariate paths are evaluated at the original-scale time of the failure.
    """
    i = data.grid_index(t)
    p = data.dimension
    b = _beta_at(beta, t, p)
    z = data.z_at_grid(i)
    eta = z @ b
    w = np.exp(eta - eta.max())
    w /= w.sum()
    mean = w @ z
    centered = z - mean
    cov = (centered * w[:, None]).T @ centered
    cov = 0.5 * (cov + cov.T)
    eigvals, vec = jacobi_eigh(cov)
    sqrt = (vec * np.sqrt(_clamped(eigvals))) @ vec.T
    if is_positive_definite(eigvals):
        inv_sqrt = (vec / np.sqrt(eigvals)) @ vec.T
        inv_sqrt = 0.5 * (inv_sqrt + inv_sqrt.T)
    else:
        inv_sqrt = None
    return RiskSetMoments(
        time=t, pi=w, mean=mean, cov=cov, cov_sqrt=0.5 * (sqrt + sqrt.T), cov_inv_sqrt=inv_sqrt
    )


def grid_moments(data: TransformedDataset, beta0) -> tuple[np.ndarray, np.ndarray]:
    """Conditional mean (k, p) and covariance (k, p, p) at every grid point.

    ``beta0`` is a constant vector; fixed covariates take a single pass of
    reverse cumulative sums over the risk-set ordering.
    """
    p = data.dimension
    b = np.asarray(beta0, dtype=float).reshape(p)
    z_sorted = data._fixed_z_sorted
    if z_sorted is None:
        means = np.empty((data.k_n, p))
        covs = np.empty((data.k_n, p, p))
        for i in range(1, data.k_n + 1):
            m = riskset_moments(data, i / data.k_n, b)
            means[i - 1] = m.mean
            covs[i - 1] = m.cov
        return means, covs
    shift = z_sorted.mean(axis=0)
    z0 = z_sorted - shift
    eta = z0 @ b
    w = np.exp(eta - eta.max())
    rc0 = np.cumsum(w[::-1])[::-1]
    rc1 = np.cumsum((w[:, None] * z0)[::-1], axis=0)[::-1]
    rc2 = np.cumsum(np.einsum("i,ij,ik->ijk", w, z0, z0)[::-1], axis=0)[::-1]
    starts = data.failure_positions
    s0 = rc0[starts]
    mean0 = rc1[starts] / s0[:, None]
    covs = rc2[starts] / s0[:, None, None] - np.einsum("ij,ik->ijk", mean0, mean0)
    return mean0 + shift, covs


@dataclass
class SigmaHat:
    """Grid average of the risk-set covariances and its inverse square root."""

    matrix: np.ndarray
    inv_sqrt: np.ndarray


def sigma_hat(data: TransformedDataset, beta0) -> SigmaHat:
    """Average the covariances over all k_n grid points at parameter beta0.

    Raises SingularMatrix when the average is not positive definite.
    """
    _, covs = grid_moments(data, beta0)
    avg = covs.mean(axis=0)
    avg = 0.5 * (avg + avg.T)
    return SigmaHat(matrix=avg, inv_sqrt=sym_matrix_power(avg, -0.5))
