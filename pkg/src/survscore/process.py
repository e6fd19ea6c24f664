"""Standardized score process, confidence bands, and the bridge sup statistic.

The process cumulates the per-failure residuals, each pre-whitened by the
risk-set covariance inverse square root and scaled by 1/sqrt(k_n).  Under a
constant effect equal to the evaluation parameter it behaves like Brownian
motion, and the bridged, globally standardized version obeys the Kolmogorov
law, which yields linear confidence envelopes around the chord.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effects import TemporalEffect
from .errors import DegenerateRiskSet, SingularMatrix
from .kolmogorov import kolmogorov_quantile
from .linalg import PD_RTOL, is_positive_definite, jacobi_eigh, sym_matrix_power
from .moments import SigmaHat, grid_moments
from .transform import TransformedDataset


@dataclass
class ScoreProcessTrace:
    """The interpolated score process evaluated at a fixed parameter.

    ``values[j]`` is U* at grid time j/k_n (row 0 is zero); ``increments``
    holds the standardized residual vectors before the 1/sqrt(k_n) cumulation,
    so values[j] - values[j-1] == increments[j-1]/sqrt(k_n) exactly.
    ``standardized_values`` is Sigma-hat^{-1/2} applied to each row; it is
    None when the averaged covariance is not positive definite.
    """

    beta0: np.ndarray
    grid: np.ndarray
    values: np.ndarray
    increments: np.ndarray
    sigma_hat: SigmaHat | None
    standardized_values: np.ndarray | None

    @property
    def k_n(self) -> int:
        return len(self.grid) - 1

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def value_at(self, u: float) -> np.ndarray:
        """Linear interpolation between grid points."""
        return np.array([np.interp(u, self.grid, self.values[:, j]) for j in range(self.dimension)])

    def standardized_at(self, u: float) -> np.ndarray:
        s = self.require_standardized()
        return np.array([np.interp(u, self.grid, s[:, j]) for j in range(self.dimension)])

    def require_standardized(self) -> np.ndarray:
        if self.standardized_values is None:
            raise SingularMatrix("averaged risk-set covariance is not positive definite")
        return self.standardized_values


def score_process(data: TransformedDataset, beta0) -> ScoreProcessTrace:
    """Build U*(beta0, .) on the grid 0, 1/k_n, ..., 1."""
    p = data.dimension
    b = np.asarray(beta0, dtype=float).reshape(p)
    if data.k_n < 2:
        raise ValueError("score process needs at least two informative failures")
    means, covs = grid_moments(data, b)
    if data._fixed_z_sorted is not None:
        z_fail = data._fixed_z_sorted[data.failure_positions]
    else:
        z_fail = np.array([data.failing_z(i) for i in range(1, data.k_n + 1)])
    residuals = z_fail - means
    increments = np.empty_like(residuals)
    if p == 1:
        var = covs[:, 0, 0]
        bad = var <= PD_RTOL * (1.0 + var)
        if bad.any():
            j = int(np.flatnonzero(bad)[0])
            raise DegenerateRiskSet(
                f"risk set at t={(j + 1) / data.k_n:.6g} has a degenerate covariate spread"
            )
        increments[:, 0] = residuals[:, 0] / np.sqrt(var)
    else:
        for i in range(data.k_n):
            eigvals, vec = jacobi_eigh(covs[i])
            if not is_positive_definite(eigvals):
                raise DegenerateRiskSet(
                    f"risk set at t={(i + 1) / data.k_n:.6g} has a degenerate covariate spread"
                )
            inv_sqrt = (vec / np.sqrt(eigvals)) @ vec.T
            increments[i] = inv_sqrt @ residuals[i]
    values = np.vstack([np.zeros((1, p)), np.cumsum(increments / np.sqrt(data.k_n), axis=0)])
    avg = covs.mean(axis=0)
    avg = 0.5 * (avg + avg.T)
    try:
        sig = SigmaHat(matrix=avg, inv_sqrt=sym_matrix_power(avg, -0.5))
        standardized = values @ sig.inv_sqrt
    except SingularMatrix:
        sig, standardized = None, None
    return ScoreProcessTrace(
        beta0=b,
        grid=data.grid,
        values=values,
        increments=increments,
        sigma_hat=sig,
        standardized_values=standardized,
    )


def expected_drift(effect, beta0, sigma, k_n: int, t: float) -> np.ndarray:
    """Theoretical mean curve sqrt(k_n) * Sigma^{1/2} * int_0^t (beta(s) - beta0) ds.

    ``effect`` is a TemporalEffect (closed-form integral) or a callable of t
    (1024-point trapezoid).  Used by tests and the simulation harness.
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    p = sigma.shape[0]
    b0 = np.asarray(beta0, dtype=float).reshape(p)
    if isinstance(effect, TemporalEffect):
        integral = effect.integral(float(t))
    else:
        if t == 0:
            integral = np.zeros(p)
        else:
            s = np.linspace(0.0, float(t), 1024)
            vals = np.array([np.asarray(effect(x), dtype=float).reshape(p) for x in s])
            integral = np.trapezoid(vals, s, axis=0)
    half = sym_matrix_power(sigma, 0.5)
    return np.sqrt(k_n) * (half @ (integral - b0 * float(t)))


@dataclass
class ConfidenceBand:
    """Linear envelope around the chord of one standardized component.

    lower(t) = slope*t - half_width, upper(t) = slope*t + half_width.
    """

    component: int
    alpha: float
    slope: float
    half_width: float
    crossed: bool
    crossing_time: float | None

    def lower(self, t):
        return self.slope * np.asarray(t, dtype=float) - self.half_width

    def upper(self, t):
        return self.slope * np.asarray(t, dtype=float) + self.half_width


def _first_crossing(grid: np.ndarray, bridge: np.ndarray, half: float) -> float | None:
    """Earliest time a piecewise-linear bridge leaves [-half, half]."""
    for j in range(1, len(grid)):
        d0, d1 = bridge[j - 1], bridge[j]
        if abs(d1) <= half:
            continue
        boundary = half if d1 > half else -half
        if abs(d0) > half:  # already outside at the segment start
            return float(grid[j - 1])
        frac = (boundary - d0) / (d1 - d0)
        return float(grid[j - 1] + frac * (grid[j] - grid[j - 1]))
    return None


def confidence_bands(trace: ScoreProcessTrace, alpha: float) -> list[ConfidenceBand]:
    """Per-component envelopes of half-width ||col_i(Sigma-hat^{-1/2})|| * a(alpha)."""
    s = trace.require_standardized()
    a = kolmogorov_quantile(alpha)
    inv_sqrt = trace.sigma_hat.inv_sqrt
    bands = []
    for i in range(trace.dimension):
        slope = float(s[-1, i])
        half = float(np.linalg.norm(inv_sqrt[:, i])) * a
        bridge = s[:, i] - trace.grid * slope
        crossing = _first_crossing(trace.grid, bridge, half)
        bands.append(
            ConfidenceBand(
                component=i + 1,
                alpha=alpha,
                slope=slope,
                half_width=half,
                crossed=crossing is not None,
                crossing_time=crossing,
            )
        )
    return bands


def bridge_sup_statistic(trace: ScoreProcessTrace, component: int) -> float:
    """Normalized sup of the bridged standardized process for one component.

    The process and its chord are both piecewise linear, so the sup over
    [0, 1] is attained at a grid point.  Reject a constant effect at level
    alpha when the statistic exceeds the Kolmogorov quantile a(alpha).
    """
    s = trace.require_standardized()
    i = component - 1
    bridge = s[:, i] - trace.grid * s[-1, i]
    norm = float(np.linalg.norm(trace.sigma_hat.inv_sqrt[:, i]))
    return float(np.abs(bridge).max() / norm)


def band_decisions(trace: ScoreProcessTrace, alpha: float) -> list[dict]:
    """Per-component test summary: sup statistic, threshold, verdict."""
    a = kolmogorov_quantile(alpha)
    out = []
    for band in confidence_bands(trace, alpha):
        stat = bridge_sup_statistic(trace, band.component)
        out.append(
            {
                "component": band.component,
                "sup_statistic": stat,
                "threshold": a,
                "alpha": alpha,
                "reject_constant_effect": bool(band.crossed),
                "crossing_time": band.crossing_time,
            }
        )
    return out
