"""Explained variation: the Q-hat functional and the R2 coefficient.

R2 compares the average squared residual under an evaluated effect with the
average squared residual under the null effect, both across the informative
failure grid.  With several covariates the residual is projected onto the
prognostic-index direction alpha(t) before squaring.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effects import TemporalEffect, as_effect_function
from .errors import ZeroDenominator
from .moments import grid_moments
from .transform import TransformedDataset


def _is_constant_vector(effect, p: int) -> np.ndarray | None:
    if isinstance(effect, TemporalEffect):
        if all(b.kind == "constant" for b in effect.bases):
            return effect.loadings
        return None
    if callable(effect):
        return None
    return np.asarray(effect, dtype=float).reshape(p)


def residuals_at(data: TransformedDataset, effect) -> np.ndarray:
    """Residuals r_{alpha(t_i)}(t_i) over the grid, as a (k_n, p) matrix."""
    p = data.dimension
    if data._fixed_z_sorted is not None:
        z_fail = data._fixed_z_sorted[data.failure_positions]
    else:
        z_fail = np.array([data.failing_z(i) for i in range(1, data.k_n + 1)])
    const = _is_constant_vector(effect, p)
    if const is not None and data._fixed_z_sorted is not None:
        means, _ = grid_moments(data, const)
        return z_fail - means
    fn = as_effect_function(effect, p)
    res = np.empty((data.k_n, p))
    for i in range(1, data.k_n + 1):
        t = i / data.k_n
        z = data.z_at_grid(i)
        eta = z @ fn(t)
        w = np.exp(eta - eta.max())
        w /= w.sum()
        res[i - 1] = z_fail[i - 1] - w @ z
    return res


def q_hat(data: TransformedDataset, alpha1, alpha2) -> float:
    """Average squared (projected) residual over the grid.

    For p = 1 the square of the raw residual at alpha1 is averaged and alpha2
    is unused; for p > 1 the residual at alpha1 is projected onto alpha2(t_i)
    before squaring.
    """
    p = data.dimension
    res = residuals_at(data, alpha1)
    if p == 1:
        return float(np.mean(res[:, 0] ** 2))
    fn2 = as_effect_function(alpha2, p)
    grid = data.grid[1:]
    proj = np.array([fn2(t) @ res[i] for i, t in enumerate(grid)])
    return float(np.mean(proj**2))


@dataclass
class R2Result:
    """R2 = 1 - numerator / denominator, with the evaluated effect attached."""

    value: float
    numerator: float
    denominator: float
    effect: object


def r_squared(data: TransformedDataset, effect) -> R2Result:
    """Explained-variation coefficient of the evaluated effect (Q-hat ratio)."""
    p = data.dimension
    num = q_hat(data, effect, effect)
    den = q_hat(data, np.zeros(p), effect)
    if den == 0.0:
        raise ZeroDenominator("null residual sum is zero; R2 undefined")
    return R2Result(value=1.0 - num / den, numerator=num, denominator=den, effect=effect)


def r_squared_limit_oracle(
    effect_true,
    effect_eval,
    scenario,
    n_oracle: int = 20000,
    grid_size: int = 200,
) -> float:
    """Large-n limit of R2(effect_eval) under data generated by effect_true.

    The population conditional moments e(., u) and v(., u) are estimated from
    one very large simulated failure sequence (the at-risk set at failure
    fraction u is a suffix of the order), then the limit ratio is integrated
    on a grid by the trapezoid rule.  Test-only oracle.
    """
    from .simulate import draw_failure_order  # deferred to avoid an import cycle

    p = scenario.p
    z_order = draw_failure_order(scenario, n_oracle)
    n = len(z_order)
    f_true = as_effect_function(effect_true, p)
    f_eval = as_effect_function(effect_eval, p)
    us = (np.arange(grid_size) + 0.5) / grid_size

    def moments(z, gamma):
        eta = z @ gamma
        w = np.exp(eta - eta.max())
        w /= w.sum()
        mean = w @ z
        centered = z - mean
        return mean, (centered * w[:, None]).T @ centered

    v_true = np.empty((grid_size, p, p))
    e_true = np.empty((grid_size, p))
    e_eval = np.empty((grid_size, p))
    e_null = np.empty((grid_size, p))
    a_eval = np.empty((grid_size, p))
    zero = np.zeros(p)
    for g, u in enumerate(us):
        z = z_order[int(np.floor(u * n)):]
        bt = np.asarray(f_true(u), dtype=float)
        at = np.asarray(f_eval(u), dtype=float)
        e_true[g], v_true[g] = moments(z, bt)
        e_eval[g], _ = moments(z, at)
        e_null[g], _ = moments(z, zero)
        a_eval[g] = at

    if p == 1:
        vterm = np.trapezoid(v_true[:, 0, 0], us)
        num = vterm + np.trapezoid((e_eval[:, 0] - e_true[:, 0]) ** 2, us)
        den = vterm + np.trapezoid((e_null[:, 0] - e_true[:, 0]) ** 2, us)
    else:
        quad = np.einsum("gj,gjk,gk->g", a_eval, v_true, a_eval)
        vterm = np.trapezoid(quad, us)
        num = vterm + np.trapezoid(np.einsum("gj,gj->g", a_eval, e_true - e_eval) ** 2, us)
        den = vterm + np.trapezoid(np.einsum("gj,gj->g", a_eval, e_true - e_null) ** 2, us)
    if den == 0.0:
        return 0.0
    return float(1.0 - num / den)
