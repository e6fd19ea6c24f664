"""Kolmogorov distribution: law of the sup of |Brownian bridge| on [0, 1]."""
from __future__ import annotations

import math


def kolmogorov_cdf(a: float) -> float:
    """P(sup_t |B(t)| <= a) via the alternating series, truncated at 1e-12."""
    if a < 0:
        raise ValueError("a must be nonnegative")
    if a == 0.0:
        return 0.0
    total = 0.0
    sign = 1.0
    for k in range(1, 100000):
        term = math.exp(-2.0 * k * k * a * a)
        if term < 1e-12:
            break
        total += sign * term
        sign = -sign
    return max(0.0, min(1.0, 1.0 - 2.0 * total))


def kolmogorov_quantile(alpha: float) -> float:
    """Upper-alpha point a with kolmogorov_cdf(a) = 1 - alpha (bisection on [0.3, 3.5])."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    target = 1.0 - alpha
    lo, hi = 0.3, 3.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < 1e-10:
            break
        if kolmogorov_cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
