"""Rank-based time transform onto the [0, 1] failure-fraction scale.

The i-th informative failure is mapped to ``i / k_n`` and censored subjects
are interleaved inside their inter-failure interval, preserving the original
ranking.  ``k_n`` counts the leading failures whose covariate spread (over
subjects that have not yet failed) is positive definite; later failures get
transformed times above 1 and take no grid slot, but they stay in the risk
sets of earlier grid points through the original-scale ordering.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import SurvivalDataset
from .errors import NoInformativeFailures
from .linalg import PD_RTOL, is_positive_definite, jacobi_eigh


def _sorted_order(dataset: SurvivalDataset) -> np.ndarray:
    """Subject indices sorted by (time, failures first, id)."""
    times = np.array([s.observed_time for s in dataset.subjects], dtype=float)
    inv_status = np.array([1 - s.status for s in dataset.subjects], dtype=int)
    ids = np.array([s.id for s in dataset.subjects])
    return np.lexsort((ids, inv_status, times))


def _pool_weights(z: np.ndarray, beta: np.ndarray) -> np.ndarray:
    eta = z @ beta
    w = np.exp(eta - eta.max())
    return w / w.sum()


def _weighted_cov(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    mean = w @ z
    centered = z - mean
    return (centered * w[:, None]).T @ centered


def _pd_prefix_fixed(z_fail: np.ndarray, z_cens: np.ndarray, beta: np.ndarray) -> int:
    """Length of the leading run of failures whose pool covariance is PD.

    The pool at failure f consists of failures f.. plus every censored
    subject; suffix sums over failures make all pools one reverse cumsum.
    """
    p = z_fail.shape[1]
    shift = np.vstack([z_fail, z_cens]).mean(axis=0) if len(z_fail) + len(z_cens) else 0.0
    zf = z_fail - shift
    zc = z_cens - shift
    eta_f = zf @ beta
    eta_c = zc @ beta
    top = max(eta_f.max(initial=-np.inf), eta_c.max(initial=-np.inf))
    wf = np.exp(eta_f - top)
    wc = np.exp(eta_c - top)
    s0 = np.cumsum(wf[::-1])[::-1] + wc.sum()
    s1 = np.cumsum((wf[:, None] * zf)[::-1], axis=0)[::-1] + wc @ zc
    outer = np.einsum("i,ij,ik->ijk", wf, zf, zf)
    s2 = np.cumsum(outer[::-1], axis=0)[::-1] + np.einsum("i,ij,ik->jk", wc, zc, zc)
    mean = s1 / s0[:, None]
    cov = s2 / s0[:, None, None] - np.einsum("ij,ik->ijk", mean, mean)
    if p == 1:
        var = cov[:, 0, 0]
        ok = var > PD_RTOL * (1.0 + var)
    else:
        ok = np.empty(len(z_fail), dtype=bool)
        for f in range(len(z_fail)):
            ok[f] = is_positive_definite(jacobi_eigh(cov[f])[0])
            if not ok[f]:
                ok[f:] = False
                break
    bad = np.flatnonzero(~ok)
    return int(bad[0]) if len(bad) else len(z_fail)


def count_informative_failures(dataset: SurvivalDataset, beta0=None) -> int:
    """Number of leading failures with a positive-definite covariate spread.

    The spread at each failure is taken over subjects that have not failed
    before it; the evaluation parameter only reweights the pool and cannot
    change the rank of the spread, so any finite ``beta0`` (default 0) gives
    the same count.  Returns 0 when every failure's pool is degenerate.
    """
    p = dataset.dimension
    beta = np.zeros(p) if beta0 is None else np.asarray(beta0, dtype=float).reshape(p)
    order = _sorted_order(dataset)
    subjects = dataset.subjects
    fail_pos = [i for i in order if subjects[i].status == 1]
    cens_pos = [i for i in order if subjects[i].status == 0]
    if not fail_pos:
        return 0
    zmat = dataset.fixed_covariate_matrix()
    if zmat is not None:
        return _pd_prefix_fixed(zmat[fail_pos], zmat[cens_pos].reshape(-1, p), beta)
    k = 0
    for f, idx in enumerate(fail_pos):
        t_fail = subjects[idx].observed_time
        pool = fail_pos[f:] + cens_pos
        z = np.array([subjects[j].covariates.at(t_fail) for j in pool], dtype=float)
        cov = _weighted_cov(z, _pool_weights(z, beta))
        if p == 1:
            ok = is_positive_definite(np.array([cov[0, 0]]))
        else:
            ok = is_positive_definite(jacobi_eigh(cov)[0])
        if not ok:
            break
        k += 1
    return k


@dataclass
class TransformedDataset:
    """A dataset re-indexed on the [0, 1] rank time scale.

    ``order`` lists subject indices sorted by (time, failures first, id);
    ``phi`` holds the transformed time of each subject (aligned with the
    source subject order).  The risk set at grid point ``i / k_n`` is the
    suffix of ``order`` starting at ``failure_positions[i - 1]``, whose first
    element is the failing subject itself.
    """

    source: SurvivalDataset
    k_n: int
    order: np.ndarray
    phi: np.ndarray
    failure_positions: np.ndarray     # sorted-order position of the i-th informative failure
    grid_original_times: np.ndarray   # original time of the i-th informative failure
    excluded_failures: list[str]      # ids of late failures with degenerate spread
    _fixed_z_sorted: np.ndarray | None = field(default=None, repr=False)
    _step_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def dimension(self) -> int:
        return self.source.dimension

    @property
    def grid(self) -> np.ndarray:
        """Grid times 0, 1/k_n, ..., 1."""
        return np.arange(self.k_n + 1, dtype=float) / self.k_n

    @property
    def transformed_times(self) -> dict[str, float]:
        return {s.id: float(self.phi[i]) for i, s in enumerate(self.source.subjects)}

    @property
    def failure_grid(self) -> list[tuple[float, str]]:
        subjects = self.source.subjects
        return [
            ((i + 1) / self.k_n, subjects[self.order[pos]].id)
            for i, pos in enumerate(self.failure_positions)
        ]

    def grid_index(self, t: float) -> int:
        """Map a grid time to its 1-based index, validating it is on the grid."""
        i = int(round(t * self.k_n))
        if i < 1 or i > self.k_n or abs(i / self.k_n - t) > 1e-9:
            raise ValueError(f"{t} is not an informative failure grid point")
        return i

    def risk_start(self, i: int) -> int:
        return int(self.failure_positions[i - 1])

    def z_at_grid(self, i: int) -> np.ndarray:
        """Covariates of the at-risk subjects at grid point i (failing subject first).

        Paths are evaluated at the original-scale time of the i-th failure.
        """
        pos = self.risk_start(i)
        if self._fixed_z_sorted is not None:
            return self._fixed_z_sorted[pos:]
        if i not in self._step_cache:
            t = self.grid_original_times[i - 1]
            subjects = self.source.subjects
            self._step_cache[i] = np.array(
                [subjects[j].covariates.at(t) for j in self.order[pos:]], dtype=float
            )
        return self._step_cache[i]

    def failing_z(self, i: int) -> np.ndarray:
        return self.z_at_grid(i)[0]


def time_transform(dataset: SurvivalDataset, beta0=None) -> TransformedDataset:
    """Apply the rank-based transform, raising when no failure is informative."""
    k_n = count_informative_failures(dataset, beta0)
    if k_n == 0:
        raise NoInformativeFailures("every failure's covariate spread is degenerate")
    subjects = dataset.subjects
    order = _sorted_order(dataset)

    # Sequential failure count: nbar[i] = failures observed up to and including
    # subject i's own time (the subject itself when it fails; tied failures
    # precede tied censorings in the sort order).
    nbar_sorted = np.zeros(len(order), dtype=int)
    fail_index_sorted = np.zeros(len(order), dtype=int)  # 1-based among failures, 0 for censored
    fails = 0
    for pos, idx in enumerate(order):
        if subjects[idx].status == 1:
            fails += 1
            fail_index_sorted[pos] = fails
        nbar_sorted[pos] = fails

    phi_sorted = np.zeros(len(order), dtype=float)
    # Failures: N / k_n (above 1 for late, non-informative failures).
    is_fail = fail_index_sorted > 0
    phi_sorted[is_fail] = fail_index_sorted[is_fail] / k_n
    # Censored subjects: interleave within the group sharing their failure
    # count, in sort order, as (nbar + rank/group_size) / k_n.
    cens_positions = np.flatnonzero(~is_fail)
    for m in np.unique(nbar_sorted[cens_positions]):
        group = np.flatnonzero(nbar_sorted == m)  # sorted positions, failure (if any) first
        den = len(group)
        for rank_in_group, pos in enumerate(group):
            if not is_fail[pos]:
                phi_sorted[pos] = (m + rank_in_group / den) / k_n

    phi = np.zeros(dataset.n, dtype=float)
    phi[order] = phi_sorted

    failure_positions = np.flatnonzero((fail_index_sorted >= 1) & (fail_index_sorted <= k_n))
    grid_original_times = np.array(
        [subjects[order[pos]].observed_time for pos in failure_positions], dtype=float
    )
    excluded = [subjects[order[pos]].id for pos in np.flatnonzero(fail_index_sorted > k_n)]

    zmat = dataset.fixed_covariate_matrix()
    fixed_sorted = zmat[order] if zmat is not None else None
    return TransformedDataset(
        source=dataset,
        k_n=k_n,
        order=order,
        phi=phi,
        failure_positions=failure_positions,
        grid_original_times=grid_original_times,
        excluded_failures=excluded,
        _fixed_z_sorted=fixed_sorted,
    )
