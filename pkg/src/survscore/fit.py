"""Partial-likelihood fitting of temporal effects and R2-guided selection.

Fitting beta(t) = beta0 * B(t) with a known shape B reduces to a constant
coefficient on the constructed time-dependent covariates W_j(t) = B(t) Z_j(t),
so one Newton iteration on the usual log partial likelihood (over the k_n
informative failure times) covers every basis shape.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effects import Basis, CandidateSet, ChangepointBasis, TemporalEffect
from .errors import (
    AllCandidatesFailed,
    DegenerateSegment,
    MonotoneLikelihood,
    Nonconvergence,
    SingularInformation,
    SurvScoreError,
)
from .linalg import is_positive_definite, jacobi_eigh
from .predictive import R2Result, r_squared
from .process import ScoreProcessTrace, score_process
from .transform import TransformedDataset

MAX_ITER = 100
MAX_HALVINGS = 20
SEPARATION_NORM = 50.0


@dataclass
class FitResult:
    """A converged maximum partial likelihood fit of one basis specification."""

    effect: TemporalEffect
    loglik: float
    iterations: int
    converged: bool
    r2: R2Result
    score: np.ndarray
    information: np.ndarray

    @property
    def score_norm(self) -> float:
        return float(np.linalg.norm(self.score))


def _normalize_bases(bases, p: int) -> tuple[Basis, ...]:
    if isinstance(bases, Basis):
        bases = (bases,)
    bases = tuple(bases)
    if len(bases) != p:
        raise ValueError(f"need one basis per component ({p}), got {len(bases)}")
    return bases


class _PartialLikelihood:
    """Log partial likelihood over the grid for W(t) = B(t) * Z(t)."""

    def __init__(self, data: TransformedDataset, bases: tuple[Basis, ...]):
        self.p = data.dimension
        grid = data.grid[1:]
        bmat = np.column_stack(
            [np.broadcast_to(b.value(grid), grid.shape) for b in bases]
        )
        self.w_sets = [data.z_at_grid(i) * bmat[i - 1] for i in range(1, data.k_n + 1)]

    def loglik(self, beta: np.ndarray) -> float:
        ll = 0.0
        for w_set in self.w_sets:
            eta = w_set @ beta
            top = eta.max()
            ll += eta[0] - np.log(np.exp(eta - top).sum()) - top
        return float(ll)

    def loglik_score_info(self, beta: np.ndarray):
        ll = 0.0
        score = np.zeros(self.p)
        info = np.zeros((self.p, self.p))
        for w_set in self.w_sets:
            eta = w_set @ beta
            top = eta.max()
            w = np.exp(eta - top)
            s0 = w.sum()
            ll += eta[0] - np.log(s0) - top
            mean = (w @ w_set) / s0
            centered = w_set - mean
            score += centered[0]
            info += (centered * w[:, None]).T @ centered / s0
        return float(ll), score, 0.5 * (info + info.T)


def fit_partial_likelihood(data: TransformedDataset, bases) -> FitResult:
    """Newton-Raphson with step halving, starting from 0.

    Raises MonotoneLikelihood on separation, SingularInformation on a
    rank-deficient information matrix, Nonconvergence after 100 iterations.
    """
    p = data.dimension
    bases = _normalize_bases(bases, p)
    if data.k_n < p:
        raise SingularInformation(f"k_n={data.k_n} grid points cannot identify {p} loadings")
    pl = _PartialLikelihood(data, bases)
    beta = np.zeros(p)
    ll, score, info = pl.loglik_score_info(beta)
    iterations = 0
    converged = False
    for iterations in range(1, MAX_ITER + 1):
        if np.linalg.norm(score) < 1e-8 * (1.0 + np.linalg.norm(beta)):
            converged = True
            break
        if np.linalg.norm(beta) > SEPARATION_NORM:
            raise MonotoneLikelihood(
                f"|beta|={np.linalg.norm(beta):.3g} with non-vanishing score; separation"
            )
        eigvals, vec = jacobi_eigh(info)
        if not is_positive_definite(eigvals):
            raise SingularInformation("observed information is rank deficient")
        step = vec @ ((vec.T @ score) / eigvals)
        lam = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            cand = beta + lam * step
            ll_new = pl.loglik(cand)
            if ll_new >= ll - 1e-12:
                beta = cand
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            break  # stalled; the convergence check above decides the outcome
        ll, score, info = pl.loglik_score_info(beta)
    else:
        raise Nonconvergence(f"no convergence after {MAX_ITER} iterations")
    if not converged:
        if np.linalg.norm(score) < 1e-8 * (1.0 + np.linalg.norm(beta)):
            converged = True
        else:
            raise Nonconvergence("step halving stalled before the score vanished")
    effect = TemporalEffect(beta, bases)
    return FitResult(
        effect=effect,
        loglik=ll,
        iterations=iterations,
        converged=converged,
        r2=r_squared(data, effect),
        score=score,
        information=info,
    )


def slope_ratio_changepoint(trace: ScoreProcessTrace, component: int, t0: float) -> float:
    """Ratio of least-squares slopes of the standardized process after vs before t0.

    Each side gets an ordinary least-squares line with a free intercept; the
    left segment uses grid points in [0, t0], the right those in (t0, 1].
    """
    if not 0.0 < t0 < 1.0:
        raise ValueError("t0 must lie strictly inside (0, 1)")
    s = trace.require_standardized()[:, component - 1]
    grid = trace.grid
    left = grid <= t0
    right = ~left
    if left.sum() < 2 or right.sum() < 2:
        raise DegenerateSegment(f"fewer than 2 grid points on one side of t0={t0:g}")
    slope1 = np.polyfit(grid[left], s[left], 1)[0]
    slope2 = np.polyfit(grid[right], s[right], 1)[0]
    if abs(slope1) < 1e-12:
        raise DegenerateSegment("leading segment slope vanishes; ratio undefined")
    return float(slope2 / slope1)


def resolve_changepoint_ratios(
    candidate: tuple[Basis, ...], trace: ScoreProcessTrace
) -> tuple[Basis, ...]:
    """Freeze any unresolved changepoint ratio using the slope ratio of the trace."""
    resolved = []
    for comp, basis in enumerate(candidate, start=1):
        if isinstance(basis, ChangepointBasis) and basis.ratio is None:
            ratio = slope_ratio_changepoint(trace, comp, basis.t0)
            basis = ChangepointBasis(t0=basis.t0, ratio=ratio)
        resolved.append(basis)
    return tuple(resolved)


@dataclass
class SelectionEntry:
    candidate_index: int
    fit: FitResult


@dataclass
class SelectionResult:
    """Candidates ranked by R2 (descending, declaration order on ties)."""

    ranked: list[SelectionEntry]
    failures: list[dict]

    @property
    def best(self) -> SelectionEntry:
        return self.ranked[0]


def select_effect(
    data: TransformedDataset,
    candidates: CandidateSet,
    trace: ScoreProcessTrace | None = None,
) -> SelectionResult:
    """Fit every candidate and rank by R2; failed candidates are reported.

    Unresolved changepoint ratios are estimated once from the score process
    at beta0 = 0 (computed on demand) and then frozen inside the basis.
    """
    needs_trace = any(
        isinstance(b, ChangepointBasis) and b.ratio is None
        for cand in candidates.candidates
        for b in cand
    )
    if needs_trace and trace is None:
        trace = score_process(data, np.zeros(data.dimension))
    entries: list[SelectionEntry] = []
    failures: list[dict] = []
    for idx, cand in enumerate(candidates.candidates):
        try:
            resolved = resolve_changepoint_ratios(cand, trace) if trace is not None else cand
            fit = fit_partial_likelihood(data, resolved)
            entries.append(SelectionEntry(candidate_index=idx, fit=fit))
        except (SurvScoreError, ValueError) as exc:
            failures.append({"candidate_index": idx, "reason": f"{type(exc).__name__}: {exc}"})
    if not entries:
        raise AllCandidatesFailed(f"all {len(candidates.candidates)} candidates failed")
    entries.sort(key=lambda e: -e.fit.r2.value)
    return SelectionResult(ranked=entries, failures=failures)
