"""Survival-data generators for effect scenarios on the [0, 1] rank scale.

Two generators are provided.  ``absolute_time`` inverts the cumulative hazard
(closed form for constant effects, numeric with a user time map otherwise).
``rank_conditional`` draws the failure order directly: at grid step i the
failure is picked among the remaining subjects with the risk-set
probabilities of the model evaluated at t = i/n, then ranks serve as times.
Effects given on the transformed scale are only coherent with the second
generator.

Reproducibility: every random stream is a Philox4x64 generator keyed with
``(mix64(seed, r), 0)`` where ``mix64`` is splitmix64 applied to
``seed + (r + 1) * 0x9E3779B97F4A7C15`` (mod 2^64); replicate r of a run uses
stream r, so reports are independent of scheduling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .dataset import SurvivalDataset
from .effects import TemporalEffect, as_effect_function, basis_from_dict
from .errors import InvalidScenario
from .linalg import jacobi_eigh

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """The splitmix64 finalizer (public-domain mixing constants)."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def mix64(seed: int, r: int) -> int:
    """Deterministic per-replicate seed: splitmix64(seed + (r+1)*golden)."""
    return splitmix64((seed + (r + 1) * _GOLDEN) & _MASK64)


def stream(seed: int) -> np.random.Generator:
    """Philox4x64 generator keyed with (seed, 0)."""
    key = np.array([seed & _MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class BernoulliCovariates:
    q: float = 0.5

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return (rng.random(n) < self.q).astype(float).reshape(n, 1)

    @property
    def dimension(self) -> int:
        return 1

    def to_dict(self):
        return {"kind": "bernoulli", "q": self.q}


@dataclass(frozen=True)
class GaussianCovariates:
    mean: tuple[float, ...] = (0.0,)
    cov: tuple[tuple[float, ...], ...] = ((1.0,),)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        eigvals, vec = jacobi_eigh(cov)
        root = (vec * np.sqrt(np.maximum(eigvals, 0.0))) @ vec.T
        return mean + rng.standard_normal((n, len(mean))) @ root

    @property
    def dimension(self) -> int:
        return len(self.mean)

    def to_dict(self):
        return {"kind": "gaussian", "mean": list(self.mean),
                "cov": [list(row) for row in self.cov]}


@dataclass(frozen=True)
class ExponentialCensoring:
    rate: float

    def to_dict(self):
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class AdministrativeCensoring:
    cutoff: float

    def to_dict(self):
        return {"kind": "administrative", "cutoff": self.cutoff}


def covariate_law_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "bernoulli":
        q = float(d.get("q", 0.5))
        return BernoulliCovariates(q)
    if kind == "gaussian":
        mean = tuple(float(v) for v in d.get("mean", [0.0]))
        cov = d.get("cov")
        if cov is None:
            cov = np.eye(len(mean)).tolist()
        return GaussianCovariates(mean, tuple(tuple(float(v) for v in row) for row in cov))
    raise InvalidScenario(f"unknown covariate law {kind!r}")


def censoring_from_dict(d: dict | None):
    if d is None:
        return None
    kind = d.get("kind")
    if kind in (None, "none"):
        return None
    if kind == "exponential":
        return ExponentialCensoring(float(d["rate"]))
    if kind == "administrative":
        return AdministrativeCensoring(float(d["cutoff"]))
    raise InvalidScenario(f"unknown censoring kind {kind!r}")


def effect_from_dict(d) -> TemporalEffect:
    if isinstance(d, (int, float)):
        return TemporalEffect.constant([float(d)])
    if isinstance(d, (list, tuple)):
        return TemporalEffect.constant([float(v) for v in d])
    loadings = [float(v) for v in d["loadings"]]
    bases = tuple(basis_from_dict(b) for b in d.get("bases", [{"basis": "constant"}] * len(loadings)))
    return TemporalEffect(np.asarray(loadings), bases)


@dataclass
class SimulationScenario:
    """Everything needed to draw one dataset under a known effect."""

    n: int
    covariate_law: object
    true_effect: object                   # TemporalEffect, callable, or vector
    baseline: float = 1.0                 # constant hazard, absolute-time generator only
    censoring: object | None = None
    generator: str = "rank_conditional"
    seed: int = 0
    time_map: Callable[[float], float] | None = None  # original time -> [0, 1], API only

    def __post_init__(self):
        if self.n < 2:
            raise InvalidScenario("n must be at least 2")
        if self.generator not in ("absolute_time", "rank_conditional"):
            raise InvalidScenario(f"unknown generator {self.generator!r}")
        if isinstance(self.covariate_law, dict):
            self.covariate_law = covariate_law_from_dict(self.covariate_law)
        if isinstance(self.censoring, dict):
            self.censoring = censoring_from_dict(self.censoring)
        if isinstance(self.covariate_law, BernoulliCovariates):
            if not 0.0 < self.covariate_law.q < 1.0:
                raise InvalidScenario("Bernoulli q must lie in (0, 1)")
        if isinstance(self.covariate_law, GaussianCovariates):
            cov = np.asarray(self.covariate_law.cov, dtype=float)
            if cov.shape != (self.p, self.p) or not np.allclose(cov, cov.T):
                raise InvalidScenario("gaussian covariance must be symmetric p x p")
            if jacobi_eigh(cov)[0].min() < -1e-10:
                raise InvalidScenario("gaussian covariance must be positive semidefinite")
        if self.baseline <= 0:
            raise InvalidScenario("baseline hazard must be positive")
        if isinstance(self.censoring, ExponentialCensoring) and self.censoring.rate <= 0:
            raise InvalidScenario("censoring rate must be positive")
        if isinstance(self.censoring, AdministrativeCensoring) and not (
            self.censoring.cutoff > 0
        ):
            raise InvalidScenario("administrative cutoff must be positive")

    @property
    def p(self) -> int:
        return self.covariate_law.dimension

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SimulationScenario":
        try:
            return cls(
                n=int(obj["n"]),
                covariate_law=covariate_law_from_dict(obj["covariate_law"]),
                true_effect=effect_from_dict(obj["true_effect"]),
                baseline=float(obj.get("baseline", 1.0)),
                censoring=censoring_from_dict(obj.get("censoring")),
                generator=obj.get("generator", "rank_conditional"),
                seed=int(obj.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidScenario(f"bad scenario spec: {exc}") from None

    def to_json_obj(self) -> dict:
        effect = self.true_effect
        if isinstance(effect, TemporalEffect):
            eff = {"loadings": [float(v) for v in effect.loadings],
                   "bases": [b.to_dict() for b in effect.bases]}
        elif callable(effect):
            eff = "<callable>"
        else:
            eff = [float(v) for v in np.atleast_1d(effect)]
        return {
            "n": self.n,
            "covariate_law": self.covariate_law.to_dict(),
            "true_effect": eff,
            "baseline": self.baseline,
            "censoring": None if self.censoring is None else self.censoring.to_dict(),
            "generator": self.generator,
            "seed": self.seed,
        }

    def with_seed(self, seed: int) -> "SimulationScenario":
        return replace(self, seed=seed)


def _effect_is_constant(effect) -> np.ndarray | None:
    if isinstance(effect, TemporalEffect):
        if all(b.kind == "constant" for b in effect.bases):
            return effect.loadings
        return None
    if callable(effect):
        return None
    return np.atleast_1d(np.asarray(effect, dtype=float))


def draw_failure_order(
    scenario: SimulationScenario, n: int | None = None, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Covariates in failure order under the sequential risk-set probabilities.

    Step i picks the failure among remaining subjects with probability
    proportional to exp(beta(i/n)' Z_j).  Returns the (n, p) covariates of the
    first, second, ... failure.
    """
    n = scenario.n if n is None else n
    rng = stream(scenario.seed) if rng is None else rng
    p = scenario.p
    z = scenario.covariate_law.draw(rng, n)
    beta_fn = as_effect_function(scenario.true_effect, p)
    const = _effect_is_constant(scenario.true_effect)
    if const is not None:
        # Exponential race: T_j = E_j / w_j reproduces the sequential
        # softmax-without-replacement law for a constant effect.
        eta = z @ const
        race = rng.exponential(size=n) / np.exp(eta - eta.max())
        return z[np.argsort(race, kind="stable")]
    alive = np.arange(n)
    out = np.empty((n, p))
    for i in range(n):
        beta_t = np.asarray(beta_fn((i + 1) / n), dtype=float)
        eta = z[alive] @ beta_t
        w = np.exp(eta - eta.max())
        cum = np.cumsum(w)
        j = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        j = min(j, len(alive) - 1)
        out[i] = z[alive[j]]
        alive = np.delete(alive, j)
    return out


def simulate_dataset(scenario: SimulationScenario) -> SurvivalDataset:
    """Draw one dataset; seeded by the scenario, deterministic across runs."""
    rng = stream(scenario.seed)
    n, p = scenario.n, scenario.p
    if scenario.generator == "absolute_time":
        z = scenario.covariate_law.draw(rng, n)
        const = _effect_is_constant(scenario.true_effect)
        e = rng.exponential(size=n)
        if const is not None:
            eta = z @ const
            t_fail = e / (scenario.baseline * np.exp(eta))
        elif scenario.time_map is not None:
            t_fail = _invert_cumhaz(scenario, z, e)
        else:
            raise InvalidScenario(
                "absolute_time needs a constant effect or a time_map; "
                "transformed-scale effects use the rank_conditional generator"
            )
        if scenario.censoring is None:
            times, status = t_fail, np.ones(n, dtype=int)
        elif isinstance(scenario.censoring, ExponentialCensoring):
            c = rng.exponential(scale=1.0 / scenario.censoring.rate, size=n)
            times = np.minimum(t_fail, c)
            status = (t_fail <= c).astype(int)
        elif isinstance(scenario.censoring, AdministrativeCensoring):
            cutoff = scenario.censoring.cutoff
            times = np.minimum(t_fail, cutoff)
            status = (t_fail <= cutoff).astype(int)
        else:
            raise InvalidScenario(f"unsupported censoring {scenario.censoring!r}")
        return SurvivalDataset.from_arrays(times, status, z)

    # rank_conditional: draw the order, then assign increasing ranks as times.
    z_order = _rank_conditional_order(scenario, rng)
    status = np.ones(n, dtype=int)
    ranks = np.arange(1, n + 1, dtype=float)
    if scenario.censoring is None:
        pass
    elif isinstance(scenario.censoring, AdministrativeCensoring):
        cutoff = scenario.censoring.cutoff
        if not cutoff < 1.0:
            raise InvalidScenario("rank-scale administrative cutoff must lie in (0, 1)")
        kept = max(1, math.ceil(cutoff * n))
        m = n - kept
        if m:
            status[kept:] = 0
            ranks[kept:] = kept + (np.arange(1, m + 1)) / (m + 1)
    elif isinstance(scenario.censoring, ExponentialCensoring):
        raise InvalidScenario(
            "exponential censoring needs absolute times; use the absolute_time generator"
        )
    else:
        raise InvalidScenario(f"unsupported censoring {scenario.censoring!r}")
    return SurvivalDataset.from_arrays(ranks, status, z_order)


def _rank_conditional_order(scenario: SimulationScenario, rng: np.random.Generator) -> np.ndarray:
    return draw_failure_order(scenario, scenario.n, rng)


def _invert_cumhaz(scenario: SimulationScenario, z: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Numeric inversion of Lambda(t|Z) for a time-varying effect with a time map."""
    p = scenario.p
    beta_fn = as_effect_function(scenario.true_effect, p)
    horizon = 1.0
    # Expand the horizon until every cumulative hazard exceeds its target.
    for _ in range(60):
        grid = np.linspace(0.0, horizon, 4096)
        beta_grid = np.array([beta_fn(scenario.time_map(t)) for t in grid])
        eta = beta_grid @ z.T                      # (grid, n)
        lam = scenario.baseline * np.exp(eta)
        cum = np.concatenate(
            [np.zeros((1, len(z))), np.cumsum(0.5 * (lam[1:] + lam[:-1]) * np.diff(grid)[:, None], axis=0)]
        )
        if cum[-1].min() > e.max():
            out = np.empty(len(z))
            for j in range(len(z)):
                out[j] = float(np.interp(e[j], cum[:, j], grid))
            return out
        horizon *= 2.0
    raise InvalidScenario("cumulative hazard failed to reach every draw; check the time map")
