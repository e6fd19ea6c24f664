"""Temporal regression-effect shapes: beta_j(t) = loading_j * B_j(t).

The basis shapes are the ones used throughout the model-building workflow:
constant, changepoint (a level drop to ``ratio`` after ``t0``), polynomial
decay (1-t)^k, 1-t^2, log(t), and piecewise-constant tables.  Each basis
knows its running integral so drift curves have closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class Basis:
    """A known time shape on [0, 1] multiplying one unknown scalar loading."""

    kind = "abstract"

    def value(self, t):
        raise NotImplementedError

    def integral(self, t):
        """Closed-form of int_0^t B(s) ds."""
        raise NotImplementedError

    def label(self) -> str:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantBasis(Basis):
    kind = "constant"

    def value(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def integral(self, t):
        return np.asarray(t, dtype=float)

    def label(self):
        return "constant"

    def to_dict(self):
        return {"basis": "constant"}


@dataclass(frozen=True)
class ChangepointBasis(Basis):
    """I(t <= t0) + ratio * I(t > t0); ratio None means "estimate from the process"."""

    t0: float
    ratio: float | None = None
    kind = "changepoint"

    def _require_ratio(self) -> float:
        if self.ratio is None:
            raise ValueError("changepoint ratio not resolved; estimate it from the process first")
        return self.ratio

    def value(self, t):
        c = self._require_ratio()
        t = np.asarray(t, dtype=float)
        return np.where(t <= self.t0, 1.0, c)

    def integral(self, t):
        c = self._require_ratio()
        t = np.asarray(t, dtype=float)
        return np.minimum(t, self.t0) + c * np.maximum(t - self.t0, 0.0)

    def label(self):
        if self.ratio is None:
            return f"cp({self.t0:g})"
        return f"cp({self.t0:g},C={self.ratio:.4g})"

    def to_dict(self):
        return {"basis": "changepoint", "t0": self.t0, "ratio": self.ratio}


@dataclass(frozen=True)
class PowerBasis(Basis):
    """(1 - t)^k decay."""

    k: float = 1.0
    kind = "power"

    def value(self, t):
        return (1.0 - np.asarray(t, dtype=float)) ** self.k

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        return (1.0 - (1.0 - t) ** (self.k + 1.0)) / (self.k + 1.0)

    def label(self):
        return f"(1-t)^{self.k:g}" if self.k != 1 else "(1-t)"

    def to_dict(self):
        return {"basis": "power", "k": self.k}


@dataclass(frozen=True)
class OneMinusSquaredBasis(Basis):
    kind = "one_minus_sq"

    def value(self, t):
        return 1.0 - np.asarray(t, dtype=float) ** 2

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        return t - t**3 / 3.0

    def label(self):
        return "1-t^2"

    def to_dict(self):
        return {"basis": "one_minus_sq"}


@dataclass(frozen=True)
class LogBasis(Basis):
    """log(t); only ever evaluated on the grid, where t >= 1/k_n > 0."""

    kind = "log"

    def value(self, t):
        return np.log(np.asarray(t, dtype=float))

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = t * np.log(t) - t
        return np.where(np.asarray(t) == 0.0, 0.0, out)

    def label(self):
        return "log(t)"

    def to_dict(self):
        return {"basis": "log"}


@dataclass(frozen=True)
class TableBasis(Basis):
    """Piecewise constant: values[m] on [breaks[m-1], breaks[m]) with breaks[-1] = 1."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    kind = "table"

    def __post_init__(self):
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("need len(values) == len(breakpoints) + 1")
        if len(self.breakpoints) > 1 and not all(np.diff(self.breakpoints) > 0):
            raise ValueError("breakpoints must be strictly increasing")

    def value(self, t):
        idx = np.searchsorted(self.breakpoints, np.asarray(t, dtype=float), side="right")
        return np.asarray(self.values, dtype=float)[idx]

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        edges = np.concatenate([[0.0], self.breakpoints, [np.inf]])
        vals = np.asarray(self.values, dtype=float)
        out = np.zeros_like(t)
        for m, v in enumerate(vals):
            lo, hi = edges[m], edges[m + 1]
            out = out + v * np.clip(t - lo, 0.0, hi - lo)
        return out

    def label(self):
        return f"table({len(self.values)} pieces)"

    def to_dict(self):
        return {"basis": "table", "breakpoints": list(self.breakpoints), "values": list(self.values)}


_BASIS_KINDS = {
    "constant": lambda d: ConstantBasis(),
    "changepoint": lambda d: ChangepointBasis(t0=float(d["t0"]), ratio=None if d.get("ratio") is None else float(d["ratio"])),
    "power": lambda d: PowerBasis(k=float(d.get("k", 1.0))),
    "one_minus_sq": lambda d: OneMinusSquaredBasis(),
    "log": lambda d: LogBasis(),
    "table": lambda d: TableBasis(breakpoints=tuple(float(b) for b in d["breakpoints"]),
                                  values=tuple(float(v) for v in d["values"])),
}


def basis_from_dict(d: dict) -> Basis:
    kind = d.get("basis")
    if kind not in _BASIS_KINDS:
        raise ValueError(f"unknown basis kind {kind!r}")
    return _BASIS_KINDS[kind](d)


@dataclass(frozen=True)
class TemporalEffect:
    """beta(t) = (loading_1 B_1(t), ..., loading_p B_p(t))."""

    loadings: np.ndarray
    bases: tuple[Basis, ...]

    def __post_init__(self):
        object.__setattr__(self, "loadings", np.asarray(self.loadings, dtype=float).reshape(-1))
        if len(self.loadings) != len(self.bases):
            raise ValueError("one basis per loading required")

    @property
    def dimension(self) -> int:
        return len(self.loadings)

    @classmethod
    def constant(cls, loadings) -> "TemporalEffect":
        loadings = np.atleast_1d(np.asarray(loadings, dtype=float))
        return cls(loadings, tuple(ConstantBasis() for _ in loadings))

    @classmethod
    def zero(cls, p: int) -> "TemporalEffect":
        return cls.constant(np.zeros(p))

    def with_loadings(self, loadings) -> "TemporalEffect":
        return TemporalEffect(np.asarray(loadings, dtype=float), self.bases)

    def basis_matrix(self, times) -> np.ndarray:
        """B_j(t_i) as an (len(times), p) matrix."""
        times = np.asarray(times, dtype=float)
        return np.column_stack([np.broadcast_to(b.value(times), times.shape) for b in self.bases])

    def evaluate(self, t) -> np.ndarray:
        """beta(t); a (p,) vector for scalar t, (len(t), p) for array t."""
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return self.loadings * np.array([float(b.value(t)) for b in self.bases])
        return self.basis_matrix(t) * self.loadings

    def integral(self, t) -> np.ndarray:
        """int_0^t beta(s) ds, componentwise."""
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return self.loadings * np.array([float(b.integral(t)) for b in self.bases])
        return np.column_stack([np.broadcast_to(b.integral(t), t.shape) for b in self.bases]) * self.loadings

    def label(self) -> str:
        parts = []
        for lo, b in zip(self.loadings, self.bases):
            parts.append(f"{lo:.4g}*{b.label()}")
        return " , ".join(parts)


def as_effect_function(effect, p: int) -> Callable[[float], np.ndarray]:
    """Normalize an effect spec (TemporalEffect, callable, or vector) to t -> (p,)."""
    if isinstance(effect, TemporalEffect):
        return lambda t: effect.evaluate(float(t))
    if callable(effect):
        return lambda t: np.asarray(effect(float(t)), dtype=float).reshape(p)
    vec = np.asarray(effect, dtype=float).reshape(p)
    return lambda t: vec


@dataclass
class CandidateSet:
    """Basis specifications to rank by R2; loadings are free in each fit."""

    candidates: list[tuple[Basis, ...]]

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("candidate set must be nonempty")
        p = len(self.candidates[0])
        for cand in self.candidates:
            if len(cand) != p:
                raise ValueError("all candidates must cover the same number of components")

    @property
    def dimension(self) -> int:
        return len(self.candidates[0])

    @classmethod
    def from_json_obj(cls, obj) -> "CandidateSet":
        """Parse the documented JSON schema.

        {"candidates": [[{"component": 1, "basis": "changepoint", "t0": 0.6,
        "ratio": -0.12}, {"component": 2, "basis": "constant"}], ...]}
        """
        if isinstance(obj, dict):
            entries = obj.get("candidates")
        else:
            entries = obj
        if not isinstance(entries, list) or not entries:
            raise ValueError("candidate file must hold a nonempty 'candidates' list")
        parsed = []
        p = None
        for cand in entries:
            if isinstance(cand, dict):
                cand = [cand]
            if not isinstance(cand, list) or not cand:
                raise ValueError("each candidate must be a list of per-component basis specs")
            comps = sorted(cand, key=lambda d: int(d.get("component", 1)))
            indices = [int(d.get("component", 1)) for d in comps]
            if p is None:
                p = len(comps)
            if indices != list(range(1, p + 1)):
                raise ValueError(f"candidate components must be exactly 1..{p}, got {indices}")
            parsed.append(tuple(basis_from_dict(d) for d in comps))
        return cls(parsed)

    def to_json_obj(self) -> dict:
        out = []
        for cand in self.candidates:
            out.append([
                {"component": j + 1, **b.to_dict()} for j, b in enumerate(cand)
            ])
        return {"candidates": out}
