"""Survival data model: subjects, covariate paths, datasets, validation, CSV input.

A dataset holds ``n`` subjects, each with an observed time ``X_i`` (the
minimum of the failure and censoring times), a failure flag ``delta_i`` and a
``p``-dimensional covariate path.  Covariates are either fixed vectors or
right-continuous step functions of time on the original scale.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class CovariatePath:
    """A fixed vector or a right-continuous step function of time.

    For a step path, ``breakpoints`` are strictly increasing and ``values``
    holds one length-p vector per breakpoint; evaluation at ``t`` returns the
    vector of the last breakpoint <= t (the first vector before the first
    breakpoint).
    """

    values: np.ndarray                    # (p,) for fixed, (m, p) for step
    breakpoints: np.ndarray | None = None  # (m,) for step paths, None for fixed

    @classmethod
    def fixed(cls, values: Iterable[float]) -> "CovariatePath":
        return cls(values=np.asarray(values, dtype=float).reshape(-1))

    @classmethod
    def step(cls, breakpoints: Iterable[float], values) -> "CovariatePath":
        b = np.asarray(breakpoints, dtype=float).reshape(-1)
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if len(b) != v.shape[0]:
            raise ValueError("one value vector per breakpoint required")
        if len(b) > 1 and not np.all(np.diff(b) > 0):
            raise ValueError("step breakpoints must be strictly increasing")
        return cls(values=v, breakpoints=b)

    @property
    def is_fixed(self) -> bool:
        return self.breakpoints is None

    @property
    def dimension(self) -> int:
        return self.values.shape[-1] if not self.is_fixed else self.values.shape[0]

    def at(self, t: float) -> np.ndarray:
        if self.is_fixed:
            return self.values
        idx = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[max(idx, 0)]


@dataclass(frozen=True)
class Subject:
    """One observation: identifier, observed time, failure flag, covariates."""

    id: str
    observed_time: float
    status: int
    covariates: CovariatePath

    @property
    def failed(self) -> bool:
        return self.status == 1


class SurvivalDataset:
    """A sample of subjects sharing covariate dimension ``p``."""

    def __init__(self, subjects: Sequence[Subject], dimension: int | None = None):
        self.subjects = list(subjects)
        if dimension is None:
            if not self.subjects:
                raise ValueError("empty dataset needs an explicit dimension")
            dimension = self.subjects[0].covariates.dimension
        self.dimension = int(dimension)

    def __len__(self) -> int:
        return len(self.subjects)

    @property
    def n(self) -> int:
        return len(self.subjects)

    @classmethod
    def from_arrays(cls, times, status, covariates, ids=None) -> "SurvivalDataset":
        """Build a fixed-covariate dataset from flat arrays.

        ``covariates`` is (n,) or (n, p); ``ids`` default to "1".."n".
        """
        times = np.asarray(times, dtype=float).reshape(-1)
        status = np.asarray(status).reshape(-1).astype(int)
        z = np.asarray(covariates, dtype=float)
        if z.ndim == 1:
            z = z.reshape(-1, 1)
        if ids is None:
            ids = [str(i + 1) for i in range(len(times))]
        subjects = [
            Subject(str(ids[i]), float(times[i]), int(status[i]), CovariatePath.fixed(z[i]))
            for i in range(len(times))
        ]
        return cls(subjects, dimension=z.shape[1])

    def fixed_covariate_matrix(self) -> np.ndarray | None:
        """(n, p) matrix when every path is a fixed vector, else None."""
        if any(not s.covariates.is_fixed for s in self.subjects):
            return None
        return np.array([s.covariates.values for s in self.subjects], dtype=float)

    def covariate_matrix_at(self, t: float) -> np.ndarray:
        return np.array([s.covariates.at(t) for s in self.subjects], dtype=float)


@dataclass
class ValidationReport:
    """List of invariant violations; empty iff the dataset is usable."""

    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:  # truthy iff clean
        return self.ok


def validate(dataset: SurvivalDataset) -> ValidationReport:
    """Check all dataset invariants, returning every violation found."""
    report = ValidationReport()
    seen_ids = set()
    any_failure = False
    for s in dataset.subjects:
        if not math.isfinite(s.observed_time):
            report.violations.append(f"subject {s.id}: non-finite time")
        elif s.observed_time < 0:
            report.violations.append(f"subject {s.id}: negative time")
        if s.status not in (0, 1):
            report.violations.append(f"subject {s.id}: status not in {{0,1}}")
        if s.covariates.dimension != dataset.dimension:
            report.violations.append(
                f"subject {s.id}: covariate dimension {s.covariates.dimension} != {dataset.dimension}"
            )
        probe = s.observed_time if math.isfinite(s.observed_time) else 0.0
        for t in (0.0, probe):
            if not np.all(np.isfinite(s.covariates.at(t))):
                report.violations.append(f"subject {s.id}: non-finite covariate value")
                break
        if not s.covariates.is_fixed:
            b = s.covariates.breakpoints
            if len(b) > 1 and not np.all(np.diff(b) > 0):
                report.violations.append(f"subject {s.id}: breakpoints not strictly increasing")
        if s.id in seen_ids:
            report.violations.append(f"duplicate subject id {s.id}")
        seen_ids.add(s.id)
        any_failure = any_failure or s.status == 1
    if not any_failure:
        report.violations.append("no failures in dataset")
    return report


def read_csv(path) -> SurvivalDataset:
    """Read a dataset from CSV with header ``id,time,status,z1,...,zp``.

    UTF-8, '.' decimal separator; status must be 0 or 1.  Step-function
    covariates are library-API-only and cannot be expressed in this format.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        expected_prefix = ["id", "time", "status"]
        if header[:3] != expected_prefix:
            raise ValueError(f"{path}: header must start with id,time,status (got {header[:3]})")
        p = len(header) - 3
        if p < 1 or header[3:] != [f"z{j + 1}" for j in range(p)]:
            raise ValueError(f"{path}: covariate columns must be z1..zp (got {header[3:]})")
        subjects = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3 + p:
                raise ValueError(f"{path}:{lineno}: expected {3 + p} fields, got {len(row)}")
            try:
                time = float(row[1])
                status = int(row[2])
                z = [float(c) for c in row[3:]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if status not in (0, 1):
                raise ValueError(f"{path}:{lineno}: status must be 0 or 1")
            subjects.append(Subject(row[0].strip(), time, status, CovariatePath.fixed(z)))
    if not subjects:
        raise ValueError(f"{path}: no data rows")
    return SurvivalDataset(subjects, dimension=p)


def write_csv(dataset: SurvivalDataset, path) -> None:
    """Write a fixed-covariate dataset in the ``id,time,status,z1..zp`` format."""
    z = dataset.fixed_covariate_matrix()
    if z is None:
        raise ValueError("CSV output supports fixed covariates only")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "time", "status"] + [f"z{j + 1}" for j in range(dataset.dimension)])
        for s, row in zip(dataset.subjects, z):
            writer.writerow([s.id, repr(float(s.observed_time)), s.status] + [repr(float(v)) for v in row])
