"""Seeded replication runs: simulate, analyze, aggregate.

Each replicate r of a run re-seeds the scenario with mix64(seed, r) and runs
the requested analyses; failures are recorded per replicate, never aborting
the batch.  Reports aggregate numeric fields into means with Monte-Carlo
standard errors, boolean fields into rates, and selections into frequencies.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .effects import CandidateSet, basis_from_dict
from .errors import SurvScoreError
from .fit import fit_partial_likelihood, select_effect
from .kolmogorov import kolmogorov_quantile
from .predictive import r_squared
from .process import bridge_sup_statistic, score_process
from .simulate import SimulationScenario, mix64, simulate_dataset
from .transform import time_transform

__version__ = "0.1.0"


def max_workers() -> int:
    """Parallelism cap: SURVSCORE_THREADS, defaulting to 1 (results identical either way)."""
    raw = os.environ.get("SURVSCORE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class ReplicationReport:
    scenario: dict
    replicates: int
    analyses: list
    records: list[dict]
    summary: dict

    def to_json_obj(self) -> dict:
        return {
            "version": __version__,
            "scenario": self.scenario,
            "replicates": self.replicates,
            "analyses": self.analyses,
            "summary": self.summary,
            "records": self.records,
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_obj(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path) -> None:
        keys: list[str] = []
        for rec in self.records:
            for k in rec:
                if k not in keys:
                    keys.append(k)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(keys)
            for rec in self.records:
                writer.writerow([_csv_cell(rec.get(k)) for k in keys])


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(v)
    return v


def _flat(prefix: str, name: str) -> str:
    return f"{prefix}_{name}" if prefix else name


def _run_analysis(spec: dict, td, cache: dict, record: dict) -> None:
    kind = spec.get("kind")
    prefix = spec.get("name", kind)
    p = td.dimension
    if kind == "bands":
        beta0 = np.asarray(spec.get("beta0", np.zeros(p)), dtype=float)
        key = ("trace", tuple(beta0))
        if key not in cache:
            cache[key] = score_process(td, beta0)
        trace = cache[key]
        alphas = spec.get("alpha", 0.05)
        if np.isscalar(alphas):
            alphas = [alphas]
        record[_flat(prefix, "k_n")] = td.k_n
        for i in range(1, p + 1):
            stat = bridge_sup_statistic(trace, i)
            record[_flat(prefix, f"sup_stat_{i}")] = stat
            for alpha in alphas:
                record[_flat(prefix, f"reject_{alpha:g}_c{i}")] = bool(
                    stat > kolmogorov_quantile(alpha)
                )
    elif kind == "drift":
        beta0 = np.asarray(spec.get("beta0", np.zeros(p)), dtype=float)
        key = ("trace", tuple(beta0))
        if key not in cache:
            cache[key] = score_process(td, beta0)
        trace = cache[key]
        record[_flat(prefix, "k_n")] = td.k_n
        for t in spec.get("times", (0.25, 0.5, 0.75, 1.0)):
            s = trace.standardized_at(float(t))
            for i in range(p):
                record[_flat(prefix, f"s_t{t:g}_c{i + 1}")] = float(s[i])
    elif kind == "fit":
        bases = tuple(basis_from_dict(b) for b in spec["bases"])
        fit = fit_partial_likelihood(td, bases)
        for i, b in enumerate(fit.effect.loadings):
            record[_flat(prefix, f"beta_hat_{i + 1}")] = float(b)
        record[_flat(prefix, "r2")] = fit.r2.value
        record[_flat(prefix, "loglik")] = fit.loglik
        record[_flat(prefix, "iterations")] = fit.iterations
    elif kind == "select":
        candidates = CandidateSet.from_json_obj(spec["candidates"])
        result = select_effect(td, candidates)
        record[_flat(prefix, "best_index")] = result.best.candidate_index
        record[_flat(prefix, "n_failed")] = len(result.failures)
        for entry in result.ranked:
            idx = entry.candidate_index
            record[_flat(prefix, f"r2_cand{idx}")] = entry.fit.r2.value
            for i, b in enumerate(entry.fit.effect.loadings):
                record[_flat(prefix, f"beta_cand{idx}_{i + 1}")] = float(b)
    else:
        raise ValueError(f"unknown analysis kind {kind!r}")


def _one_replicate(scenario: SimulationScenario, r: int, analyses: list[dict]) -> dict:
    seed_r = mix64(scenario.seed, r)
    record: dict = {"replicate": r, "seed": seed_r, "error": None}
    try:
        data = simulate_dataset(scenario.with_seed(seed_r))
        td = time_transform(data)
        cache: dict = {}
        for spec in analyses:
            _run_analysis(spec, td, cache, record)
    except (SurvScoreError, ValueError) as exc:
        record["error"] = f"{type(exc).__name__}: {exc}"
    return record


def run_replications(
    scenario: SimulationScenario, replicates: int, analyses: list[dict]
) -> ReplicationReport:
    """Run the analyses on ``replicates`` independently seeded datasets."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    workers = max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda r: _one_replicate(scenario, r, analyses), range(replicates)))
    else:
        records = [_one_replicate(scenario, r, analyses) for r in range(replicates)]
    return ReplicationReport(
        scenario=scenario.to_json_obj(),
        replicates=replicates,
        analyses=analyses,
        records=records,
        summary=summarize(records),
    )


def summarize(records: list[dict]) -> dict:
    """Means with MC standard errors, rates for booleans, selection frequencies."""
    ok = [r for r in records if r.get("error") is None]
    summary: dict = {
        "completed": len(ok),
        "failed": len(records) - len(ok),
    }
    if not ok:
        return summary
    keys = [k for k in ok[0] if k not in ("replicate", "seed", "error")]
    for key in keys:
        vals = [r[key] for r in ok if key in r and r[key] is not None]
        if not vals:
            continue
        if all(isinstance(v, bool) for v in vals):
            summary[f"{key}_rate"] = float(np.mean([1.0 if v else 0.0 for v in vals]))
        elif key.endswith("best_index"):
            freq: dict[str, float] = {}
            for v in vals:
                freq[str(v)] = freq.get(str(v), 0) + 1
            summary[f"{key}_freq"] = {k: c / len(vals) for k, c in sorted(freq.items())}
        elif all(isinstance(v, (int, float)) for v in vals):
            arr = np.asarray(vals, dtype=float)
            summary[f"{key}_mean"] = float(arr.mean())
            summary[f"{key}_se"] = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return summary
