"""Benchmark harness: train/evaluate classifiers over stratified splits.

A run is fully determined by a RunConfig and the dataset: per-split seeds
are spawned from the master seed, work items are independent (split x
classifier) jobs, and results are merged order-independently so worker
count cannot change aggregates.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .bitvec import BitMatrix, BitVector, take_bits
from .data import stratified_split, stratified_subsample
from .formula import (BALANCED_ACCURACY, OR, Trivial, complexity, evaluate,
                      score, to_json)
from .local import SolverConfig, solve
from .oracle import brute_force_depth_one
from .parsing import to_text
from .subtree import NonLocalConfig

CLASSIFIERS = ("most-frequent", "single-feature", "depth-one", "local",
               "nonlocal")
SCHEMA_VERSION = 1
MAX_TRAIN_ROWS = 3000


@dataclass
class RunConfig:
    dataset: str = ""
    label_column: str = ""
    positive_label: str = ""
    num_bins: int = 10
    outer_test_fraction: float = 0.2
    inner_splits: int = 32
    inner_test_fraction: float = 0.3
    classifier: str = "local"
    operator: str = OR
    max_literals: int = 3
    max_complexity: Optional[int] = 6
    lam: float = 0.0
    metric: str = BALANCED_ACCURACY
    num_starts: int = 20
    num_iterations: int = 2000
    seed: int = 0
    workers: int = 1
    knobs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(**d)


def round_floats(value, places: int = 6):
    if isinstance(value, float):
        return round(value, places)
    if isinstance(value, dict):
        return {k: round_floats(v, places) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v, places) for v in value]
    return value


TIMING_KEYS = ("seconds", "seconds_mean", "seconds_std")


def _strip_timing(value):
    if isinstance(value, dict):
        return {k: _strip_timing(v) for k, v in value.items()
                if k not in TIMING_KEYS}
    if isinstance(value, (list, tuple)):
        return [_strip_timing(v) for v in value]
    return value


def dumps_result(payload: dict) -> str:
    """Canonical JSON for persisted results.

    Wall-clock fields are dropped so reruns at a fixed seed are
    byte-identical; timing stays available on the in-memory records."""
    body = dict(payload)
    body["schema"] = SCHEMA_VERSION
    body = _strip_timing(body)
    return json.dumps(round_floats(body), indent=2, sort_keys=True) + "\n"


def train_classifier(X: BitMatrix, y: BitVector, config: RunConfig,
                     seed: int):
    """Fit one classifier on a training slice; returns (formula, info)."""
    name = config.classifier
    t0 = time.perf_counter()
    info = {"classifier": name, "seed": seed}
    if name == "most-frequent":
        rule = Trivial(1 if 2 * y.popcount() >= y.n else 0)
    elif name in ("single-feature", "depth-one"):
        max_literals = 1 if name == "single-feature" else config.max_literals
        rows = stratified_subsample(y, MAX_TRAIN_ROWS, seed)
        x_fit, y_fit = X, y
        if len(rows) < y.n:
            x_fit = X.take_rows(rows)
            y_fit = take_bits(y, rows)
        operator = OR if name == "single-feature" else config.operator
        sol = brute_force_depth_one(
            x_fit, y_fit, operator, max_literals, lam=config.lam,
            cap=int(config.knobs.get("enumeration_cap", 10 ** 8)))
        rule = sol.to_formula()
        info["weighted_error"] = sol.weighted_error
    elif name in ("local", "nonlocal"):
        solver = SolverConfig(
            num_starts=config.num_starts,
            num_iterations=config.num_iterations,
            max_complexity=config.max_complexity,
            lam=config.lam, metric=config.metric, seed=seed)
        nl = None
        if name == "nonlocal":
            nl = NonLocalConfig(
                patience=int(config.knobs.get("patience", 10)),
                max_samples=int(config.knobs.get("max_samples", 100)),
                backend=config.knobs.get("backend", "oracle"))
        rule, _ = solve(X, y, solver, nl)
    else:
        raise ValueError(f"unknown classifier {config.classifier!r}")
    info["seconds"] = time.perf_counter() - t0
    info["complexity"] = complexity(rule)
    info["rule"] = to_text(rule)
    info["rule_json"] = to_json(rule)
    return rule, info


def _evaluate(rule, X: BitMatrix, y: BitVector, metric: str) -> float:
    return score(rule, X, y, metric)


def _run_split(args):
    config, split_index, seed, X, y, holdout = args
    train_idx, test_idx = stratified_split(y, config.inner_test_fraction,
                                           seed)
    assert not set(train_idx) & set(test_idx)
    x_tr, y_tr = X.take_rows(train_idx), take_bits(y, train_idx)
    x_te, y_te = X.take_rows(test_idx), take_bits(y, test_idx)
    rule, info = train_classifier(x_tr, y_tr, config, seed)
    record = dict(info)
    record["split"] = split_index
    record["train_score"] = _evaluate(rule, x_tr, y_tr, config.metric)
    record["test_score"] = _evaluate(rule, x_te, y_te, config.metric)
    if holdout is not None:
        record["holdout_score"] = _evaluate(rule, holdout[0], holdout[1],
                                            config.metric)
    return record


def _run_jobs(jobs, workers: int):
    if workers <= 1:
        return [_run_split(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_split, jobs))


def crossval(config: RunConfig, X: BitMatrix, y: BitVector) -> dict:
    """Outer stratified holdout plus repeated inner splits of the rest."""
    outer_train, outer_test = stratified_split(
        y, config.outer_test_fraction, config.seed)
    assert not set(outer_train) & set(outer_test)
    x_in, y_in = X.take_rows(outer_train), take_bits(y, outer_train)
    holdout = (X.take_rows(outer_test), take_bits(y, outer_test))
    seeds = [int(s.generate_state(1)[0] & 0x7FFFFFFF) for s in
             np.random.SeedSequence(config.seed).spawn(config.inner_splits)]
    jobs = [(config, i, seeds[i], x_in, y_in, holdout)
            for i in range(config.inner_splits)]
    records = _run_jobs(jobs, config.workers)
    records.sort(key=lambda r: r["split"])
    return {
        "config": config.to_dict(),
        "records": records,
        "summary": summarize(records),
    }


def summarize(records: list) -> dict:
    out = {"splits": len(records)}
    for key in ("train_score", "test_score", "holdout_score", "complexity",
                "seconds"):
        vals = [r[key] for r in records if key in r]
        if vals:
            out[f"{key}_mean"] = float(np.mean(vals))
            out[f"{key}_std"] = float(np.std(vals))
    return out


@dataclass
class SweepResult:
    knob: str
    rows: list                 # one summary dict per knob value

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        cols = [self.knob, "splits"]
        cols += [k for k in sorted(self.rows[0]) if k not in cols]
        lines = [",".join(cols)]
        for row in self.rows:
            lines.append(",".join(
                f"{row[c]:.6f}" if isinstance(row[c], float) else str(row[c])
                for c in cols))
        return "\n".join(lines) + "\n"


def sweep(config: RunConfig, knob: str, values: list, X: BitMatrix,
          y: BitVector) -> SweepResult:
    """Re-run the inner-split protocol at each knob value.

    Supported knobs: max_complexity, max_literals, train_fraction."""
    if not values:
        raise ValueError("empty knob range")
    seeds = [int(s.generate_state(1)[0] & 0x7FFFFFFF) for s in
             np.random.SeedSequence(config.seed).spawn(config.inner_splits)]
    rows = []
    for value in values:
        cfg = RunConfig.from_dict(config.to_dict())
        if knob == "train_fraction":
            cfg.knobs = dict(cfg.knobs, train_fraction=value)
        elif knob in ("max_complexity", "max_literals"):
            setattr(cfg, knob, int(value))
        else:
            raise ValueError(f"unknown sweep knob {knob!r}")
        jobs = []
        for i in range(config.inner_splits):
            x_i, y_i = X, y
            if knob == "train_fraction":
                rng_rows = stratified_subsample(
                    y, max(2, int(round(value * y.n))), seeds[i])
                x_i, y_i = X.take_rows(rng_rows), take_bits(y, rng_rows)
            jobs.append((cfg, i, seeds[i], x_i, y_i, None))
        records = _run_jobs(jobs, config.workers)
        records.sort(key=lambda r: r["split"])
        row = {knob: value}
        row.update(summarize(records))
        rows.append(row)
    return SweepResult(knob, rows)
