"""Evaluation harness: accuracy, redundancy rate and timing sweeps."""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .corr import redundancy_rate
from .data import compute_stats
from .errors import DataError
from .machine import GdmConfig, final_classifier, fit, predict
from .synth import generate, recovery_score

SWEEP_SCHEMA = "gdm-sweep/1"
COLUMNS = [
    "schema", "k", "seed", "status", "accuracy_support", "accuracy_affiliated",
    "red_support", "red_selected", "wall_time", "theta_final", "n_support",
    "n_selected", "n_iterations", "stop_reason",
    "group_hit_rate", "support_purity", "affiliation_coverage", "exclusivity",
]
METRICS = ("accuracy", "red", "time", "recovery")


@dataclass
class SweepSpec:
    feature_counts: tuple = tuple(range(10, 201, 10))
    repeats: tuple = (0,)
    metrics: tuple = ("accuracy", "red", "time")
    mean_pairs: bool = False
    time_prep: bool = False

    def __post_init__(self):
        counts = [int(k) for k in self.feature_counts]
        if not counts or any(k < 1 for k in counts) or counts != sorted(set(counts)):
            raise ValueError("feature_counts must be positive and strictly ascending")
        self.feature_counts = tuple(counts)
        self.repeats = tuple(int(s) for s in self.repeats)
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ValueError(f"unknown metrics: {sorted(unknown)}")


def accuracy(svm, dataset):
    """Fraction of samples whose predicted label equals the true label."""
    if dataset.n_samples == 0:
        raise DataError("empty dataset")
    return float(np.mean(predict(dataset, svm) == dataset.labels))


def _na_row(k, seed, error):
    row = {c: "NA" for c in COLUMNS}
    row.update(schema=SWEEP_SCHEMA, k=k, seed=seed, status=f"error: {error}")
    return row


def run_cell(train, test, k, seed, spec, base, truth=None):
    """One sweep cell: fit with ``target_features=k`` and evaluate."""
    config = replace(base, target_features=k, seed=seed)
    try:
        t0 = time.perf_counter()
        if spec.time_prep:
            compute_stats(train.features)
        model, state = fit(train, config)
        wall = time.perf_counter() - t0
        row = {c: "NA" for c in COLUMNS}
        selected = model.selected()
        row.update(
            schema=SWEEP_SCHEMA, k=k, seed=seed, status="ok",
            wall_time=wall if "time" in spec.metrics else "NA",
            theta_final=state.theta, n_support=len(model.support),
            n_selected=len(selected), n_iterations=len(state.trace),
            stop_reason=state.stop_reason,
        )
        if "accuracy" in spec.metrics:
            row["accuracy_support"] = accuracy(final_classifier(train, model, config), test)
            row["accuracy_affiliated"] = accuracy(
                final_classifier(train, model, config, with_affiliated=True), test)
        if "red" in spec.metrics:
            if len(model.support) >= 2:
                row["red_support"] = redundancy_rate(train, model.support, spec.mean_pairs)
            if len(selected) >= 2:
                row["red_selected"] = redundancy_rate(train, selected, spec.mean_pairs)
        if "recovery" in spec.metrics and truth is not None:
            rep = recovery_score(model, truth)
            row.update(group_hit_rate=rep.group_hit_rate, support_purity=rep.support_purity,
                       affiliation_coverage=rep.affiliation_coverage,
                       exclusivity=rep.exclusivity)
        return row
    except Exception as exc:  # recorded, not fatal: one bad cell must not sink a sweep
        return _na_row(k, seed, exc)


def run_sweep(train, test, spec, base=None, workers=1):
    """One row per (k, seed) on a fixed train/test pair."""
    base = base or GdmConfig()
    cells = [(k, s) for s in spec.repeats for k in spec.feature_counts]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(run_cell, train, test, k, s, spec, base) for k, s in cells]
            return [f.result() for f in futs]
    return [run_cell(train, test, k, s, spec, base) for k, s in cells]


def _synth_cells(synth_config, seed, spec, base):
    train, test, truth = generate(replace(synth_config, seed=seed))
    return [run_cell(train, test, k, seed, spec, base, truth) for k in spec.feature_counts]


def run_synthetic_sweep(synth_config, spec, base=None, workers=1):
    """Like :func:`run_sweep` but regenerates the data for every seed."""
    base = base or GdmConfig()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_synth_cells, synth_config, s, spec, base) for s in spec.repeats]
            return [row for f in futs for row in f.result()]
    return [row for s in spec.repeats for row in _synth_cells(synth_config, s, spec, base)]


def summarize(rows):
    """Per-k mean of every numeric column, plus counts of failed cells."""
    out = {"schema": SWEEP_SCHEMA, "n_rows": len(rows),
           "n_failed": sum(1 for r in rows if r["status"] != "ok"), "by_k": {}}
    numeric = [c for c in COLUMNS if c not in ("schema", "k", "seed", "status", "stop_reason")]
    for k in sorted({r["k"] for r in rows}):
        cell = {}
        for c in numeric:
            vals = [r[c] for r in rows if r["k"] == k and isinstance(r[c], (int, float))
                    and not (isinstance(r[c], float) and math.isnan(r[c]))]
            cell[c] = float(np.mean(vals)) if vals else None
        out["by_k"][str(k)] = cell
    return out
