"""Experiment grid runner.

A config expands into cells ``(dataset, model, ensembling, n, replicate)``.
Each cell draws one dataset, fits one ensemble and scores every method
under every strategy, so strategies and methods are compared on paired
fits. Finished cells are cached under ``<output_dir>/cells`` and tracked in
``manifest.json``; a rerun only computes what is missing.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import traceback
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ._seeding import derive_seed
from .evalmetrics import bias_variance, default_epsilon, importance_mse, relevance_labels, roc_auc
from .exceptions import ConfigurationError, EnsvimError, UndefinedMetricError
from .importance import METHODS, STRATEGIES
from .learners import config_from_dict
from .oracle import ASYMPTOTIC_N, TRUTH_SEED, _atomic_write_json, asymptotic_importances
from .pipeline import run_pipeline
from .synthdata import DGPS, N_FEATURES, generate, support_mask

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REPORT_COLUMNS = ("dataset", "model", "ensembling", "method", "strategy", "n", "B", "seed",
                  "feature", "score", "se", "truth", "r2_full", "runtime_ms")
_INT_COLUMNS = {"n", "B", "seed", "feature"}
_STR_COLUMNS = {"dataset", "model", "ensembling", "method", "strategy", "group"}
GROUP_KEYS = ("dataset", "model", "ensembling", "method", "strategy", "n", "B")
ENSEMBLINGS = ("bagging", "voting")


@dataclass
class ExperimentConfig:
    datasets: list
    models: list
    ensembling: list = field(default_factory=lambda: ["bagging"])
    methods: list = field(default_factory=lambda: ["loco"])
    strategies: list = field(default_factory=lambda: list(STRATEGIES))
    n_grid: list = field(default_factory=lambda: [512])
    B: int = 10
    seeds: int = 30
    seed: int = 0
    truth_source: dict = field(default_factory=lambda: {"kind": "asymptotic"})
    output_dir: str = "results"
    parallelism: int = 1
    method_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.datasets = [_dataset_spec(d) for d in self.datasets]
        self.models = [_model_spec(m) for m in self.models]
        for name in ("datasets", "models", "ensembling", "methods", "strategies", "n_grid"):
            if not getattr(self, name):
                raise ConfigurationError(f"{name} must be nonempty")
        _check_subset("ensembling", self.ensembling, ENSEMBLINGS)
        _check_subset("methods", self.methods, METHODS)
        _check_subset("strategies", self.strategies, STRATEGIES)
        if self.seeds < 1:
            raise ConfigurationError("seeds must be >= 1")
        if self.B < 1:
            raise ConfigurationError("B must be >= 1")
        if self.parallelism < 1:
            raise ConfigurationError("parallelism must be >= 1")
        if any(int(n) < 8 for n in self.n_grid):
            raise ConfigurationError("every n must be at least 8")
        self.n_grid = [int(n) for n in self.n_grid]
        for name in {d["name"] for d in self.datasets}:
            if sum(d["name"] == name for d in self.datasets) > 1:
                raise ConfigurationError(f"duplicate dataset name {name!r}")
        kind = self.truth_source.get("kind", "asymptotic")
        if kind not in ("asymptotic", "none"):
            raise ConfigurationError(f"unknown truth_source kind {kind!r}")

    @classmethod
    def from_dict(cls, payload, **overrides):
        payload = dict(payload)
        payload.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(payload) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown config fields {sorted(unknown)}")
        try:
            return cls(**payload)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def from_json(cls, path, **overrides):
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(payload, **overrides)

    def to_dict(self):
        return asdict(self)

    def cells(self):
        """Grid coordinates in canonical order."""
        return [
            (ds["name"], m["name"], ens, n, r)
            for ds in self.datasets for m in self.models for ens in self.ensembling
            for n in self.n_grid for r in range(self.seeds)
        ]

    def dataset(self, name):
        return next(d for d in self.datasets if d["name"] == name)

    def model(self, name):
        return next(m for m in self.models if m["name"] == name)


def _check_subset(name, values, allowed):
    bad = [v for v in values if v not in allowed]
    if bad:
        raise ConfigurationError(f"{name} entries {bad} not in {allowed}")


def _dataset_spec(spec):
    spec = {"dgp": spec} if isinstance(spec, str) else dict(spec)
    if "dgp" not in spec:
        raise ConfigurationError("dataset entries need a 'dgp' field")
    if spec["dgp"] not in DGPS:
        raise ConfigurationError(f"unknown dgp {spec['dgp']!r}")
    spec.setdefault("name", spec["dgp"])
    spec.setdefault("rho", None)
    spec.setdefault("snr", 1.0)
    spec.setdefault("d", N_FEATURES)
    return spec


def _model_spec(spec):
    spec = {"type": spec} if isinstance(spec, str) else dict(spec)
    name = spec.pop("name", spec.get("type"))
    try:
        learner = config_from_dict(spec)
    except (EnsvimError, TypeError) as exc:
        raise ConfigurationError(f"bad model config {spec}: {exc}") from None
    return {"name": name, **learner.to_dict()}


@dataclass
class ExperimentReport:
    rows: list
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures


# Seeds and keys --------------------------------------------------------------

def data_seed(config, dataset, n, replicate):
    """Dataset draws are shared by every model and ensembling at a grid point."""
    return derive_seed("data", config.seed, dataset, n, replicate)


def cell_seed(config, dataset, model, ensembling, n, replicate):
    return derive_seed("cell", config.seed, dataset, model, ensembling, n, replicate)


def cell_key(config, cell):
    dataset, model, ensembling, n, r = cell
    payload = {
        "dataset": config.dataset(dataset), "model": config.model(model), "ensembling": ensembling,
        "n": n, "replicate": r, "B": config.B, "seed": config.seed, "methods": sorted(config.methods),
        "strategies": sorted(config.strategies), "params": config.method_params,
    }
    return derive_seed(json.dumps(payload, sort_keys=True, default=str)).to_bytes(8, "big").hex()


# Truth -----------------------------------------------------------------------

def _truth_options(config):
    src = dict(config.truth_source)
    return {
        "n": int(src.get("n", ASYMPTOTIC_N)),
        "seed": int(src.get("seed", TRUTH_SEED)),
        "B": int(src.get("B", config.B)),
        "cache_dir": src.get("cache_dir") or str(Path(config.output_dir) / "truth"),
    }


def build_truth(config):
    """``{(dataset, model, ensembling, method): GroundTruth}`` for every needed cell."""
    if config.truth_source.get("kind", "asymptotic") == "none":
        return {}
    opts = _truth_options(config)
    truth = {}
    for ds in config.datasets:
        for m in config.models:
            learner = {k: v for k, v in m.items() if k != "name"}
            for ens in config.ensembling:
                log.info("truth for %s/%s/%s", ds["name"], m["name"], ens)
                vectors = asymptotic_importances(
                    config.methods, ds["dgp"], learner, "ensemble", opts["seed"], ens, opts["B"],
                    opts["n"], ds["rho"], ds["snr"], ds["d"], config.method_params, opts["cache_dir"])
                for method, gt in vectors.items():
                    truth[(ds["name"], m["name"], ens, method)] = gt
    return truth


# Cells -----------------------------------------------------------------------

def run_cell(config, cell):
    """Rows for one grid cell (``truth`` left as NaN; joined during assembly)."""
    dataset, model, ensembling, n, r = cell
    ds_spec = config.dataset(dataset)
    learner = {k: v for k, v in config.model(model).items() if k != "name"}
    with threadpool_limits(limits=1):
        ds = generate(ds_spec["dgp"], n, rho=ds_spec["rho"], snr=ds_spec["snr"],
                      seed=data_seed(config, dataset, n, r), d=ds_spec["d"])
        result = run_pipeline(ds, learner, ensembling, config.B, config.methods, config.strategies,
                              cell_seed(config, dataset, model, ensembling, n, r),
                              config.method_params)
    rows = []
    for method in config.methods:
        for strategy in config.strategies:
            sc = result.scores[(method, strategy)]
            for j in range(len(sc.scores)):
                rows.append({
                    "dataset": dataset, "model": model, "ensembling": ensembling,
                    "method": method, "strategy": strategy, "n": n, "B": config.B, "seed": r,
                    "feature": j, "score": float(sc.scores[j]), "se": float(sc.se[j]),
                    "truth": math.nan, "r2_full": float(result.r2[strategy]),
                    "runtime_ms": float(result.runtime_ms[method]),
                })
    return rows


def _cell_task(config_dict, cell, cell_path):
    config = ExperimentConfig.from_dict(config_dict)
    try:
        rows = run_cell(config, cell)
    except Exception as exc:  # recorded in the manifest, never dropped
        return cell, None, f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"
    _atomic_write_json(cell_path, {"cell": list(cell), "rows": _json_safe(rows)})
    return cell, rows, None


def _json_safe(rows):
    return [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
            for row in rows]


def _from_json_rows(rows):
    return [{k: (math.nan if v is None else v) for k, v in row.items()} for row in rows]


def _load_cell(path):
    with open(path) as fh:
        return _from_json_rows(json.load(fh)["rows"])


def run_experiment(config: ExperimentConfig, progress=None) -> ExperimentReport:
    """Execute every cell of the grid (reusing cached cells) and assemble the report.

    Assembly follows the canonical cell order, so the report does not depend
    on how cells were scheduled across workers.
    """
    out = Path(config.output_dir)
    cell_dir = out / "cells"
    cell_dir.mkdir(parents=True, exist_ok=True)
    truth = build_truth(config)

    cells = config.cells()
    paths = {c: cell_dir / f"{cell_key(config, c)}.json" for c in cells}
    todo = [c for c in cells if not paths[c].exists()]
    results, errors = {}, {}
    log.info("%d cells, %d cached", len(cells), len(cells) - len(todo))

    def collect(cell, rows, err):
        if err is None:
            results[cell] = rows
        else:
            errors[cell] = err
            log.warning("cell %s failed: %s", cell, err.splitlines()[0])
        if progress:
            progress(cell, err)

    cfg = config.to_dict()
    if config.parallelism == 1 or len(todo) <= 1:
        for c in todo:
            collect(*_cell_task(cfg, c, paths[c]))
    else:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            futures = [pool.submit(_cell_task, cfg, c, paths[c]) for c in todo]
            for fut in futures:
                collect(*fut.result())

    rows, failures, manifest = [], [], []
    for c in cells:
        entry = {"cell": list(c), "key": paths[c].stem}
        if c in errors:
            failures.append({"cell": list(c), "error": errors[c]})
            manifest.append(dict(entry, status="failed", error=errors[c]))
            continue
        cell_rows = results[c] if c in results else _load_cell(paths[c])
        dataset, model, ensembling = c[:3]
        for row in cell_rows:
            gt = truth.get((dataset, model, ensembling, row["method"]))
            row["truth"] = float(gt.scores[row["feature"]]) if gt is not None else math.nan
        rows.extend(cell_rows)
        manifest.append(dict(entry, status="done"))
    _atomic_write_json(out / "manifest.json", {
        "schema_version": SCHEMA_VERSION, "config": cfg, "cells": manifest,
        "n_failed": len(failures),
    })
    return ExperimentReport(rows, failures)


# Summaries ---------------------------------------------------------------------

def _vectors(rows):
    """Per-replicate score and truth vectors keyed by all coordinates but feature."""
    vecs = defaultdict(dict)
    meta = {}
    for row in rows:
        key = tuple(row[k] for k in GROUP_KEYS) + (row["seed"],)
        vecs[key][row["feature"]] = (row["score"], row["truth"])
        meta[key] = row
    out = {}
    for key, feats in vecs.items():
        order = sorted(feats)
        out[key] = (np.array([feats[j][0] for j in order]), np.array([feats[j][1] for j in order]),
                    meta[key])
    return out


def _support(row, truth):
    """Construction support when the dataset is named after its DGP, else truth-derived."""
    if row["dataset"] in DGPS:
        return support_mask(row["dataset"], len(truth))
    if np.any(np.isnan(truth)):
        return None
    return relevance_labels(truth, default_epsilon(truth))


def summarize(report, grouping=("dataset", "model", "ensembling", "method", "strategy", "n")):
    """One summary row per group.

    Columns: replicate count, mean and standard deviation of the
    per-replicate importance MSE (all, support and null features), mean AUC
    against the relevant set, squared bias and variance averaged over support
    features, and mean R^2. The relevant set is the construction support for
    datasets named after a DGP; ``auc_truth_labels`` always uses the
    epsilon-thresholded truth.
    """
    rows = report.rows if isinstance(report, ExperimentReport) else report
    if not rows:
        raise ConfigurationError("cannot summarize an empty report")
    grouping = (grouping,) if isinstance(grouping, str) else tuple(grouping)
    bad = [g for g in grouping if g not in GROUP_KEYS]
    if bad:
        raise ConfigurationError(f"unknown grouping keys {bad}; allowed {GROUP_KEYS}")

    groups = defaultdict(list)
    for key, vec in _vectors(rows).items():
        groups[tuple(vec[2][g] for g in grouping)].append((key, vec))

    summary = []
    for gkey in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        members = groups[gkey]
        mses = {"all": [], "support": [], "null": []}
        aucs, aucs_eps, r2s = [], [], []
        by_cell = defaultdict(list)
        for key, (score, truth, meta) in members:
            r2s.append(meta["r2_full"])
            by_cell[key[:-1]].append((score, truth))
            if np.any(np.isnan(truth)):
                continue
            support = _support(meta, truth)
            mses["all"].append(importance_mse(score, truth))
            if support is not None and support.any() and (~support).any():
                mses["support"].append(importance_mse(score, truth, "support", support))
                mses["null"].append(importance_mse(score, truth, "null", support))
            eps_labels = relevance_labels(truth, default_epsilon(truth))
            labels = support if support is not None else eps_labels
            for target, lab in ((aucs, labels), (aucs_eps, eps_labels)):
                try:
                    target.append(roc_auc(score, lab))
                except UndefinedMetricError:
                    pass
        bias_sq, variance = [], []
        for vecs in by_cell.values():
            truth = vecs[0][1]
            if len(vecs) < 2 or np.any(np.isnan(truth)):
                continue
            dec = bias_variance(np.array([v[0] for v in vecs]), truth)
            support = _support(members[0][1][2], truth)
            mask = support if support is not None else np.ones(len(truth), dtype=bool)
            bias_sq.append(dec.bias_sq[mask].mean())
            variance.append(dec.variance[mask].mean())
        row = dict(zip(grouping, gkey))
        row.update({
            "n_runs": len(members),
            "mse": _mean(mses["all"]), "mse_sd": _sd(mses["all"]),
            "mse_support": _mean(mses["support"]), "mse_null": _mean(mses["null"]),
            "auc": _mean(aucs), "auc_truth_labels": _mean(aucs_eps), "bias_sq_support": _mean(bias_sq),
            "variance_support": _mean(variance), "r2": _mean(r2s),
        })
        summary.append(row)
    return summary


def _mean(values):
    return float(np.mean(values)) if len(values) else math.nan


def _sd(values):
    return float(np.std(values, ddof=1)) if len(values) > 1 else math.nan


# Serialization ---------------------------------------------------------------

def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit(data, fmt, path, columns=None):
    """Write a report or summary as CSV (versioned comment header) or JSON records."""
    rows = data.rows if isinstance(data, ExperimentReport) else list(data)
    if columns is None:
        columns = REPORT_COLUMNS if isinstance(data, ExperimentReport) or not rows else tuple(rows[0])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            fh.write(f"# ensvim-table schema_version={SCHEMA_VERSION}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(row[c]) for c in columns])
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump({"schema_version": SCHEMA_VERSION, "columns": list(columns),
                       "rows": _json_safe([{c: r[c] for c in columns} for r in rows])}, fh, indent=1)
    else:
        raise ConfigurationError(f"unknown format {fmt!r}")


def _parse(column, text):
    if column in _STR_COLUMNS:
        return text
    if column in _INT_COLUMNS:
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path):
    """Parse a CSV or JSON file written by ``emit`` back into row dicts."""
    path = Path(path)
    if path.suffix == ".json":
        with open(path) as fh:
            return _from_json_rows(json.load(fh)["rows"])
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# ensvim-table"):
            fh.seek(0)
        reader = csv.reader(fh)
        header = next(reader)
        return [{c: _parse(c, v) for c, v in zip(header, line)} for line in reader]


def write_outputs(report, config, stem="report"):
    out = Path(config.output_dir)
    emit(report, "csv", out / f"{stem}.csv")
    emit(report, "json", out / f"{stem}.json")
    if report.rows:
        summary = summarize(report)
        emit(summary, "csv", out / "summary.csv")
        emit(summary, "json", out / "summary.json")
    if report.failures:
        _atomic_write_json(out / "failures.json", report.failures)
    return out


def default_workers():
    return os.cpu_count() or 1
