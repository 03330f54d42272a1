"""Command-line entry point: ``python -m ensvim <command>``.

Exit codes: 0 success, 1 configuration or input-path error, 2 failed cells or checks.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .ensembles import fit_ensemble
from .evalmetrics import bias_variance
from .exceptions import ConfigurationError, EnsvimError
from .importance import default_background, sage_all
from .learners import MlpConfig, TreeConfig
from .oracle import exact_sage_enumeration
from .synthdata import generate, support_mask, train_test_split, write_dataset

EXIT_OK, EXIT_CONFIG, EXIT_FAILURES = 0, 1, 2

DECOMPOSE_DEFAULTS = {
    "datasets": ["friedman1"], "models": [{"type": "mlp"}], "ensembling": ["bagging"],
    "methods": ["loco"], "n_grid": [128, 512, 2048], "B": 10, "seeds": 30,
}


def _load_config(args, defaults=None):
    overrides = {"seed": args.seed, "parallelism": args.parallelism, "output_dir": args.out}
    if args.config:
        return bench.ExperimentConfig.from_json(args.config, **overrides)
    if defaults is None:
        raise ConfigurationError("--config is required")
    return bench.ExperimentConfig.from_dict(defaults, **overrides)


def cmd_generate(args):
    config = _load_config(args)
    out = Path(config.output_dir) / "datasets"
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for ds_spec in config.datasets:
        for n in config.n_grid:
            for r in range(config.seeds):
                ds = generate(ds_spec["dgp"], n, rho=ds_spec["rho"], snr=ds_spec["snr"],
                              seed=bench.data_seed(config, ds_spec["name"], n, r), d=ds_spec["d"])
                write_dataset(ds, out / f"{ds_spec['name']}_n{n}_r{r}.csv")
                count += 1
    print(f"wrote {count} datasets to {out}")
    return EXIT_OK


def cmd_truth(args):
    config = _load_config(args)
    truth = bench.build_truth(config)
    for (dataset, model, ensembling, method), gt in truth.items():
        print(f"{dataset} {model} {ensembling} {method}: " + " ".join(f"{v:.4g}" for v in gt.scores))
    return EXIT_OK


def cmd_run(args):
    config = _load_config(args)
    report = bench.run_experiment(config, progress=_progress if args.verbose else None)
    out = bench.write_outputs(report, config)
    print(f"{len(report.rows)} rows, {len(report.failures)} failed cells -> {out}")
    return EXIT_OK if report.ok else EXIT_FAILURES


def cmd_summarize(args):
    rows = bench.read_table(args.report)
    grouping = tuple(args.group_by.split(",")) if args.group_by else (
        "dataset", "model", "ensembling", "method", "strategy", "n")
    summary = bench.summarize(rows, grouping)
    out = Path(args.out or Path(args.report).parent)
    bench.emit(summary, "csv", out / "summary.csv")
    bench.emit(summary, "json", out / "summary.json")
    for row in summary:
        print(", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    return EXIT_OK


def sage_check(n_instances=10, d=6, n_perms=512, n_cal=32, seed=0):
    """Sampled SAGE against exact enumeration on small random instances.

    Returns one record per instance with the largest standardized gap and
    the Shapley efficiency residual.
    """
    records = []
    for i in range(n_instances):
        learner = TreeConfig() if i % 2 == 0 else MlpConfig()
        ds = generate("friedman1", 600, seed=seed * 1000 + i, d=d)
        train, test = train_test_split(ds)
        ens = fit_ensemble("bagging", learner, 5, train.X, train.y, seed * 1000 + i)
        bg = default_background(train.X, i)
        sampled = sage_all(ens, test, bg, n_perms, n_cal, seed=i, strategies=("ensemble",))["ensemble"]
        exact = exact_sage_enumeration(ens, test, bg, n_cal, seed=i)
        se = sampled.diagnostics["convergence_se"]
        gap = np.abs(sampled.scores - exact.scores)
        z = np.max(np.where(se > 0, gap / np.where(se > 0, se, 1.0), np.where(gap > 1e-12, np.inf, 0.0)))
        v_full = exact.scores.sum()
        records.append({
            "instance": i, "learner": learner.to_dict()["type"], "max_z": float(z),
            "efficiency_residual": float(abs(sampled.scores.sum() - v_full)),
            "passed": bool(np.all(gap <= 3 * se + 1e-12)),
        })
    return records


def cmd_sage_check(args):
    records = sage_check(seed=args.seed or 0)
    for r in records:
        print(json.dumps(r))
    return EXIT_OK if all(r["passed"] for r in records) else EXIT_FAILURES


def decompose_table(report):
    """Per (strategy, n, feature) squared bias, variance and MSE across replicates."""
    cells = {}
    for row in report.rows:
        key = (row["dataset"], row["model"], row["ensembling"], row["method"], row["strategy"], row["n"])
        cells.setdefault(key, {}).setdefault(row["seed"], {})[row["feature"]] = (row["score"], row["truth"])
    out = []
    for key in sorted(cells):
        runs = cells[key]
        seeds = sorted(runs)
        feats = sorted(runs[seeds[0]])
        est = np.array([[runs[s][j][0] for j in feats] for s in seeds])
        truth = np.array([runs[seeds[0]][j][1] for j in feats])
        dec = bias_variance(est, truth)
        support = support_mask(key[0], len(feats))
        for j in feats:
            out.append(dict(zip(("dataset", "model", "ensembling", "method", "strategy", "n"), key),
                            feature=j, support=bool(support[j]), mse=float(dec.mse[j]),
                            bias_sq=float(dec.bias_sq[j]), variance=float(dec.variance[j]),
                            n_runs=dec.n_runs))
    return out


def cmd_decompose(args):
    config = _load_config(args, DECOMPOSE_DEFAULTS)
    report = bench.run_experiment(config, progress=_progress if args.verbose else None)
    bench.write_outputs(report, config)
    table = decompose_table(report)
    bench.emit(table, "csv", Path(config.output_dir) / "decompose.csv")
    print(f"{len(table)} decomposition rows -> {config.output_dir}/decompose.csv")
    return EXIT_OK if report.ok else EXIT_FAILURES


def _progress(cell, err):
    print(("FAILED " if err else "done ") + "/".join(map(str, cell)), file=sys.stderr)


def build_parser():
    parser = argparse.ArgumentParser(prog="ensvim", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--parallelism", type=int, help="worker processes")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write the grid's datasets as CSV")
    sub.add_parser("truth", parents=[common], help="build or load cached truth vectors")
    sub.add_parser("run", parents=[common], help="run the experiment grid")
    p = sub.add_parser("summarize", parents=[common], help="summarize a report CSV")
    p.add_argument("report", help="report.csv or report.json written by 'run'")
    p.add_argument("--group-by", help="comma-separated grouping keys")
    sub.add_parser("sage-check", parents=[common], help="sampled vs enumerated SAGE at d=6")
    sub.add_parser("decompose", parents=[common], help="bias-variance study across n")
    return parser


COMMANDS = {
    "generate": cmd_generate, "truth": cmd_truth, "run": cmd_run, "summarize": cmd_summarize,
    "sage-check": cmd_sage_check, "decompose": cmd_decompose,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EnsvimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURES


if __name__ == "__main__":
    sys.exit(main())
