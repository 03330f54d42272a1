import json
import math

import numpy as np
import pytest

from ensvim import bench
from ensvim.bench import ExperimentConfig, ExperimentReport, emit, read_table, run_experiment, summarize
from ensvim.evalmetrics import default_epsilon, importance_mse, relevance_labels, roc_auc
from ensvim.exceptions import ConfigurationError
from ensvim.synthdata import support_mask


def _config(tmp_path, **kw):
    base = dict(datasets=["friedman1"], models=[{"type": "tree", "name": "rf"}], ensembling=["bagging"],
                methods=["loco"], n_grid=[64], B=2, seeds=2,
                truth_source={"kind": "asymptotic", "n": 1500}, output_dir=str(tmp_path / "out"))
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def _csv_without_runtime(path):
    rows = read_table(path)
    return [{k: v for k, v in r.items() if k != "runtime_ms"} for r in rows]


def _strip_runtime(rows):
    return [{k: v for k, v in r.items() if k != "runtime_ms"} for r in rows]


def test_single_cell_has_d_rows(tmp_path):
    cfg = _config(tmp_path, seeds=1, strategies=["ensemble"])
    report = run_experiment(cfg)
    assert report.ok
    assert len(report.rows) == 20
    assert [r["feature"] for r in report.rows] == list(range(20))
    assert all(not math.isnan(r["truth"]) for r in report.rows)
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["schema_version"] == bench.SCHEMA_VERSION
    assert [c["status"] for c in manifest["cells"]] == ["done"]


def test_rerun_identical_csv(tmp_path):
    a = run_experiment(_config(tmp_path / "a"))
    b = run_experiment(_config(tmp_path / "b"))
    emit(a, "csv", tmp_path / "a.csv")
    emit(b, "csv", tmp_path / "b.csv")
    assert _csv_without_runtime(tmp_path / "a.csv") == _csv_without_runtime(tmp_path / "b.csv")


def test_schedule_independence(tmp_path):
    serial = run_experiment(_config(tmp_path / "p1", parallelism=1))
    parallel = run_experiment(_config(tmp_path / "p4", parallelism=4))
    assert _strip_runtime(serial.rows) == _strip_runtime(parallel.rows)


def test_cell_seed_excludes_other_axes(tmp_path):
    # adding models or replicates leaves the existing cells' values unchanged
    small = run_experiment(_config(tmp_path / "s", seeds=1))
    big = run_experiment(_config(tmp_path / "b", seeds=2,
                                 models=[{"type": "tree", "name": "rf"}, {"type": "linear", "name": "ols"}]))
    sub = [r for r in big.rows if r["model"] == "rf" and r["seed"] == 0]
    assert _strip_runtime(sub) == _strip_runtime(small.rows)


def test_resume_recomputes_only_missing(tmp_path):
    cfg = _config(tmp_path)
    clean = run_experiment(cfg)
    cells = sorted((tmp_path / "out" / "cells").glob("*.json"))
    assert len(cells) == 2
    cells[0].unlink()
    seen = []
    resumed = run_experiment(cfg, progress=lambda cell, err: seen.append(cell))
    assert len(seen) == 1
    assert _strip_runtime(resumed.rows) == _strip_runtime(clean.rows)


def test_failures_recorded_not_dropped(tmp_path, monkeypatch):
    cfg = _config(tmp_path, n_grid=[64, 96], seeds=1)
    real = bench.run_cell

    def flaky(config, cell):
        if cell[3] == 96:
            raise RuntimeError("boom")
        return real(config, cell)

    monkeypatch.setattr(bench, "run_cell", flaky)
    report = run_experiment(cfg)
    assert not report.ok
    assert len(report.failures) == 1 and "boom" in report.failures[0]["error"]
    assert {r["n"] for r in report.rows} == {64}
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert sorted(c["status"] for c in manifest["cells"]) == ["done", "failed"]
    bench.write_outputs(report, cfg)
    assert json.loads((tmp_path / "out" / "failures.json").read_text())[0]["cell"][3] == 96


def test_summarize_grouping_and_consistency(tmp_path):
    report = run_experiment(_config(tmp_path, seeds=3))
    by_strategy = summarize(report, ("strategy",))
    assert [r["strategy"] for r in by_strategy] == ["ensemble", "sub_models"]
    for row in by_strategy:
        vecs = {}
        for r in report.rows:
            if r["strategy"] == row["strategy"]:
                vecs.setdefault(r["seed"], {})[r["feature"]] = (r["score"], r["truth"])
        mses, aucs, aucs_eps = [], [], []
        for feats in vecs.values():
            est = np.array([feats[j][0] for j in sorted(feats)])
            truth = np.array([feats[j][1] for j in sorted(feats)])
            mses.append(importance_mse(est, truth))
            aucs.append(roc_auc(est, support_mask("friedman1", 20)))
            aucs_eps.append(roc_auc(est, relevance_labels(truth, default_epsilon(truth))))
        assert row["n_runs"] == 3
        assert row["mse"] == pytest.approx(np.mean(mses), rel=1e-12)
        assert row["auc"] == pytest.approx(np.mean(aucs), rel=1e-12)
        assert row["auc_truth_labels"] == pytest.approx(np.mean(aucs_eps), rel=1e-12)
        assert row["bias_sq_support"] >= 0 and row["variance_support"] >= 0


def test_summarize_errors():
    with pytest.raises(ConfigurationError):
        summarize(ExperimentReport([]))
    with pytest.raises(ConfigurationError):
        summarize([{"dataset": "x"}], ("colour",))


def test_emit_roundtrip_and_formats_agree(tmp_path):
    report = run_experiment(_config(tmp_path, seeds=1))
    emit(report, "csv", tmp_path / "r.csv")
    emit(report, "json", tmp_path / "r.json")
    from_csv, from_json = read_table(tmp_path / "r.csv"), read_table(tmp_path / "r.json")
    assert from_csv == report.rows
    assert from_json == from_csv
    header = (tmp_path / "r.csv").read_text().splitlines()[:2]
    assert header[0].startswith("# ensvim-table schema_version=")
    assert header[1].split(",") == list(bench.REPORT_COLUMNS)


def test_emit_nan_roundtrip(tmp_path):
    row = {c: 0 for c in bench.REPORT_COLUMNS}
    row.update(dataset="d", model="m", ensembling="bagging", method="loco", strategy="ensemble",
               score=0.1 + 0.2, se=1e-300, truth=math.nan, r2_full=-0.0, runtime_ms=5.0)
    report = ExperimentReport([row])
    for fmt in ("csv", "json"):
        emit(report, fmt, tmp_path / f"x.{fmt}")
        back = read_table(tmp_path / f"x.{fmt}")[0]
        assert math.isnan(back["truth"])
        assert back["score"] == 0.1 + 0.2 and back["se"] == 1e-300


def test_empty_report_header_only(tmp_path):
    emit(ExperimentReport([]), "csv", tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].split(",") == list(bench.REPORT_COLUMNS)
    assert read_table(tmp_path / "e.csv") == []
    with pytest.raises(ConfigurationError):
        emit(ExperimentReport([]), "xml", tmp_path / "e.xml")


@pytest.mark.parametrize("patch", [
    {"datasets": []}, {"seeds": 0}, {"methods": ["shap"]}, {"ensembling": ["boosting"]},
    {"datasets": ["nope"]}, {"models": [{"type": "svm"}]}, {"colour": "red"},
    {"truth_source": {"kind": "oracle-ish"}}, {"n_grid": [2]}, {"parallelism": 0},
])
def test_config_validation(tmp_path, patch):
    with pytest.raises(ConfigurationError):
        _config(tmp_path, **patch)


def test_config_json_roundtrip(tmp_path):
    cfg = _config(tmp_path)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path) == cfg
    assert ExperimentConfig.from_json(path, seed=7).seed == 7
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json(tmp_path / "missing.json")


def test_no_truth_kind(tmp_path):
    report = run_experiment(_config(tmp_path, seeds=1, truth_source={"kind": "none"}))
    assert all(math.isnan(r["truth"]) for r in report.rows)
    summary = summarize(report)
    assert all(math.isnan(r["mse"]) for r in summary)
