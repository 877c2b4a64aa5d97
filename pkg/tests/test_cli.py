import csv
import json

import numpy as np
import pytest

from ncdkit import __version__
from ncdkit.cli import ConfigError, main, resolve_config
from ncdkit.distance import read_binary, read_csv
from ncdkit.experiment import read_predictions

SMALL = ["--limit", "240", "--test-size", "40", "--folds", "3", "--lambda", "0.1,1", "--k", "1,3",
         "--C", "1,10", "--penalty", "none,1", "--model", "knn,svc,logreg"]


def run(*args):
    return main([str(a) for a in args])


def test_matrix_zero_diagonal_and_provenance(tmp_path, capsys):
    assert run("matrix", "--limit", 10, "--out", tmp_path) == 0
    values, rows, cols = read_csv(tmp_path / "matrix.csv")
    assert values.shape == (10, 10) and np.all(np.diag(values) == 0)
    head = json.loads((tmp_path / "matrix.csv").read_text().splitlines()[0][2:])
    assert head["version"] == __version__ and len(head["config_digest"]) == 16
    side = json.loads((tmp_path / "matrix.json").read_text())
    assert side["counters"]["single_calls"] == 10 and side["counters"]["concat_calls"] == 45
    assert read_binary(tmp_path / "matrix.ncdm").tobytes() == values.tobytes()


def test_matrix_cache_toggle_is_invisible(tmp_path):
    run("matrix", "--limit", 15, "--symmetrisation", "vanilla", "--out", tmp_path / "a")
    run("matrix", "--limit", 15, "--symmetrisation", "vanilla", "--no-cache", "--out", tmp_path / "b")
    assert (tmp_path / "a/matrix.ncdm").read_bytes() == (tmp_path / "b/matrix.ncdm").read_bytes()


def test_matrix_kernel_output(tmp_path):
    assert run("matrix", "--limit", 6, "--kernel", "rbf", "--lambda", "0.5", "--out", tmp_path) == 0
    K = read_binary(tmp_path / "kernel.ncdm")
    assert np.all(np.diag(K) == 1.0)


def test_assumed_rectangle_exits_nonzero(tmp_path, capsys):
    code = run("matrix", "--limit", 100, "--test-size", 20, "--symmetrisation", "assumed",
               "--rows", "test", "--cols", "train", "--out", tmp_path)
    assert code == 1
    assert "ASSUMED" in capsys.readouterr().err


@pytest.mark.parametrize("args,code", [
    (["matrix", "--metric", "cosine"], 1),
    (["matrix", "--compressor", "zstd"], 1),
    (["matrix", "--level", "42"], 1),
    (["matrix", "--lambda", "-1"], 1),
    (["matrix", "--k", "2"], 1),
    (["matrix", "--bogus"], 1),
    (["matrix", "--dataset", "/no/such/file.tsv"], 1),
    (["frobnicate"], 1),
])
def test_usage_errors(tmp_path, args, code):
    assert run(*args, "--out", tmp_path) == code


def test_data_error_exit(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("ham\thello\nnope\tworld\n")
    assert run("matrix", "--dataset", bad, "--out", tmp_path) == 2
    assert run("evaluate", "--out", tmp_path / "missing") == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("seed: 3\nfolds: 4\nlambda: [0.5, 2]\nsymmetrisation: average\n")
    c = resolve_config(cfg, {"seed": 9})
    assert (c.seed, c.folds, c.lambdas, c.symmetrisation) == (9, 4, [0.5, 2.0], ["average"])
    assert resolve_config().seed == 42
    cfg.write_text("sede: 3\n")
    with pytest.raises(ConfigError):
        resolve_config(cfg)


def test_digest_ignores_workers():
    a, b = resolve_config(None, {"workers": 1}), resolve_config(None, {"workers": 8})
    assert a.digest() == b.digest() != resolve_config(None, {"seed": 1}).digest()


def test_audit_reports(tmp_path, capsys):
    assert run("audit", "--metric", "levenshtein", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "audit_levenshtein.json").read_text())
    assert doc["violations_found"] == 0
    assert run("audit", "--compressor", "gzip", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "audit_ncd_gzip.json").read_text())
    assert doc["all_axioms_violated"] and doc["provenance"]["version"] == __version__


def test_train_evaluate_and_recount(tmp_path, capsys):
    assert run("train", *SMALL, "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert out.startswith("best ")
    for name in ("model.json", "gridsearch.csv", "gridsearch.json", "predictions.jsonl", "test_matrix.ncdm"):
        assert (tmp_path / name).exists()
    assert run("evaluate", "--out", tmp_path) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    rows = read_predictions(tmp_path / "predictions.jsonl")
    assert len(rows) == 40
    assert metrics["accuracy"] == sum(r["prediction"] == r["label"] for r in rows) / 40
    grid = json.loads((tmp_path / "gridsearch.json").read_text())
    with open(tmp_path / "gridsearch.csv") as fh:
        recs = [r for r in csv.DictReader(fh) if int(r["config"]) == grid["best_index"]]
    assert grid["best_cv_mean"] == pytest.approx(np.mean([float(r["accuracy"]) for r in recs]), abs=1e-15)


def test_evaluate_detects_tampering(tmp_path):
    run("train", *SMALL, "--model", "knn", "--out", tmp_path)
    p = tmp_path / "predictions.jsonl"
    lines = p.read_text().splitlines()
    rec = json.loads(lines[1])
    rec["prediction"] = 1 - rec["prediction"]
    lines[1] = json.dumps(rec)
    p.write_text("\n".join(lines) + "\n")
    assert run("evaluate", "--out", tmp_path) == 2


def test_train_is_reproducible(tmp_path):
    for d, w in (("a", 1), ("b", 4)):
        assert run("train", *SMALL, "--workers", w, "--out", tmp_path / d) == 0
    for name in ("predictions.jsonl", "test_matrix.ncdm", "gridsearch.csv", "model.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_bench_and_report(tmp_path, capsys):
    assert run("bench", "--n", 30, "--symmetrisation", "vanilla,assumed", "--backends", "--out", tmp_path) == 0
    with open(tmp_path / "bench.csv") as fh:
        fh.readline()
        rows = list(csv.DictReader(fh))
    assert [r["concat_calls"] for r in rows] == ["870", "435"]
    assert (tmp_path / "backends.csv").exists()
    assert run("report", *SMALL, "--metric", "ncd,levenshtein", "--symmetrisation", "enforced",
               "--out", tmp_path / "r") == 0
    table = capsys.readouterr().out
    assert "| k-ncd_gzip |" in table and "| d-levenshtein |" in table


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out
