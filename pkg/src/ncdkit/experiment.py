"""End-to-end runs: load, balance, split, grid-search and compare model families."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

from .classify import (
    KNN_KS,
    POWERS,
    GridSearchResult,
    MatrixProvider,
    accuracy,
    confidence_interval,
    default_grid,
    grid_search_cv,
)
from .compression import LengthCache
from .data import LabeledCorpus, make_splits, undersample
from .distance import MetricKind, MetricSpec, Policy


def prepare_corpus(corpus: LabeledCorpus, test_size=200, folds=5, seed=42, train_size=None,
                   balance=True) -> LabeledCorpus:
    if balance:
        corpus = undersample(corpus, seed)
    return make_splits(corpus, test_size, folds, seed, train_size)


def kernel_for(metric: MetricSpec) -> str:
    """RBF everywhere except the Hamming ratio, which gets the Hamming kernel."""
    return "hamming" if metric.kind is MetricKind.HAMMING_RATIO else "rbf"


def family_grids(metric: MetricSpec, lambdas=POWERS, ks=KNN_KS, models=("knn", "logreg", "svc")):
    """Split the canonical grid into kernelised models and distance-only KNN."""
    kern = (kernel_for(metric),)
    kernelised = [c for c in default_grid(models, kern, lambdas, ks, raw_knn=False)]
    distance = default_grid(("knn",), kern, lambdas, ks, raw_knn=True)
    distance = [c for c in distance if not c.kernelised]
    return kernelised, distance


def write_predictions(path, result: GridSearchResult, provenance=None):
    with open(path, "w") as fh:
        if provenance is not None:
            fh.write(json.dumps({"provenance": provenance}, sort_keys=True) + "\n")
        for sid, lab, pred in zip(result.test_ids, result.test_labels, result.test_predictions):
            fh.write(json.dumps({"id": sid, "label": lab, "prediction": pred}) + "\n")


def read_predictions(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if "provenance" in rec:
                continue
            rows.append(rec)
    return rows


def score_predictions(rows) -> dict:
    """Accuracy and 95% interval recounted from a prediction dump."""
    acc = accuracy([r["prediction"] for r in rows], [r["label"] for r in rows])
    lo, hi = confidence_interval(acc, len(rows))
    return {"accuracy": acc, "ci95": [lo, hi], "n": len(rows),
            "correct": sum(r["prediction"] == r["label"] for r in rows)}


@dataclass
class Run:
    metric: str
    policy: str
    family: str  # "kernel" | "distance"
    result: GridSearchResult


@dataclass
class Experiment:
    dataset: str
    runs: list = field(default_factory=list)

    def best(self, metric: str, family: str) -> Run:
        cands = [r for r in self.runs if r.metric == metric and r.family == family]
        # highest CV mean; ties keep the earliest policy in run order
        return max(cands, key=lambda r: (r.result.mean[r.result.best_index], -self.runs.index(r)))

    def metrics(self):
        return list(dict.fromkeys(r.metric for r in self.runs))

    def comparison_table(self, prediction_files=None) -> list:
        """Best kernelised model versus best distance-only KNN for each metric.

        Accuracy and interval are recounted from the prediction dumps when
        ``prediction_files`` maps runs to files.
        """
        rows = []
        for metric in self.metrics():
            for family, prefix in (("kernel", "k-"), ("distance", "d-")):
                run = self.best(metric, family)
                res = run.result
                if prediction_files is not None:
                    scored = score_predictions(read_predictions(prediction_files[id(run)]))
                else:
                    scored = score_predictions([{"label": l, "prediction": p} for l, p in
                                                zip(res.test_labels, res.test_predictions)])
                rows.append({
                    "dataset": self.dataset,
                    "name": prefix + metric,
                    "metric": metric,
                    "family": family,
                    "policy": run.policy,
                    "model": res.best_config.label(),
                    "cv_mean": float(res.mean[res.best_index]),
                    "test_accuracy": scored["accuracy"],
                    "ci_low": scored["ci95"][0],
                    "ci_high": scored["ci95"][1],
                    "n_test": scored["n"],
                })
        return rows


def run_experiment(corpus: LabeledCorpus, metrics, policies=(Policy.ENFORCED,), dataset="dataset",
                   folds=5, seed=42, workers=1, cache=True, lambdas=POWERS, ks=KNN_KS,
                   models=("knn", "logreg", "svc")) -> Experiment:
    """Grid-search both model families for every metric and policy on a split corpus."""
    exp = Experiment(dataset)
    for metric in metrics:
        m = MetricSpec.parse(metric) if isinstance(metric, str) else metric
        kernelised, distance = family_grids(m, lambdas, ks, models)
        for policy in policies:
            provider = MatrixProvider(corpus, m, policy, LengthCache(enabled=cache), workers)
            for family, grid in (("kernel", kernelised), ("distance", distance)):
                res = grid_search_cv(corpus, grid, provider, folds, seed, workers)
                exp.runs.append(Run(m.name, Policy(policy).value, family, res))
    return exp


def write_table(rows, path, header_comment=None):
    fields = ["dataset", "name", "metric", "family", "policy", "model", "cv_mean", "test_accuracy",
              "ci_low", "ci_high", "n_test"]
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow(r)


def format_table(rows) -> str:
    lines = ["| model | policy | config | test acc | 95% CI |", "|---|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r['name']} | {r['policy']} | {r['model']} | {r['test_accuracy']:.3f} | "
                     f"[{r['ci_low']:.3f}, {r['ci_high']:.3f}] |")
    return "\n".join(lines)
