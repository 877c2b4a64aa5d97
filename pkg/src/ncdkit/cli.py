"""Command-line entry point: ``ncdkit {matrix,audit,train,evaluate,bench,report}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .audit import audit, short_string_corpus
from .bench import compare_backends, run_bench
from .classify import (
    KNN_KS,
    POWERS,
    MatrixProvider,
    ModelConfig,
    TrainedModel,
    grid_search_cv,
    predict,
)
from .compression import CompressorError, CompressorHandle, LengthCache
from .data import DataError, LabeledCorpus, load_csv, load_sms_fixture, load_text
from .distance import (
    DistanceMatrix,
    MetricKind,
    MetricSpec,
    Policy,
    PolicyMisuseError,
    distance_matrix,
    read_binary,
    write_binary,
    write_csv,
    write_sidecar,
)
from .experiment import (
    format_table,
    kernel_for,
    prepare_corpus,
    read_predictions,
    run_experiment,
    score_predictions,
    write_predictions,
    write_table,
)
from .kernel import KernelMatrix, kernel_from_distances

log = logging.getLogger("ncdkit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: object = "sms"
    limit: int | None = None
    metric: list = field(default_factory=lambda: ["ncd"])
    compressor: list = field(default_factory=lambda: ["gzip"])
    level: int | None = None
    epsilon: float = 0.0
    symmetrisation: list = field(default_factory=lambda: ["enforced"])
    kernel: str | None = None
    lambdas: list = field(default_factory=lambda: list(POWERS))
    model: list = field(default_factory=lambda: ["knn", "logreg", "svc"])
    k: list = field(default_factory=lambda: list(KNN_KS))
    penalty: list = field(default_factory=lambda: [None, *POWERS])
    C: list = field(default_factory=lambda: list(POWERS))
    folds: int = 5
    test_size: int = 200
    train_size: int | None = None
    seed: int = 42
    workers: int = 1
    cache: bool = True
    balance: bool = True
    out: str = "out"
    rows: str = "all"
    cols: str = "all"
    n: int = 500
    corpus: str = "short"
    tol: float = 1e-12
    backends: bool = False

    # settings that cannot change results stay out of the digest
    _NON_RESULT = ("workers", "out", "backends")

    def digest(self) -> str:
        d = {k: v for k, v in dataclasses.asdict(self).items() if k not in self._NON_RESULT}
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]

    def provenance(self) -> dict:
        return {"tool": "ncdkit", "version": __version__, "config_digest": self.digest(),
                "config": {k: v for k, v in dataclasses.asdict(self).items() if k not in self._NON_RESULT}}

    def header(self) -> str:
        return json.dumps({"version": __version__, "config_digest": self.digest()}, sort_keys=True)

    def metrics(self) -> list:
        out = []
        for m in self.metric:
            if m == "ncd":
                out += [MetricSpec(MetricKind.NCD, CompressorHandle(c, self.level), self.epsilon)
                        for c in self.compressor]
            else:
                out.append(MetricSpec.parse(m, self.level, self.epsilon))
        return out

    def policies(self) -> list:
        return [Policy(p) for p in self.symmetrisation]

    def grid(self, metric: MetricSpec) -> list:
        kern = self.kernel or kernel_for(metric)
        grid = []
        for model in self.model:
            if model == "knn":
                grid += [ModelConfig("knn", k=k) for k in self.k]
                grid += [ModelConfig("knn", kern, lam, k=k) for lam in self.lambdas for k in self.k]
            elif model == "logreg":
                grid += [ModelConfig("logreg", kern, lam, penalty=p) for lam in self.lambdas for p in self.penalty]
            elif model == "svc":
                grid += [ModelConfig("svc", kern, lam, C=c) for lam in self.lambdas for c in self.C]
        return grid

    def validate(self):
        try:
            self.metrics()
            self.policies()
            for m in self.model:
                if m not in ("knn", "logreg", "svc"):
                    raise ConfigError(f"unknown model {m!r}")
        except (ValueError, CompressorError) as exc:
            raise ConfigError(str(exc)) from None
        if self.kernel not in (None, "rbf", "hamming"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if any(not lam > 0 for lam in self.lambdas):
            raise ConfigError("lambda values must be positive")
        if any(not c > 0 for c in self.C):
            raise ConfigError("C values must be positive")
        if any(p is not None and p < 0 for p in self.penalty):
            raise ConfigError("penalty coefficients must be >= 0")
        if any(k < 1 or k % 2 == 0 for k in self.k):
            raise ConfigError("k values must be positive odd integers")
        if self.folds < 2 or self.test_size < 1 or self.workers < 1 or self.n < 2:
            raise ConfigError("folds >= 2, test size >= 1, workers >= 1 and n >= 2 required")
        if self.rows not in ("all", "train", "test") or self.cols not in ("all", "train", "test"):
            raise ConfigError("rows/cols must be one of all, train, test")
        ds = self.dataset
        path = ds.get("path") if isinstance(ds, dict) else (None if ds == "sms" else ds)
        if path is not None and not Path(path).exists():
            raise ConfigError(f"dataset path does not exist: {path}")
        return self


_ALIASES = {"lambda": "lambdas", "symmetrization": "symmetrisation", "policy": "symmetrisation",
            "metrics": "metric", "models": "model"}
_LISTS = {"metric", "compressor", "symmetrisation", "lambdas", "model", "k", "penalty", "C"}


def _split(v):
    if isinstance(v, str):
        return [s.strip() for s in v.split(",") if s.strip()]
    if isinstance(v, (list, tuple)):
        return list(v)
    return [v]


def _penalty(v):
    if v is None or (isinstance(v, str) and v.lower() in ("none", "0", "")):
        return None
    return float(v)


def _normalise(raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        key = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if key == "no_cache":
            key, value = "cache", not value
        if key not in RunConfig.__dataclass_fields__:
            raise ConfigError(f"unknown configuration key {key!r}")
        if key in _LISTS:
            value = _split(value)
            if key in ("lambdas", "C"):
                value = [float(v) for v in value]
            elif key == "k":
                value = [int(v) for v in value]
            elif key == "penalty":
                value = [_penalty(v) for v in value]
            else:
                value = [str(v).lower() for v in value]
        out[key] = value
    return out


def resolve_config(path=None, overrides=None) -> RunConfig:
    """Defaults, then the YAML/JSON file at ``path``, then ``overrides``."""
    values = {}
    if path:
        try:
            doc = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a mapping")
        values.update(_normalise(doc))
    values.update(_normalise({k: v for k, v in (overrides or {}).items() if v is not None}))
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


# -- data ---------------------------------------------------------------------------

def load_dataset(cfg: RunConfig) -> LabeledCorpus:
    ds = cfg.dataset
    if ds == "sms":
        corpus = load_sms_fixture()
    else:
        src = ds if isinstance(ds, dict) else {"path": ds}
        path = src["path"]
        fmt = src.get("format") or {".csv": "csv", ".jsonl": "jsonl"}.get(Path(path).suffix, "tsv")
        if fmt == "table":
            corpus = load_csv(path, src.get("label_column", "label"), src.get("feature_columns"),
                              src.get("label_map"), src.get("id_column"), src.get("delimiter", ","))
        elif fmt == "csv" and "label_column" in src:
            corpus = load_csv(path, src["label_column"], src.get("feature_columns"), src.get("label_map"),
                              src.get("id_column"))
        else:
            label_map = src.get("label_map", {"ham": 0, "spam": 1} if fmt == "tsv" else None)
            corpus = load_text(path, fmt, label_map, src.get("label_field", 0), src.get("text_field", 1),
                               src.get("header", False))
    if cfg.limit:
        corpus = corpus.subset(range(min(cfg.limit, len(corpus))))
    return corpus


def split_corpus(cfg: RunConfig, corpus: LabeledCorpus) -> LabeledCorpus:
    return prepare_corpus(corpus, cfg.test_size, cfg.folds, cfg.seed, cfg.train_size, cfg.balance)


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, default=str)
        fh.write("\n")


def _write_matrix(M, stem: Path, cfg: RunConfig, extra=None):
    write_csv(M, stem.with_suffix(".csv"), cfg.header())
    write_binary(M, stem.with_suffix(".ncdm"))
    doc = {"provenance_run": cfg.provenance(), **(extra or {})}
    write_sidecar(M, stem.with_suffix(".json"), doc)


# -- subcommands ----------------------------------------------------------------------

def cmd_matrix(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_dataset(cfg)
    metric = cfg.metrics()[0]
    policy = cfg.policies()[0]
    if cfg.rows == "all" and cfg.cols == "all":
        rows = cols = np.arange(len(corpus))
    else:
        corpus = split_corpus(cfg, corpus)
        pick = lambda part: np.arange(len(corpus)) if part == "all" else corpus.indices(part)  # noqa: E731
        rows, cols = pick(cfg.rows), pick(cfg.cols)
    X = [corpus.samples[i] for i in rows]
    same = cfg.rows == cfg.cols
    Xp = None if same else [corpus.samples[j] for j in cols]
    cache = LengthCache(enabled=cfg.cache)
    D = distance_matrix(X, Xp, metric, policy, cache, workers=cfg.workers,
                        row_ids=[corpus.ids[i] for i in rows],
                        col_ids=None if same else [corpus.ids[j] for j in cols])
    counters = cache.counters()
    _write_matrix(D, out / "matrix", cfg, {"counters": counters})
    log.info("matrix %dx%d %s/%s counters=%s", *D.shape, metric.name, policy.value, counters)
    print(f"wrote {out / 'matrix.csv'} ({D.shape[0]}x{D.shape[1]}, {metric.name}, {policy.value}); "
          f"compressor calls: {counters['compressor_calls']}")
    if cfg.kernel and len(cfg.lambdas) == 1:
        K = kernel_from_distances(D, cfg.kernel, cfg.lambdas[0])
        _write_matrix(K, out / "kernel", cfg)
        print(f"wrote {out / 'kernel.csv'} ({cfg.kernel}, lambda={cfg.lambdas[0]:g})")
    return EXIT_OK


def cmd_audit(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.corpus == "short":
        samples = short_string_corpus()
    else:
        corpus = load_dataset(cfg)
        samples = list(corpus.samples[: cfg.limit or 100])
    for metric in cfg.metrics():
        res = audit(samples, metric, cfg.tol, workers=cfg.workers)
        doc = {**res.to_dict(), "violations_found": res.total_violations,
               "all_axioms_violated": res.all_violated, "provenance": cfg.provenance()}
        _write_json(out / f"audit_{metric.name}.json", doc)
        counts = ", ".join(f"{a.value}={r.violations}" for a, r in res.reports.items())
        print(f"{metric.name}: {res.total_violations} violations ({counts})")
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = split_corpus(cfg, load_dataset(cfg))
    metric = cfg.metrics()[0]
    policy = cfg.policies()[0]
    provider = MatrixProvider(corpus, metric, policy, LengthCache(enabled=cfg.cache), cfg.workers)
    res = grid_search_cv(corpus, cfg.grid(metric), provider, cfg.folds, cfg.seed, cfg.workers)
    prov = cfg.provenance()
    corpus.to_jsonl(out / "corpus.jsonl")
    res.to_csv(out / "gridsearch.csv")
    _write_json(out / "gridsearch.json", {**res.summary(), "provenance": prov})
    _write_json(out / "model.json", {**res.model.to_dict(), "run_provenance": prov})
    write_predictions(out / "predictions.jsonl", res, {"version": __version__, "config_digest": cfg.digest()})
    _write_json(out / "timings.json", res.timings)
    test_M = MatrixProvider.transform(res.best_config, provider.test_matrix())
    _write_matrix(test_M, out / "test_matrix", cfg,
                  {"matrix_type": "kernel" if isinstance(test_M, KernelMatrix) else "distance"})
    lo, hi = res.test_ci
    print(f"best {res.best_config.label()} cv={res.mean[res.best_index]:.4f} "
          f"test={res.test_accuracy:.4f} ci95=[{lo:.4f}, {hi:.4f}] n={len(res.test_ids)}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    run = Path(cfg.out)
    pred_path = run / "predictions.jsonl"
    if not pred_path.exists():
        raise DataError("no predictions.jsonl; run `ncdkit train` first", run)
    rows = read_predictions(pred_path)
    model_path, matrix_path = run / "model.json", run / "test_matrix.ncdm"
    if model_path.exists() and matrix_path.exists():
        model = TrainedModel.from_dict(json.loads(model_path.read_text()))
        side = json.loads((run / "test_matrix.json").read_text())
        if [str(c) for c in side["col_ids"]] != [str(t) for t in model.train_ids]:
            raise DataError("test matrix columns do not match the model's training samples", matrix_path)
        if side["provenance_run"]["config_digest"] != json.loads(model_path.read_text())["run_provenance"]["config_digest"]:
            raise DataError("matrix and model come from different runs", matrix_path)
        values = read_binary(matrix_path)
        cls = KernelMatrix if side.get("matrix_type") == "kernel" else DistanceMatrix
        M = cls(values, side["row_ids"], side["col_ids"], *(("", 0.0) if cls is KernelMatrix else ()))
        recomputed = predict(model, M)
        if [str(r["id"]) for r in rows] != [str(i) for i in side["row_ids"]]:
            raise DataError("prediction dump and test matrix rows differ", pred_path)
        if recomputed != [r["prediction"] for r in rows]:
            raise DataError("stored predictions do not match the model applied to the test matrix", pred_path)
    scored = score_predictions(rows)
    scored["provenance"] = cfg.provenance()
    _write_json(run / "metrics.json", scored)
    lo, hi = scored["ci95"]
    print(f"accuracy={scored['accuracy']:.4f} ci95=[{lo:.4f}, {hi:.4f}] "
          f"correct={scored['correct']}/{scored['n']}")
    return EXIT_OK


def cmd_bench(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_dataset(cfg)
    samples = list(corpus.samples)[: cfg.n]
    if len(samples) < cfg.n:
        raise DataError(f"dataset has {len(samples)} samples, fewer than n={cfg.n}")
    report = run_bench(samples, cfg.metrics(), cfg.policies(), cfg.n, cfg.cache, cfg.workers)
    report.to_csv(out / "bench.csv", cfg.header())
    _write_json(out / "bench.json", {**report.to_dict(), "provenance": cfg.provenance()})
    vanilla = {r.metric: r.per_sample_s for r in report.rows if r.policy == "vanilla"}
    for r in report.rows:
        rel = f" ({r.per_sample_s / vanilla[r.metric]:.2f}x vanilla)" if r.metric in vanilla else ""
        print(f"{r.metric:14s} {r.policy:9s} n={r.n} {r.seconds:8.3f}s  {1e3 * r.per_sample_s:8.3f} ms/sample  "
              f"calls={r.total_calls} (concat {r.concat_calls}){rel}")
    if cfg.backends:
        rows = compare_backends(samples)
        with open(out / "backends.csv", "w") as fh:
            fh.write(f"# {cfg.header()}\n")
            fh.write("kernel,backend,items,seconds,speedup_vs_python\n")
            for r in rows:
                fh.write(f"{r['kernel']},{r['backend']},{r['items']},{r['seconds']!r},{r['speedup_vs_python']!r}\n")
                print(f"{r['kernel']:18s} {r['backend']:7s} {r['seconds']:9.4f}s  x{r['speedup_vs_python']:.1f}")
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    (out / "predictions").mkdir(parents=True, exist_ok=True)
    corpus = split_corpus(cfg, load_dataset(cfg))
    name = cfg.dataset if isinstance(cfg.dataset, str) else Path(cfg.dataset["path"]).stem
    exp = run_experiment(corpus, cfg.metrics(), cfg.policies(), str(name), cfg.folds, cfg.seed, cfg.workers,
                         cfg.cache, cfg.lambdas, cfg.k, cfg.model)
    files = {}
    head = {"version": __version__, "config_digest": cfg.digest()}
    for run in exp.runs:
        stem = f"{run.metric}_{run.policy}_{run.family}"
        files[id(run)] = out / "predictions" / f"{stem}.jsonl"
        write_predictions(files[id(run)], run.result, head)
        run.result.to_csv(out / "predictions" / f"{stem}_gridsearch.csv")
    rows = exp.comparison_table(files)
    write_table(rows, out / "report.csv", cfg.header())
    _write_json(out / "report.json", {"rows": rows, "provenance": cfg.provenance()})
    print(format_table(rows))
    return EXIT_OK


COMMANDS = {"matrix": cmd_matrix, "audit": cmd_audit, "train": cmd_train, "evaluate": cmd_evaluate,
            "bench": cmd_bench, "report": cmd_report}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="YAML/JSON file of settings; flags override it")
    a("--dataset", help="'sms' for the bundled fixture, or a data file path")
    a("--limit", type=int, help="use only the first N samples")
    a("--metric", help="comma list: ncd, ncd_bz2, levenshtein, hamming, ratio")
    a("--compressor", help="comma list of gzip, bz2, brotli (for --metric ncd)")
    a("--level", type=int, help="compression level")
    a("--epsilon", type=float, help="additive NCD error term")
    a("--symmetrisation", help="comma list: vanilla, assumed, enforced, average")
    a("--kernel", choices=["rbf", "hamming"])
    a("--lambda", dest="lambda_", help="comma list of kernel length scales")
    a("--model", help="comma list of knn, logreg, svc")
    a("--k", help="comma list of odd neighbour counts")
    a("--penalty", help="comma list of l2 coefficients; 'none' for no penalty")
    a("--C", dest="C", help="comma list of SVC penalties")
    a("--folds", type=int)
    a("--test-size", type=int)
    a("--train-size", type=int)
    a("--seed", type=int)
    a("--workers", type=int)
    a("--no-cache", action="store_true", default=None)
    a("--no-balance", action="store_true", default=None, help="skip undersampling")
    a("--out", help="output directory")
    a("-v", "--verbose", action="store_true")

    p = _Parser(prog="ncdkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ncdkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    m = sub.add_parser("matrix", parents=[common], help="compute and save a distance (and kernel) matrix")
    m.add_argument("--rows", choices=["all", "train", "test"])
    m.add_argument("--cols", choices=["all", "train", "test"])
    au = sub.add_parser("audit", parents=[common], help="search for metric-axiom violations")
    au.add_argument("--corpus", choices=["short", "dataset"])
    au.add_argument("--tol", type=float)
    sub.add_parser("train", parents=[common], help="grid search with CV, refit, predict the test split")
    sub.add_parser("evaluate", parents=[common], help="score a training run's predictions")
    b = sub.add_parser("bench", parents=[common], help="time matrix construction per policy")
    b.add_argument("--n", type=int)
    b.add_argument("--backends", action="store_true", default=None,
                   help="also compare compiled and pure-Python kernels")
    sub.add_parser("report", parents=[common], help="best kernelised model vs best distance KNN")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"ncdkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    flags["lambda"] = flags.pop("lambda_", None)
    if flags.pop("no_balance", None):
        flags["balance"] = False
    try:
        cfg = resolve_config(args.config, flags)
        return COMMANDS[args.command](cfg)
    except (ConfigError, PolicyMisuseError, CompressorError) as exc:
        print(f"ncdkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, UnicodeDecodeError) as exc:
        print(f"ncdkit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"ncdkit: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
