"""Classifiers over precomputed distance or kernel matrices, and CV grid search."""

from __future__ import annotations

import csv
import itertools
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._backend import kernels
from .data import DataError, LabeledCorpus, assign_folds
from .distance import DistanceMatrix, MetricKind, MetricSpec, Policy, distance_matrix
from .kernel import KernelMatrix, kernel_distance, kernel_from_distances

LOGREG_TOL = 1e-4
LOGREG_MAX_ITER = 10_000
SVC_TOL = 1e-3
POWERS = tuple(10.0 ** p for p in range(-3, 4))
KNN_KS = (1, 3, 5, 7, 11)


def _encode(labels):
    classes = sorted(set(labels))
    if len(classes) != 2:
        raise ValueError(f"binary labels required, got {len(classes)} classes")
    y = np.array([1.0 if l == classes[1] else -1.0 for l in labels])
    return classes, y


@dataclass
class TrainedModel:
    kind: str  # "knn" | "logreg" | "svc"
    params: dict
    train_ids: list
    classes: list
    coef: np.ndarray | None = None
    intercept: float = 0.0
    train_labels: list | None = None
    provenance: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": self.params,
            "train_ids": list(self.train_ids),
            "classes": list(self.classes),
            "coef": None if self.coef is None else [float(v) for v in self.coef],
            "intercept": float(self.intercept),
            "train_labels": None if self.train_labels is None else list(self.train_labels),
            "provenance": self.provenance,
            "info": self.info,
        }

    @classmethod
    def from_dict(cls, d):
        coef = None if d.get("coef") is None else np.array(d["coef"], dtype=np.float64)
        return cls(d["kind"], d["params"], d["train_ids"], d["classes"], coef, d["intercept"],
                   d.get("train_labels"), d.get("provenance", {}), d.get("info", {}))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


# -- k nearest neighbours ---------------------------------------------------

def knn_predict(D, train_labels, k: int) -> list:
    """Majority label of the ``k`` nearest columns per row.

    Equal distances are ordered by column index.  ``k`` must be odd.
    """
    values = D.values if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=np.float64)
    train_labels = list(train_labels)
    if k < 1 or k % 2 == 0:
        raise ValueError(f"k must be a positive odd integer, got {k}")
    if k > len(train_labels):
        raise ValueError(f"k={k} exceeds the {len(train_labels)} training samples")
    if values.shape[1] != len(train_labels):
        raise ValueError("distance matrix columns do not match the training labels")
    order = np.argsort(values, axis=1, kind="stable")[:, :k]
    out = []
    for row in order:
        votes = {}
        for rank, j in enumerate(row):
            lab = train_labels[j]
            cnt, first = votes.get(lab, (0, rank))
            votes[lab] = (cnt + 1, first)
        # most votes, then the label whose nearest member ranks first
        out.append(min(votes, key=lambda l: (-votes[l][0], votes[l][1])))
    return out


def knn_fit(train_ids, train_labels, k: int, provenance=None) -> TrainedModel:
    if k < 1 or k % 2 == 0 or k > len(train_labels):
        raise ValueError(f"invalid k={k} for {len(train_labels)} training samples")
    return TrainedModel("knn", {"k": k}, list(train_ids), sorted(set(train_labels)),
                        train_labels=list(train_labels), provenance=provenance or {})


# -- kernel logistic regression ---------------------------------------------

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_objective(K, y, beta, b, penalty):
    """Mean logistic loss over kernel-column features plus ``penalty/2 * |beta|^2``.

    Returns ``(value, grad_beta, grad_intercept)``.
    """
    margin = y * (K @ beta + b)
    loss = np.mean(np.logaddexp(0.0, -margin))
    r = -y * _sigmoid(-margin) / len(y)
    g_beta = K.T @ r + penalty * beta
    g_b = float(np.sum(r))
    return loss + 0.5 * penalty * float(beta @ beta), g_beta, g_b


def kernel_logreg_train(K_train, labels, penalty_coef: float | None = None, tol: float = LOGREG_TOL,
                        max_iter: int = LOGREG_MAX_ITER, memory: int = 10, history: bool = False,
                        train_ids=None) -> TrainedModel:
    """Fit l2-penalised logistic regression with kernel columns as features.

    ``penalty_coef`` of ``None`` or 0 disables the penalty.  The intercept is
    never penalised.  Uses limited-memory BFGS with a backtracking (Armijo)
    line search, so the objective decreases monotonically; stops when the
    gradient infinity-norm is at most ``tol``.
    """
    K = K_train.values if isinstance(K_train, KernelMatrix) else np.asarray(K_train, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("training kernel must be square")
    classes, y = _encode(labels)
    if K.shape[0] != len(y):
        raise ValueError("kernel size does not match the number of labels")
    lam = float(penalty_coef or 0.0)
    if lam < 0:
        raise ValueError("penalty_coef must be >= 0")
    n = len(y)

    def f(w):
        v, gb, gi = logistic_objective(K, y, w[:n], w[n], lam)
        return v, np.append(gb, gi)

    w = np.zeros(n + 1)
    fval, g = f(w)
    trace = [fval] if history else None
    S, Y = [], []
    it, converged = 0, False
    while it < max_iter:
        if np.max(np.abs(g)) <= tol:
            converged = True
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, yv in reversed(list(zip(S, Y))):
            rho = 1.0 / (yv @ s)
            a = rho * (s @ q)
            q -= a * yv
            alphas.append((rho, a))
        if S:
            q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
        for (s, yv), (rho, a) in zip(zip(S, Y), reversed(alphas)):
            q += (a - rho * (yv @ q)) * s
        d = -q
        slope = g @ d
        if slope >= 0:
            S.clear(), Y.clear()
            d, slope = -g, -(g @ g)
        step = 1.0 if S else min(1.0, 1.0 / max(np.max(np.abs(g)), 1e-12))
        accepted = False
        while step >= 1e-20:
            w_new = w + step * d
            f_new, g_new = f(w_new)
            if f_new <= fval + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if S:
                S.clear(), Y.clear()
                continue
            break  # no descent possible at machine precision
        s, yv = w_new - w, g_new - g
        if yv @ s > 1e-12 * (s @ s):
            S.append(s)
            Y.append(yv)
            if len(S) > memory:
                S.pop(0), Y.pop(0)
        w, fval, g = w_new, f_new, g_new
        it += 1
        if history:
            trace.append(fval)
    info = {"iterations": it, "converged": converged, "grad_inf_norm": float(np.max(np.abs(g))),
            "objective": float(fval)}
    if history:
        info["history"] = trace
    ids = train_ids if train_ids is not None else (
        list(K_train.row_ids) if isinstance(K_train, KernelMatrix) else list(range(n)))
    params = {"penalty": "l2" if lam > 0 else "none", "penalty_coef": lam, "tol": tol}
    return TrainedModel("logreg", params, ids, classes, w[:n].copy(), float(w[n]),
                        provenance=_prov(K_train), info=info)


# -- kernel SVC ---------------------------------------------------------------

def svc_dual_objective(K, y, alpha):
    """Dual objective ``sum(alpha) - 0.5 * alpha' Q alpha`` (to be maximised)."""
    Q = (y[:, None] * y[None, :]) * K
    return float(np.sum(alpha) - 0.5 * alpha @ Q @ alpha)


def _rho(alpha, G, y, C):
    yG = y * G
    at_ub = alpha >= C
    at_lb = alpha <= 0
    free = ~(at_ub | at_lb)
    if free.any():
        return float(np.mean(yG[free]))
    ub_set = (at_ub & (y < 0)) | (at_lb & (y > 0))
    lb_set = (at_ub & (y > 0)) | (at_lb & (y < 0))
    ub = np.min(yG[ub_set]) if ub_set.any() else np.inf
    lb = np.max(yG[lb_set]) if lb_set.any() else -np.inf
    return float((ub + lb) / 2)


def kernel_svc_train(K_train, labels, C: float, tol: float = SVC_TOL, max_iter: int | None = None,
                     history: bool = False, train_ids=None) -> TrainedModel:
    """Soft-margin SVC solved in the dual by sequential minimal optimisation.

    Indefinite kernels are accepted; the solver then stops at a box-feasible
    stationary point.
    """
    K = K_train.values if isinstance(K_train, KernelMatrix) else np.asarray(K_train, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("training kernel must be square")
    if not np.array_equal(K, K.T):
        raise ValueError("training kernel must be symmetric")
    if not C > 0:
        raise ValueError("C must be positive")
    classes, y = _encode(labels)
    n = len(y)
    if max_iter is None:
        max_iter = max(100 * n, 1000)
    Q = (y[:, None] * y[None, :]) * K
    alpha, G, it, converged, trace = kernels.smo(Q, y, float(C), tol, max_iter, 1e-12, history)
    rho = _rho(alpha, G, y, C)
    info = {"iterations": int(it), "converged": bool(converged),
            "support_vectors": int(np.count_nonzero(alpha > 0)),
            "dual_objective": svc_dual_objective(K, y, alpha), "backend": kernels.BACKEND}
    if history:
        info["history"] = [-v for v in trace]
    ids = train_ids if train_ids is not None else (
        list(K_train.row_ids) if isinstance(K_train, KernelMatrix) else list(range(n)))
    model = TrainedModel("svc", {"C": float(C), "tol": tol}, ids, classes, alpha * y, -rho,
                         provenance=_prov(K_train), info=info)
    model.info["alpha"] = [float(a) for a in alpha]
    return model


def _prov(M):
    return M.provenance() if hasattr(M, "provenance") else {}


# -- prediction ---------------------------------------------------------------

def _check_columns(model, M):
    values = M.values if hasattr(M, "values") else np.asarray(M)
    if values.ndim != 2 or values.shape[1] != len(model.train_ids):
        raise ValueError("matrix columns do not align with the model's training samples")
    col_ids = getattr(M, "col_ids", None)
    if col_ids is not None and [str(c) for c in col_ids] != [str(c) for c in model.train_ids]:
        raise ValueError("matrix column ids differ from the model's training ids")
    return values


def decision_function(model: TrainedModel, K_test_train) -> np.ndarray:
    if model.kind == "knn":
        raise ValueError("KNN models have no decision function")
    if isinstance(K_test_train, DistanceMatrix):
        raise ValueError(f"{model.kind} models consume kernel matrices, got a distance matrix")
    values = _check_columns(model, K_test_train)
    return values @ model.coef + model.intercept


def predict_proba(model: TrainedModel, K_test_train) -> np.ndarray:
    """Probability of ``classes[1]`` under a logistic model."""
    if model.kind != "logreg":
        raise ValueError("probabilities are only defined for logistic models")
    return _sigmoid(decision_function(model, K_test_train))


def predict(model: TrainedModel, M) -> list:
    """Labels for each row of a test-vs-train matrix.

    KNN consumes distances; logistic and SVC models consume kernel rows.
    """
    if model.kind == "knn":
        if isinstance(M, KernelMatrix):
            raise ValueError("KNN consumes distances; convert kernels with kernel_distance")
        values = _check_columns(model, M)
        return knn_predict(values, model.train_labels, model.params["k"])
    dec = decision_function(model, M)
    return [model.classes[1] if v > 0 else model.classes[0] for v in dec]


# -- grid search ----------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    model: str  # "knn" | "logreg" | "svc"
    kernel: str | None = None  # None | "rbf" | "hamming"
    lam: float | None = None
    k: int | None = None
    penalty: float | None = None
    C: float | None = None

    def __post_init__(self):
        if self.model not in ("knn", "logreg", "svc"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.model != "knn" and self.kernel is None:
            raise ValueError(f"{self.model} needs a kernel")
        if self.kernel is not None and not (self.lam and self.lam > 0):
            raise ValueError("kernel configurations need a positive lambda")
        if self.model == "knn" and (self.k is None or self.k % 2 == 0):
            raise ValueError("KNN needs an odd k")
        if self.model == "svc" and not (self.C and self.C > 0):
            raise ValueError("SVC needs a positive C")

    @property
    def kernelised(self) -> bool:
        return self.kernel is not None

    def label(self) -> str:
        parts = [self.model]
        if self.kernel:
            parts.append(f"{self.kernel}(lam={self.lam:g})")
        if self.k is not None:
            parts.append(f"k={self.k}")
        if self.model == "logreg":
            parts.append("penalty=none" if not self.penalty else f"penalty={self.penalty:g}")
        if self.C is not None:
            parts.append(f"C={self.C:g}")
        return " ".join(parts)

    def to_dict(self):
        return asdict(self)


def default_grid(models=("knn", "logreg", "svc"), kernels_=("rbf",), lambdas=POWERS, ks=KNN_KS,
                 penalties=(None, *POWERS), Cs=POWERS, raw_knn: bool = True) -> list:
    """The canonical grid: lambda, penalty and C over powers of ten in [1e-3, 1e3]."""
    grid = []
    if "knn" in models:
        if raw_knn:
            grid += [ModelConfig("knn", k=k) for k in ks]
        grid += [ModelConfig("knn", kern, lam, k=k) for kern in kernels_ for lam in lambdas for k in ks]
    if "logreg" in models:
        grid += [ModelConfig("logreg", kern, lam, penalty=p) for kern in kernels_ for lam in lambdas
                 for p in penalties]
    if "svc" in models:
        grid += [ModelConfig("svc", kern, lam, C=c) for kern in kernels_ for lam in lambdas for c in Cs]
    return grid


class MatrixProvider:
    """Distance matrices for one corpus, metric and symmetrisation policy.

    The train-vs-train matrix is a square self-matrix under the policy; CV
    folds slice it.  The test-vs-train matrix is rectangular, so ASSUMED is
    replaced by ENFORCED there.
    """

    def __init__(self, corpus: LabeledCorpus, metric, policy=Policy.VANILLA, cache=None,
                 workers: int = 1):
        self.corpus = corpus
        self.metric = MetricSpec.parse(metric) if isinstance(metric, str) else metric
        self.policy = Policy(policy)
        self.cache = cache
        self.workers = workers
        self.timings = {}
        self._train = self._test = None
        self.train_idx = corpus.train_indices()
        self.test_idx = corpus.test_indices()

    @property
    def rect_policy(self) -> Policy:
        return Policy.ENFORCED if self.policy is Policy.ASSUMED else self.policy

    def train_matrix(self) -> DistanceMatrix:
        if self._train is None:
            c = self.corpus
            t = time.perf_counter()
            self._train = distance_matrix(
                [c.samples[i] for i in self.train_idx], None, self.metric, self.policy, self.cache,
                workers=self.workers, row_ids=[c.ids[i] for i in self.train_idx])
            self.timings["train_matrix_s"] = time.perf_counter() - t
        return self._train

    def test_matrix(self) -> DistanceMatrix:
        if self._test is None:
            c = self.corpus
            t = time.perf_counter()
            self._test = distance_matrix(
                [c.samples[i] for i in self.test_idx], [c.samples[i] for i in self.train_idx],
                self.metric, self.rect_policy, self.cache, workers=self.workers,
                row_ids=[c.ids[i] for i in self.test_idx], col_ids=[c.ids[i] for i in self.train_idx])
            self.timings["test_matrix_s"] = time.perf_counter() - t
        return self._test

    def supports(self, cfg: ModelConfig) -> bool:
        """Hamming kernels need Hamming-ratio distances; SVC needs a symmetric Gram matrix."""
        if cfg.kernel == "hamming" and self.metric.kind is not MetricKind.HAMMING_RATIO:
            return False
        if cfg.model == "svc":
            D = self.train_matrix().values
            return bool(np.array_equal(D, D.T))
        return True

    @staticmethod
    def transform(cfg: ModelConfig, D: DistanceMatrix):
        """The matrix a model consumes: raw distances, kernel distances or a kernel."""
        if cfg.kernel is None:
            return D
        K = kernel_from_distances(D, cfg.kernel, cfg.lam)
        return kernel_distance(K) if cfg.model == "knn" else K


def fit_config(cfg: ModelConfig, M_train, train_labels, train_ids) -> TrainedModel:
    if cfg.model == "knn":
        return knn_fit(train_ids, train_labels, cfg.k, _prov(M_train))
    if cfg.model == "logreg":
        return kernel_logreg_train(M_train, train_labels, cfg.penalty, train_ids=train_ids)
    return kernel_svc_train(M_train, train_labels, cfg.C, train_ids=train_ids)


def accuracy(pred, truth) -> float:
    truth = list(truth)
    return sum(p == t for p, t in zip(pred, truth)) / len(truth)


def confidence_interval(acc: float, n: int, z: float = 1.959963984540054):
    """Normal-approximation 95% interval for a binomial proportion, clipped to [0, 1]."""
    half = z * np.sqrt(acc * (1 - acc) / n)
    return max(0.0, acc - half), min(1.0, acc + half)


@dataclass
class GridSearchResult:
    configs: list
    fold_accuracy: np.ndarray  # configs x folds
    best_index: int
    test_accuracy: float
    test_ids: list
    test_labels: list
    test_predictions: list
    fold_members: dict  # fold -> validation sample ids
    model: TrainedModel | None = None
    metric: str = ""
    policy: str = ""
    timings: dict = field(default_factory=dict)

    @property
    def mean(self):
        return self.fold_accuracy.mean(axis=1)

    @property
    def std(self):
        return self.fold_accuracy.std(axis=1)

    @property
    def best_config(self) -> ModelConfig:
        return self.configs[self.best_index]

    @property
    def test_ci(self):
        return confidence_interval(self.test_accuracy, len(self.test_ids))

    def rows(self):
        for c, cfg in enumerate(self.configs):
            for f in range(self.fold_accuracy.shape[1]):
                yield {"config": c, "label": cfg.label(), **cfg.to_dict(), "fold": f,
                       "accuracy": repr(float(self.fold_accuracy[c, f]))}

    def to_csv(self, path):
        fields = ["config", "label", "model", "kernel", "lam", "k", "penalty", "C", "fold", "accuracy"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            for row in self.rows():
                w.writerow(row)

    def summary(self) -> dict:
        lo, hi = self.test_ci
        return {
            "metric": self.metric,
            "policy": self.policy,
            "folds": int(self.fold_accuracy.shape[1]),
            "configs": [
                {"config": c, "label": cfg.label(), **cfg.to_dict(), "cv_mean": float(self.mean[c]),
                 "cv_std": float(self.std[c])}
                for c, cfg in enumerate(self.configs)
            ],
            "best_index": self.best_index,
            "best": self.best_config.to_dict(),
            "best_label": self.best_config.label(),
            "best_cv_mean": float(self.mean[self.best_index]),
            "test_accuracy": self.test_accuracy,
            "test_ci95": [lo, hi],
            "n_test": len(self.test_ids),
            "fold_members": {str(k): v for k, v in self.fold_members.items()},
        }


def grid_search_cv(corpus: LabeledCorpus, grid, provider: MatrixProvider, folds: int = 5,
                   seed: int = 42, workers: int = 1) -> GridSearchResult:
    """Stratified k-fold CV over ``grid`` on the training split, refit the best
    configuration on the whole training split and score it on the test split.

    Ties in CV mean go to the earliest configuration in ``grid``.
    """
    grid = [cfg for cfg in grid if provider.supports(cfg)]
    if not grid:
        raise ValueError("empty model grid")
    train_idx = corpus.train_indices()
    test_idx = corpus.test_indices()
    train_labels = [corpus.labels[i] for i in train_idx]
    train_ids = [corpus.ids[i] for i in train_idx]
    if corpus.folds is not None and len({corpus.folds[i] for i in train_idx}) == folds:
        fold_of = np.array([corpus.folds[i] for i in train_idx])
    else:
        fold_of = assign_folds(train_labels, folds, seed)
    counts = {}
    for lab in train_labels:
        counts[lab] = counts.get(lab, 0) + 1
    if folds > min(counts.values()):
        raise DataError(f"{folds} folds exceed the smallest class count {min(counts.values())}")

    D = provider.train_matrix()
    labels_arr = np.array(train_labels, dtype=object)
    fold_members = {f: [train_ids[i] for i in np.flatnonzero(fold_of == f)] for f in range(folds)}

    def evaluate(task):
        c, f = task
        cfg = grid[c]
        tr = np.flatnonzero(fold_of != f)
        va = np.flatnonzero(fold_of == f)
        M = provider.transform(cfg, D)
        model = fit_config(cfg, M.submatrix(tr, tr), list(labels_arr[tr]), [train_ids[i] for i in tr])
        pred = predict(model, M.submatrix(va, tr))
        return accuracy(pred, labels_arr[va])

    tasks = list(itertools.product(range(len(grid)), range(folds)))
    t0 = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(evaluate, tasks))
    else:
        scores = [evaluate(t) for t in tasks]
    acc = np.array(scores, dtype=np.float64).reshape(len(grid), folds)
    cv_time = time.perf_counter() - t0

    means = acc.mean(axis=1)
    best = int(np.flatnonzero(means == means.max())[0])
    cfg = grid[best]
    t0 = time.perf_counter()
    M_train = provider.transform(cfg, D)
    model = fit_config(cfg, M_train, train_labels, train_ids)
    M_test = provider.transform(cfg, provider.test_matrix())
    pred = predict(model, M_test)
    test_labels = [corpus.labels[i] for i in test_idx]
    timings = {**provider.timings, "cv_s": cv_time, "refit_predict_s": time.perf_counter() - t0}
    return GridSearchResult(
        grid, acc, best, accuracy(pred, test_labels), [corpus.ids[i] for i in test_idx], test_labels,
        pred, fold_members, model, provider.metric.name, provider.policy.value, timings)
