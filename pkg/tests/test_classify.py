import numpy as np
import pytest

from ncdkit.classify import (
    MatrixProvider,
    ModelConfig,
    TrainedModel,
    accuracy,
    confidence_interval,
    decision_function,
    default_grid,
    fit_config,
    grid_search_cv,
    kernel_logreg_train,
    kernel_svc_train,
    knn_predict,
    predict,
    predict_proba,
    svc_dual_objective,
)
from ncdkit.data import DataError, make_splits
from ncdkit.distance import DistanceMatrix, Policy
from ncdkit.kernel import KernelMatrix

from .conftest import psd_instance


def knn_oracle(D, labels, k):
    out = []
    for row in D:
        ranked = sorted(range(len(row)), key=lambda j: row[j])[:k]
        votes = [labels[j] for j in ranked]
        out.append(max(sorted(set(votes)), key=votes.count))
    return out


def logistic_grad(K, labels, beta, b, penalty):
    """Gradient written out term by term, independent of the library."""
    n = len(labels)
    g = np.zeros(n)
    gb = 0.0
    for i in range(n):
        yi = 1.0 if labels[i] == 1 else -1.0
        z = yi * (sum(K[i, j] * beta[j] for j in range(n)) + b)
        w = -yi * np.exp(-np.logaddexp(0.0, z)) / n
        g += w * K[i]
        gb += w
    return np.append(g + penalty * beta, gb)


def qp_dual_optimum(K, y, C):
    cvxopt = pytest.importorskip("cvxopt")
    cvxopt.solvers.options.update(show_progress=False, abstol=1e-12, reltol=1e-12, feastol=1e-12)
    n = len(y)
    P = cvxopt.matrix((np.outer(y, y) * K).astype(float))
    q = cvxopt.matrix(-np.ones(n))
    G = cvxopt.matrix(np.vstack([-np.eye(n), np.eye(n)]))
    h = cvxopt.matrix(np.hstack([np.zeros(n), C * np.ones(n)]))
    A = cvxopt.matrix(y.reshape(1, -1).astype(float))
    sol = cvxopt.solvers.qp(P, q, G, h, A, cvxopt.matrix(0.0))
    alpha = np.array(sol["x"]).ravel()
    return svc_dual_objective(K, y, alpha)


# -- KNN --------------------------------------------------------------------------

def test_knn_matches_oracle():
    rng = np.random.default_rng(1)
    for t in range(50):
        n, m = int(rng.integers(5, 50)), int(rng.integers(1, 10))
        D = rng.permutation(n * m).reshape(m, n).astype(float)  # distinct values, no ties
        labels = rng.integers(0, 2, n).tolist()
        for k in (1, 3, 5):
            if k <= n:
                assert knn_predict(D, labels, k) == knn_oracle(D, labels, k)


def test_knn_ties_go_to_lower_index():
    assert knn_predict([[1.0, 1.0, 1.0]], ["b", "a", "a"], 1) == ["b"]
    assert knn_predict([[0.5, 0.5, 0.1]], [0, 1, 1], 1) == [1]


def test_knn_single_training_sample():
    assert knn_predict(np.random.rand(4, 1), ["x"], 1) == ["x"] * 4


@pytest.mark.parametrize("k", [0, 2, 5])
def test_knn_rejects_bad_k(k):
    with pytest.raises(ValueError):
        knn_predict(np.zeros((1, 3)), [0, 1, 0], k)


def test_knn_reproduces_training_labels(toy_corpus):
    from ncdkit.distance import distance_matrix
    D = distance_matrix(toy_corpus.samples, None, "ncd_gzip", Policy.ENFORCED)
    assert knn_predict(D, toy_corpus.labels, 1) == list(toy_corpus.labels)


# -- logistic regression ------------------------------------------------------------

@pytest.mark.parametrize("penalty", [None, 1e-3, 0.1, 10.0])
def test_logreg_gradient_small(penalty):
    pts, K = psd_instance(25, seed=4)
    labels = (pts[:, 0] + 0.5 * pts[:, 1] > 0).astype(int).tolist()
    labels[0] = 1 - labels[0]
    model = kernel_logreg_train(K, labels, penalty, history=True)
    g = logistic_grad(K, labels, model.coef, model.intercept, penalty or 0.0)
    assert np.max(np.abs(g)) <= 1e-4
    hist = model.info["history"]
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_logreg_separable_identity():
    model = kernel_logreg_train(np.eye(2), [0, 1])
    assert predict(model, KernelMatrix(np.eye(2), [0, 1], [0, 1], "rbf", 1.0)) == [0, 1]


def test_logreg_large_penalty_shrinks_to_majority():
    pts, K = psd_instance(15, seed=2)
    labels = [1] * 10 + [0] * 5
    model = kernel_logreg_train(K, labels, 1e8)
    assert np.max(np.abs(model.coef)) < 1e-6
    assert set(predict(model, K)) == {1}


def test_logreg_zero_row_gives_sigmoid_intercept():
    pts, K = psd_instance(10, seed=8)
    model = kernel_logreg_train(K, [0, 1] * 5, 0.1)
    p = predict_proba(model, np.zeros((1, 10)))
    assert p[0] == pytest.approx(1 / (1 + np.exp(-model.intercept)), abs=1e-15)


def test_logreg_label_checks():
    with pytest.raises(ValueError):
        kernel_logreg_train(np.eye(3), [0, 1, 2])
    with pytest.raises(ValueError):
        kernel_logreg_train(np.ones((2, 3)), [0, 1])


def test_logreg_iteration_cap_is_flagged():
    pts, K = psd_instance(20, seed=3)
    model = kernel_logreg_train(K, [0, 1] * 10, None, max_iter=2)
    assert model.info["iterations"] == 2 and not model.info["converged"]


# -- SVC -----------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("C", [0.1, 1.0, 100.0])
def test_svc_matches_qp_oracle(seed, C):
    n = 8 + 2 * seed
    pts, K = psd_instance(n, seed)
    y = np.where(pts[:, 0] + 0.4 * pts[:, 1] > 0, 1.0, -1.0)
    if abs(y.sum()) == n:
        y[0] = -y[0]
    model = kernel_svc_train(K, y.tolist(), C)
    ours = model.info["dual_objective"]
    ref = qp_dual_optimum(K, y, C)
    assert abs(ours - ref) <= 1e-3 * max(1.0, abs(ref))
    alpha = np.array(model.info["alpha"])
    assert np.all(alpha >= 0) and np.all(alpha <= C) and abs(alpha @ y) < 1e-9


def test_svc_separable_has_no_training_errors():
    pts, K = psd_instance(20, seed=5, scale=0.5)
    labels = (pts[:, 0] > 0).astype(int).tolist()
    model = kernel_svc_train(K, labels, 1000.0)
    assert predict(model, K) == labels


def test_svc_two_points():
    model = kernel_svc_train(np.eye(2), [-1, 1], 1e6)
    assert model.info["alpha"] == pytest.approx([1.0, 1.0])
    assert decision_function(model, np.eye(2)).tolist() == pytest.approx([-1.0, 1.0])


def test_svc_contradictory_duplicates_hit_bound():
    K = np.array([[1.0, 1.0, 0.1], [1.0, 1.0, 0.1], [0.1, 0.1, 1.0]])
    model = kernel_svc_train(K, [0, 1, 1], 0.5)
    assert model.info["alpha"][0] == 0.5


def test_svc_decision_is_affine():
    pts, K = psd_instance(12, seed=9)
    model = kernel_svc_train(K, [0, 1] * 6, 1.0)
    row = K[:1]
    base = decision_function(model, row)[0] - model.intercept
    assert decision_function(model, 2 * row)[0] - model.intercept == pytest.approx(2 * base)


def test_svc_monotone_dual():
    pts, K = psd_instance(30, seed=6)
    model = kernel_svc_train(K, (pts[:, 0] > 0).astype(int).tolist(), 1.0, history=True)
    hist = model.info["history"]
    assert all(b >= a - 1e-12 for a, b in zip(hist, hist[1:]))


def test_svc_rejects_asymmetric_and_bad_c():
    with pytest.raises(ValueError):
        kernel_svc_train(np.array([[1.0, 0.2], [0.3, 1.0]]), [0, 1], 1.0)
    with pytest.raises(ValueError):
        kernel_svc_train(np.eye(2), [0, 1], 0.0)


def test_indefinite_kernel_stays_box_feasible():
    K = np.array([[1, .9, .1, .2], [.9, 1, .9, .1], [.1, .9, 1, .3], [.2, .1, .3, 1]])
    model = kernel_svc_train(K, [0, 1, 0, 1], 2.0)
    alpha = np.array(model.info["alpha"])
    assert np.all((alpha >= 0) & (alpha <= 2.0))


# -- prediction plumbing -----------------------------------------------------------

def test_matrix_kind_must_match_model():
    pts, K = psd_instance(6, seed=1)
    svc = kernel_svc_train(KernelMatrix(K, list("abcdef"), list("abcdef"), "rbf", 1.0), [0, 1] * 3, 1.0)
    with pytest.raises(ValueError):
        predict(svc, DistanceMatrix(K, list("abcdef"), list("abcdef")))
    with pytest.raises(ValueError):
        predict(svc, KernelMatrix(K, list("abcdef"), list("abcdeg"), "rbf", 1.0))
    with pytest.raises(ValueError):
        predict(svc, K[:, :5])


def test_model_json_round_trip():
    pts, K = psd_instance(10, seed=2)
    model = kernel_logreg_train(K, [0, 1] * 5, 0.1)
    back = TrainedModel.from_dict(model.to_dict())
    assert predict(back, K) == predict(model, K)
    assert back.coef.tobytes() == model.coef.tobytes()


def test_confidence_interval():
    lo, hi = confidence_interval(0.9, 200)
    assert lo == pytest.approx(0.9 - 1.959964 * np.sqrt(0.09 / 200), abs=1e-6)
    assert confidence_interval(1.0, 10) == (1.0, 1.0)
    assert accuracy([1, 0, 1], [1, 1, 1]) == pytest.approx(2 / 3)


# -- grid search -----------------------------------------------------------------------

def split(toy_corpus):
    return make_splits(toy_corpus, test_size=20, folds=4, seed=5)


def test_grid_of_one_equals_direct_fit(toy_corpus):
    corpus = split(toy_corpus)
    cfg = ModelConfig("svc", "rbf", 1.0, C=1.0)
    provider = MatrixProvider(corpus, "ncd_gzip", Policy.ENFORCED)
    res = grid_search_cv(corpus, [cfg], provider, folds=4)
    tr, te = corpus.train_indices(), corpus.test_indices()
    model = fit_config(cfg, provider.transform(cfg, provider.train_matrix()),
                       [corpus.labels[i] for i in tr], [corpus.ids[i] for i in tr])
    pred = predict(model, provider.transform(cfg, provider.test_matrix()))
    assert res.test_predictions == pred
    assert res.test_accuracy == accuracy(pred, [corpus.labels[i] for i in te])


def test_grid_search_deterministic_and_consistent(toy_corpus):
    corpus = split(toy_corpus)
    grid = default_grid(("knn", "svc", "logreg"), lambdas=(0.1, 1.0), ks=(1, 3), penalties=(None, 1.0),
                        Cs=(1.0,))
    runs = [grid_search_cv(corpus, grid, MatrixProvider(corpus, "ncd_gzip", Policy.AVERAGE), 4, workers=w)
            for w in (1, 4)]
    a, b = runs
    assert a.fold_accuracy.tobytes() == b.fold_accuracy.tobytes()
    assert a.test_predictions == b.test_predictions and a.best_index == b.best_index
    means = a.fold_accuracy.mean(axis=1)
    assert a.mean[a.best_index] == means.max()
    assert a.best_index == int(np.argmax(means))  # first of the tied maxima


def test_folds_cover_train_only(toy_corpus):
    corpus = split(toy_corpus)
    res = grid_search_cv(corpus, [ModelConfig("knn", k=1)], MatrixProvider(corpus, "levenshtein"), 4)
    members = [i for f in res.fold_members.values() for i in f]
    train_ids = {corpus.ids[i] for i in corpus.train_indices()}
    assert sorted(members) == sorted(train_ids)
    assert not set(members) & set(res.test_ids)


def test_test_samples_never_enter_training_matrix(toy_corpus):
    corpus = split(toy_corpus)
    provider = MatrixProvider(corpus, "ncd_gzip", Policy.ASSUMED)
    D = provider.train_matrix()
    assert set(D.row_ids).isdisjoint({corpus.ids[i] for i in corpus.test_indices()})
    T = provider.test_matrix()
    assert provider.rect_policy is Policy.ENFORCED and T.col_ids == D.row_ids


def test_svc_skipped_on_asymmetric_distances(toy_corpus):
    corpus = split(toy_corpus)
    provider = MatrixProvider(corpus, "ncd_gzip", Policy.VANILLA)
    grid = [ModelConfig("svc", "rbf", 1.0, C=1.0), ModelConfig("knn", k=1)]
    res = grid_search_cv(corpus, grid, provider, 4)
    assert [c.model for c in res.configs] == ["knn"]


def test_too_many_folds(toy_corpus):
    corpus = make_splits(toy_corpus, test_size=20, folds=2, seed=1)
    with pytest.raises(DataError):
        grid_search_cv(corpus, [ModelConfig("knn", k=1)], MatrixProvider(corpus, "levenshtein"), 40)


def test_model_config_validation():
    with pytest.raises(ValueError):
        ModelConfig("svc", None, None, C=1.0)
    with pytest.raises(ValueError):
        ModelConfig("knn", k=2)
    with pytest.raises(ValueError):
        ModelConfig("logreg", "rbf", 0.0)
    assert ModelConfig("knn", "rbf", 0.5, k=3).kernelised
