import json

import numpy as np
import pytest

from mddra import generator
from mddra.catalog import CLASS_LABELS, ValidationError
from mddra.classifiers import (
    FEATURE_NAMES,
    PRESETS,
    ModelSpec,
    confusion_matrix,
    dataset,
    dumps_model,
    evaluate,
    kfold_cv,
    loads_model,
    model_spec,
    predict,
    predict_labels,
    report_from_predictions,
    reports_csv,
    stratified_folds,
    train,
    trip_features,
)
from mddra.classifiers.models import (
    BaggedTrees,
    DecisionTree,
    GaussianNaiveBayes,
    KNNClassifier,
    LinearDiscriminant,
    QuadraticDiscriminant,
    pairwise_distance,
)

from benchdata import bench_split
from oracles import confusion_tally, gaussian_posterior_1d


def _blobs(seed, n=300, gap=4.0, p=3):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 3, n)
    X = rng.normal(size=(n, p)) + gap * y[:, None]
    return X, y


# ------------------------------------------------------------------ features


def test_trip_features_shape_and_columns():
    trip = generator.generate(generator.escalating(80, seed=1))
    F = trip_features(trip)
    assert F.shape == (80, len(FEATURE_NAMES))
    assert F[0, FEATURE_NAMES.index("previous_aggregate")] == 0.0
    X, y = dataset([trip])
    assert np.array_equal(X, F)
    assert y.tolist() == [CLASS_LABELS.index(l) for l in trip.labels]


# ------------------------------------------------------------------ KNN


def test_fine_knn_recalls_its_training_set():
    X, y, _, _ = bench_split()
    model = train(PRESETS["Fine KNN"], X, y)
    codes, _ = predict(model, X)
    assert np.mean(codes == y) == 1.0


def test_weighted_knn_zero_distance_dominates():
    X = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 5.0]])
    y = np.array([2, 0, 0, 1])
    knn = KNNClassifier(k=3, weighted=True).fit(X, y)
    assert knn.predict(X[:1]).tolist() == [2]
    # unweighted majority of the same neighbourhood says class 0
    assert KNNClassifier(k=3).fit(X, y).predict(X[:1]).tolist() == [0]


@pytest.mark.parametrize("metric", ["euclidean", "cosine", "cubic"])
def test_distance_axioms(metric):
    rng = np.random.default_rng(5)
    A = rng.uniform(0.1, 2.0, size=(25, 4))
    D = pairwise_distance(A, A, metric)
    assert np.array_equal(D, D.T) or np.allclose(D, D.T, atol=1e-15)
    assert np.all(np.diag(D) == 0.0)
    off = D[~np.eye(25, dtype=bool)]
    assert np.all(off > 0.0)
    assert np.all(pairwise_distance(A, A + 0.0, metric).diagonal() == 0.0)


def test_distance_values():
    a = np.array([[0.0, 0.0]])
    b = np.array([[3.0, 4.0]])
    assert pairwise_distance(a, b, "euclidean")[0, 0] == 5.0
    assert pairwise_distance(a, b, "cubic")[0, 0] == pytest.approx((27 + 64) ** (1 / 3))
    assert pairwise_distance(np.array([[1.0, 0.0]]), np.array([[0.0, 2.0]]), "cosine")[0, 0] == 1.0
    with pytest.raises(ValidationError):
        pairwise_distance(a, b, "manhattan")


def test_knn_ties_go_to_lowest_class():
    X = np.array([[-1.0], [1.0]])
    y = np.array([2, 1])
    assert KNNClassifier(k=2).fit(X, y).predict(np.array([[0.0]])).tolist() == [1]


def test_coarse_knn_caps_k():
    X, y = _blobs(0, n=30)
    model = train(PRESETS["Coarse KNN"], X, y)
    _, scores = predict(model, X[:3])
    assert np.allclose(scores, np.bincount(y, minlength=3) / 30)


# ------------------------------------------------------------------ discriminants and Bayes


def test_lda_midpoint_tie_goes_to_safe():
    X = np.array([[-2.0], [0.0], [0.0], [2.0]])
    lda = LinearDiscriminant().fit(X, np.array([0, 0, 1, 1]))
    assert lda.predict(np.array([[0.0]])).tolist() == [0]
    lda = LinearDiscriminant().fit(X, np.array([1, 1, 2, 2]))
    assert lda.predict(np.array([[0.0]])).tolist() == [1]


def test_ridge_zero_singular_covariance_raises():
    X = np.column_stack([np.arange(6.0), np.arange(6.0)])
    y = np.array([0, 0, 0, 1, 1, 1])
    with pytest.raises(ValidationError):
        LinearDiscriminant(ridge=0.0).fit(X, y)
    with pytest.raises(ValidationError):
        QuadraticDiscriminant(ridge=0.0).fit(X, y)
    # the default ridge keeps both usable
    assert LinearDiscriminant().fit(X, y).predict(X).tolist() == y.tolist()
    QuadraticDiscriminant().fit(X, y)


def test_gnb_well_separated_clusters():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, 2000)
    X = rng.normal(size=(2000, 1)) + 6.0 * y[:, None]
    model = GaussianNaiveBayes().fit(X[:1000], y[:1000])
    assert np.mean(model.predict(X[1000:]) == y[1000:]) >= 0.99


def test_gnb_matches_bayes_rule():
    X = np.array([[0.0], [1.0], [2.0], [4.0], [5.0], [7.0], [8.0]])
    y = np.array([0, 0, 0, 2, 2, 2, 2])
    model = GaussianNaiveBayes(var_smoothing=0.0).fit(X, y)
    means = [X[y == c, 0].mean() for c in (0, 2)]
    variances = [X[y == c, 0].var() for c in (0, 2)]
    priors = [3 / 7, 4 / 7]
    for q in (-1.0, 2.5, 3.7, 6.0):
        got = model.scores(np.array([[q]]))[0]
        want = gaussian_posterior_1d(q, means, variances, priors)
        assert got[1] == 0.0
        assert got[[0, 2]] == pytest.approx(want, abs=1e-12)


def test_discriminants_separate_blobs():
    X, y = _blobs(2)
    Xt, yt = _blobs(3)
    for est in (LinearDiscriminant(), QuadraticDiscriminant(), GaussianNaiveBayes()):
        assert np.mean(est.fit(X, y).predict(Xt) == yt) > 0.95


def test_absent_class_never_predicted():
    X, y = _blobs(4)
    keep = y != 1
    for name in ("Linear Discriminant", "Quadratic Discriminant", "Gaussian Naive Bayes", "Medium KNN", "Bagged Trees"):
        model = train(PRESETS[name], X[keep], y[keep])
        codes, scores = predict(model, X)
        assert 1 not in codes.tolist()
        assert np.allclose(scores.sum(axis=1), 1.0)


# ------------------------------------------------------------------ trees


def test_single_tree_equals_degenerate_bag():
    X, y, Xt, _ = bench_split()
    tree = DecisionTree().fit(X[:800], y[:800])
    bag = BaggedTrees(tree_count=1, bootstrap=False).fit(X[:800], y[:800])
    assert np.array_equal(tree.predict(Xt), bag.predict(Xt))


def test_tree_depth_and_leaf_limits():
    X, y = _blobs(6)
    stump = DecisionTree(max_depth=1).fit(X, y)
    assert np.unique(stump.leaves(X)).size <= 2
    big_leaf = DecisionTree(min_leaf=50).fit(X, y)
    _, counts = np.unique(big_leaf.leaves(X), return_counts=True)
    assert counts.min() >= 50
    assert np.mean(DecisionTree().fit(X, y).predict(X) == y) == 1.0


def test_bagging_oob_does_not_degrade():
    X, y, _, _ = bench_split()
    X, y = X[:1500], y[:1500]
    one, fifty = [], []
    for seed in range(5):
        one.append(BaggedTrees(tree_count=1, seed=seed).fit(X, y).oob_accuracy)
        fifty.append(BaggedTrees(tree_count=50, seed=seed).fit(X, y).oob_accuracy)
    assert np.mean(fifty) >= np.mean(one) - 0.01


# ------------------------------------------------------------------ bench


def test_bench_accuracy_and_baselines():
    X, y, Xt, yt = bench_split()
    bag = evaluate(train(PRESETS["Bagged Trees"], X, y, seed=0), Xt, yt)
    coarse = evaluate(train(PRESETS["Coarse KNN"], X, y, seed=0), Xt, yt)
    majority = 100.0 * np.mean(yt == np.argmax(np.bincount(y, minlength=3)))
    assert bag.accuracy >= 90.0
    assert bag.accuracy > majority and bag.accuracy > coarse.accuracy


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_is_deterministic_and_conserves_counts(name):
    X, y, Xt, yt = bench_split()
    X, y = X[:600], y[:600]
    a = evaluate(train(PRESETS[name], X, y, seed=3), Xt[:200], yt[:200])
    b = evaluate(train(PRESETS[name], X, y, seed=3), Xt[:200], yt[:200])
    assert a.deterministic_document() == b.deterministic_document()
    m = a.matrix
    assert m.sum(axis=1).tolist() == np.bincount(yt[:200], minlength=3).tolist()
    pred, _ = predict(train(PRESETS[name], X, y, seed=3), Xt[:200])
    assert m.sum(axis=0).tolist() == np.bincount(pred, minlength=3).tolist()
    assert a.accuracy > 60.0


def test_model_lookup():
    assert model_spec("Bagged Trees") is PRESETS["Bagged Trees"]
    assert model_spec("subspace_knn").name == "Subspace KNN"
    with pytest.raises(ValidationError):
        model_spec("Boosted Trees")
    with pytest.raises(ValidationError):
        ModelSpec("KNN", {"k": 0})
    with pytest.raises(ValidationError):
        ModelSpec("KNN", {"trees": 3})
    with pytest.raises(ValidationError):
        ModelSpec("svm")


def test_spec_seed_overrides_train_seed():
    X, y = _blobs(8)
    spec = ModelSpec("BaggedTrees", {"tree_count": 5, "seed": 11})
    a = train(spec, X, y, seed=0).estimator
    b = train(spec, X, y, seed=99).estimator
    assert a.seed == b.seed == 11


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_persistence_round_trip(name):
    X, y = _blobs(9, n=120)
    model = train(PRESETS[name], X, y, seed=2)
    text = dumps_model(model)
    back = loads_model(text)
    assert dumps_model(back) == text
    a_codes, a_scores = predict(model, X)
    b_codes, b_scores = predict(back, X)
    assert np.array_equal(a_codes, b_codes) and np.array_equal(a_scores, b_scores)
    assert predict_labels(back, X[0]) == [CLASS_LABELS[a_codes[0]]]


def test_persistence_rejects_foreign_documents():
    X, y = _blobs(9, n=60)
    doc = json.loads(dumps_model(train(PRESETS["Medium KNN"], X, y)))
    for bad in ({**doc, "format": "pickle"}, {**doc, "version": 2}, {**doc, "classes": ["a", "b", "c"]}):
        with pytest.raises(ValidationError):
            loads_model(json.dumps(bad))
    with pytest.raises(ValidationError):
        predict(train(PRESETS["Medium KNN"], X, y), X[:, :2])


# ------------------------------------------------------------------ evaluation


def test_confusion_matrix_matches_tally():
    actual = [0, 0, 1, 2, 2, 2, 1, 0, 1, 2]
    predicted = [0, 1, 1, 2, 2, 0, 1, 0, 1, 2]
    m = confusion_matrix(actual, predicted)
    assert m.tolist() == confusion_tally(actual, predicted)
    r = report_from_predictions("hand", actual, predicted)
    assert r.accuracy == 80.0
    assert r.per_class_recall == (2 / 3, 1.0, 0.75)
    assert r.false_discovery_rate == (1 / 3, 1 / 4, 0.0)


def test_perfect_and_constant_predictors():
    y = np.repeat([0, 1, 2], 10)
    r = report_from_predictions("perfect", y, y)
    assert r.matrix.tolist() == np.diag([10, 10, 10]).tolist()
    assert r.accuracy == 100.0 and r.false_discovery_rate == (0.0, 0.0, 0.0)
    c = report_from_predictions("constant", y, np.zeros(30, dtype=int))
    assert c.accuracy == pytest.approx(100 / 3)
    assert c.false_discovery_rate[1] is None


def test_report_csv_hides_timing_by_default():
    r = report_from_predictions("m", [0, 1], [0, 1], train_time=1.5, predict_time=0.5)
    assert reports_csv([r]).splitlines() == ["Model,Acc. %,Speed,T-Time", "m,100.0,,"]
    assert reports_csv([r], timing=True).splitlines()[1] == "m,100.0,4.0,1.5000"
    assert "train_time" not in r.to_document() and r.to_document(timing=True)["predict_throughput"] == 4.0


def test_stratified_folds_balanced_and_seeded():
    y = np.array([0] * 13 + [1] * 7 + [2] * 10)
    a = stratified_folds(y, 4, seed=1)
    assert np.array_equal(a, stratified_folds(y, 4, seed=1))
    sizes = np.bincount(a, minlength=4)
    assert sizes.max() - sizes.min() <= 1
    for c in range(3):
        per = np.bincount(a[y == c], minlength=4)
        assert per.max() - per.min() <= 1
    with pytest.raises(ValidationError):
        stratified_folds(y, 1, 0)
    with pytest.raises(ValidationError):
        stratified_folds(y, 31, 0)


def test_leave_one_out_lda_on_separable_data():
    X, y = _blobs(10, n=30, gap=10.0, p=2)
    cv = kfold_cv(PRESETS["Linear Discriminant"], X, y, folds=30, seed=0)
    assert cv.mean == 1.0


def test_cv_determinism_and_range():
    X, y = _blobs(12, n=90, gap=1.5)
    for folds in (2, 5):
        a = kfold_cv(PRESETS["Medium KNN"], X, y, folds, seed=4)
        b = kfold_cv(PRESETS["Medium KNN"], X, y, folds, seed=4)
        assert a == b
        assert all(0.0 <= v <= 1.0 for v in a.fold_accuracies)
        assert a.std == pytest.approx(np.std(a.fold_accuracies, ddof=1))
