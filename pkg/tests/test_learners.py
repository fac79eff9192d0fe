import numpy as np
import pytest

from pentrace.errors import SchemaError, ValidationError
from pentrace.learners import (Dataset, DTParams, GBTParams, MLPParams,
                               RFParams, SVMParams, dataset_from_vectors,
                               feature_importance, gbt_training_losses,
                               load_model, mlp_init, mlp_loss_and_grads,
                               predict, predict_vector, save_model,
                               svm_kkt_residuals, train)
from pentrace.learners import _tree_labels


def make_ds(X, y, groups=None):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if groups is None:
        groups = tuple(f"p{i}" for i in range(len(y)))
    return Dataset(X, tuple(f"f{i}" for i in range(X.shape[1])), y,
                   tuple(groups), tuple([1] * len(y)))


def random_ds(rng, n=80, d=5, flip=0):
    X = rng.normal(size=(n, d))
    w = rng.normal(size=d)
    y = (X @ w > 0).astype(int)
    if flip:
        y[:flip] = 1 - y[:flip]
    return make_ds(X, y)


# ----------------------------------------------------------------------
# decision tree


def test_dt_pure_labels_single_leaf():
    ds = make_ds([[0.0], [1.0], [2.0]], [1, 1, 1])
    model = train("DT", ds)
    assert model.state["root"]["leaf"] is True
    labels, _ = predict(model, np.array([[5.0], [-3.0]]))
    assert np.all(labels == 1)


@pytest.mark.parametrize("kind", ["SVM", "MLP", "GBT"])
def test_single_class_errors_for_non_trees(kind):
    ds = make_ds([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]], [1, 1, 1])
    with pytest.raises(ValidationError, match="single class"):
        train(kind, ds)


def test_dt_constant_leaf_on_depth_zero():
    ds = make_ds([[0.0], [1.0], [2.0], [3.0]], [0, 0, 0, 1])
    model = train("DT", ds, DTParams(max_depth=0))
    assert model.state["root"]["leaf"] is True
    labels, scores = predict(model, ds.features)
    assert np.all(labels == 0)  # majority
    assert np.allclose(scores, 0.25)


def test_dt_xor_exhaustive():
    X = [[0, 0], [0, 1], [1, 0], [1, 1]]
    y = [0, 1, 1, 0]
    model = train("DT", make_ds(X, y), DTParams(max_depth=2))
    labels, _ = predict(model, np.asarray(X, dtype=float))
    assert np.array_equal(labels, y)


def test_dt_full_depth_consistent_data():
    rng = np.random.default_rng(0)
    for seed in range(5):
        ds = random_ds(np.random.default_rng(seed), n=60, d=4)
        model = train("DT", ds, DTParams(max_depth=None, min_leaf=1))
        labels, _ = predict(model, ds.features)
        assert np.array_equal(labels, ds.labels)


def test_dt_training_point_gets_training_label():
    rng = np.random.default_rng(4)
    ds = random_ds(rng, n=40, d=3)
    model = train("DT", ds)
    for i in range(ds.n):
        label, _ = predict_vector(model, type("V", (), {
            "values": ds.features[i], "names": ds.names})())
        assert label == ds.labels[i]


def test_dt_midpoint_thresholds():
    ds = make_ds([[0.0], [2.0]], [0, 1])
    model = train("DT", ds)
    assert model.state["root"]["threshold"] == pytest.approx(1.0)


# ----------------------------------------------------------------------
# random forest


def test_rf_degenerate_equals_dt():
    rng = np.random.default_rng(1)
    ds = random_ds(rng, n=70, d=6)
    dt = train("DT", ds, DTParams())
    rf = train("RF", ds, RFParams(n_trees=1, bootstrap=False,
                                  features_per_split=6, seed=13))
    assert rf.state["trees"][0] == dt.state["root"]
    X_test = rng.normal(size=(30, 6))
    ld, sd = predict(dt, X_test)
    lr, sr = predict(rf, X_test)
    assert np.array_equal(ld, lr)


def test_rf_score_is_vote_fraction():
    rng = np.random.default_rng(2)
    ds = random_ds(rng, n=60, d=4, flip=6)
    model = train("RF", ds, RFParams(n_trees=7, seed=3))
    X_test = rng.normal(size=(25, 4))
    _, scores = predict(model, X_test)
    votes = np.vstack([_tree_labels(tree, X_test)
                       for tree in model.state["trees"]])
    assert np.allclose(scores, votes.mean(axis=0))
    assert np.all((scores * 7) % 1 == pytest.approx(0.0))


def test_rf_tie_breaks_to_class_zero():
    rng = np.random.default_rng(3)
    ds = random_ds(rng, n=40, d=3)
    model = train("RF", ds, RFParams(n_trees=2, seed=1))
    labels, scores = predict(model, rng.normal(size=(200, 3)))
    ties = scores == 0.5
    if ties.any():
        assert np.all(labels[ties] == 0)


def test_rf_determinism():
    rng = np.random.default_rng(5)
    ds = random_ds(rng, n=50, d=5, flip=5)
    a = train("RF", ds, RFParams(n_trees=11, seed=21))
    b = train("RF", ds, RFParams(n_trees=11, seed=21))
    assert a.state == b.state
    c = train("RF", ds, RFParams(n_trees=11, seed=22))
    assert c.state != a.state


# ----------------------------------------------------------------------
# SVM


def test_svm_symmetric_1d():
    ds = make_ds([[-1.0], [1.0]], [0, 1])
    model = train("SVM", ds, SVMParams(kernel="linear", C=1.0))
    labels, _ = predict(model, ds.features)
    assert np.array_equal(labels, [0, 1])
    _, mid = predict(model, np.array([[0.0]]))
    assert mid[0] == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("kernel", ["linear", "rbf"])
def test_svm_kkt_residuals_within_tolerance(kernel):
    for seed in (0, 1, 2):
        rng = np.random.default_rng(seed)
        ds = random_ds(rng, n=90, d=6, flip=5)
        params = SVMParams(kernel=kernel, C=1.0, tol=1e-3)
        model = train("SVM", ds, params)
        lower, upper = svm_kkt_residuals(model)
        assert lower <= params.tol + 1e-9
        assert upper <= params.tol + 1e-9


def test_svm_separable_accuracy():
    rng = np.random.default_rng(7)
    X = np.vstack([rng.normal(-2.0, 0.4, size=(30, 2)),
                   rng.normal(2.0, 0.4, size=(30, 2))])
    y = np.array([0] * 30 + [1] * 30)
    model = train("SVM", make_ds(X, y), SVMParams(kernel="rbf"))
    labels, _ = predict(model, X)
    assert np.mean(labels == y) == 1.0


# ----------------------------------------------------------------------
# MLP


def test_mlp_gradient_check_central_differences():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(12, 4))
    y = rng.integers(0, 2, 12).astype(float)
    weights = mlp_init(4, 6, rng)
    _, grads = mlp_loss_and_grads(weights, X, y)
    eps = 1e-6
    for key in weights:
        it = np.nditer(weights[key], flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            plus = {k: v.copy() for k, v in weights.items()}
            minus = {k: v.copy() for k, v in weights.items()}
            plus[key][idx] += eps
            minus[key][idx] -= eps
            numeric = (mlp_loss_and_grads(plus, X, y)[0]
                       - mlp_loss_and_grads(minus, X, y)[0]) / (2 * eps)
            denom = max(abs(numeric), abs(grads[key][idx]), 1e-8)
            assert abs(numeric - grads[key][idx]) / denom < 1e-4


def test_mlp_zero_weights_score_half():
    rng = np.random.default_rng(0)
    ds = random_ds(rng, n=30, d=3)
    model = train("MLP", ds, MLPParams(epochs=1, seed=0))
    for key, value in model.state["weights"].items():
        model.state["weights"][key] = (np.zeros_like(np.asarray(value))).tolist()
    _, scores = predict(model, rng.normal(size=(10, 3)))
    assert np.allclose(scores, 0.5)


def test_mlp_learns_separable():
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal(-1.5, 0.3, size=(40, 2)),
                   rng.normal(1.5, 0.3, size=(40, 2))])
    y = np.array([0] * 40 + [1] * 40)
    model = train("MLP", make_ds(X, y), MLPParams(epochs=200, seed=2))
    labels, _ = predict(model, X)
    assert np.mean(labels == y) >= 0.95


def test_mlp_determinism():
    rng = np.random.default_rng(6)
    ds = random_ds(rng, n=40, d=4, flip=4)
    a = train("MLP", ds, MLPParams(epochs=30, seed=5))
    b = train("MLP", ds, MLPParams(epochs=30, seed=5))
    assert a.state == b.state


# ----------------------------------------------------------------------
# gradient-boosted trees


def test_gbt_loss_non_increasing():
    for seed in range(4):
        rng = np.random.default_rng(seed)
        ds = random_ds(rng, n=100, d=5, flip=10)
        model = train("GBT", ds, GBTParams(n_rounds=80, depth=3, shrinkage=0.1))
        losses = gbt_training_losses(model)
        assert len(losses) == 81
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_gbt_fits_separable():
    rng = np.random.default_rng(3)
    ds = random_ds(rng, n=120, d=4)
    model = train("GBT", ds, GBTParams(n_rounds=60, depth=3, shrinkage=0.2))
    labels, scores = predict(model, ds.features)
    assert np.mean(labels == ds.labels) >= 0.99
    assert np.all((scores >= 0) & (scores <= 1))


# ----------------------------------------------------------------------
# importance, schema, serialization


def test_importance_single_informative_feature():
    rng = np.random.default_rng(4)
    n = 100
    y = rng.integers(0, 2, n)
    X = rng.normal(size=(n, 4))
    X[:, 2] = y * 2.0 - 1.0
    ds = make_ds(X, y)
    model = train("DT", ds)
    imp = feature_importance(model)
    assert imp["f2"] == pytest.approx(1.0)
    assert sum(imp.values()) == pytest.approx(1.0)


def test_importance_sums_to_one_for_forest():
    rng = np.random.default_rng(5)
    ds = random_ds(rng, n=80, d=6, flip=8)
    imp = feature_importance(train("RF", ds, RFParams(n_trees=15, seed=2)))
    assert sum(imp.values()) == pytest.approx(1.0)


def test_importance_noise_below_informative():
    # repeated-seed check: the informative feature dominates pure noise
    wins = 0
    for seed in range(6):
        rng = np.random.default_rng(seed)
        n = 120
        y = rng.integers(0, 2, n)
        X = rng.normal(size=(n, 3))
        X[:, 0] = y + 0.1 * rng.normal(size=n)
        ds = make_ds(X, y)
        imp = feature_importance(train("RF", ds, RFParams(n_trees=25, seed=seed)))
        wins += imp["f0"] > max(imp["f1"], imp["f2"])
    assert wins >= 5


def test_importance_unsupported_kind():
    rng = np.random.default_rng(1)
    ds = random_ds(rng, n=30, d=3)
    model = train("SVM", ds)
    with pytest.raises(ValidationError, match="unsupported"):
        feature_importance(model)


def test_schema_mismatch_lists_names():
    rng = np.random.default_rng(2)
    ds = random_ds(rng, n=30, d=3)
    model = train("DT", ds)
    with pytest.raises(SchemaError) as err:
        predict(model, ds.features, names=("f0", "f1", "zzz"))
    assert "zzz" in err.value.extra and "f2" in err.value.missing


def test_non_finite_rejected():
    X = np.array([[0.0, 1.0], [np.nan, 2.0], [1.0, 0.5], [2.0, 1.5]])
    with pytest.raises(ValidationError, match="non-finite"):
        train("DT", make_ds(X, [0, 1, 0, 1]))


def test_dataset_from_vectors_maps_labels():
    from pentrace.features import FeatureVector
    vecs = [FeatureVector("A", tuple(f"n{i}" for i in range(25)),
                          np.arange(25.0), label, f"p{k}", 1)
            for k, label in enumerate(["AD", "HC", "AD"])]
    ds = dataset_from_vectors(vecs)
    assert list(ds.labels) == [1, 0, 1]
    assert ds.groups == ("p0", "p1", "p2")


@pytest.mark.parametrize("kind,params", [
    ("DT", DTParams(max_depth=4)),
    ("RF", RFParams(n_trees=5, seed=7)),
    ("SVM", SVMParams(kernel="rbf")),
    ("MLP", MLPParams(epochs=15, seed=3)),
    ("GBT", GBTParams(n_rounds=10)),
])
def test_save_load_round_trip(tmp_path, kind, params):
    rng = np.random.default_rng(8)
    ds = random_ds(rng, n=50, d=4, flip=4)
    model = train(kind, ds, params)
    path = tmp_path / f"{kind}.json"
    save_model(model, path)
    again = load_model(path)
    assert again.kind == kind
    assert again.feature_names == ds.names
    assert again.params == params
    X_test = rng.normal(size=(20, 4))
    la, sa = predict(model, X_test)
    lb, sb = predict(again, X_test)
    assert np.array_equal(la, lb)
    assert np.allclose(sa, sb)
