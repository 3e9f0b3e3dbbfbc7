"""Classifier tests: split search, boosting behavior, logistic fit, sampling."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timetrail.features import FeatureTable
from timetrail.model import (
    GBTConfig,
    GBTModel,
    LogisticConfig,
    LogisticModel,
    aligned_rows,
    classify,
    logistic_loss_and_grad,
    model_from_json,
    model_to_json,
    predict_proba,
    sigmoid,
    train_gbt,
    train_logistic,
    undersample,
)


def make_table(X, y=None, names=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if names is None:
        names = tuple(f"f{i}" for i in range(X.shape[1]))
    ids = tuple(f"t{i:04d}" for i in range(X.shape[0]))
    return FeatureTable(feature_names=tuple(names), rows=X, labels=y, tx_ids=ids)


def log_loss(y, p):
    p = np.clip(p, 1e-15, 1.0 - 1e-15)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean())


# ---------------------------------------------------------------------------
# independent split oracle: naive loops over every midpoint candidate


def oracle_first_split(X, y, cfg):
    """Best (feature, threshold) for the first boosting round, or None.

    Scans features ascending and candidate midpoints ascending; a candidate
    wins only on strictly larger gain, so the earliest optimum is kept.
    """
    r = y - sigmoid(math.log(y.sum() / (y.size - y.sum())))
    n = r.size
    total = r.sum()
    base_term = total * total / (n + cfg.l2)
    best = None
    for f in range(X.shape[1]):
        xs = sorted(set(X[:, f]))
        for lo, hi in zip(xs, xs[1:]):
            thr = (lo + hi) / 2.0
            left = X[:, f] < thr
            n_left = int(left.sum())
            n_right = n - n_left
            if n_left < cfg.min_child_weight or n_right < cfg.min_child_weight:
                continue
            g_left = r[left].sum()
            g_right = total - g_left
            gain = 0.5 * (
                g_left * g_left / (n_left + cfg.l2)
                + g_right * g_right / (n_right + cfg.l2)
                - base_term
            )
            if gain > 0.0 and (best is None or gain > best[0] + 1e-12):
                best = (gain, f, thr)
    if best is None:
        return None
    return best[1], best[2]


def walk_features(node, found):
    if node.feature is None:
        return
    found.add(node.feature)
    walk_features(node.left, found)
    walk_features(node.right, found)


# ---------------------------------------------------------------------------
# boosted ensemble


def test_stump_splits_at_midpoint():
    table = make_table([0.0, 1.0, 2.0, 3.0], y=[0, 0, 1, 1])
    cfg = GBTConfig(n_trees=1, max_depth=1, learning_rate=1.0, l2=0.0)
    model = train_gbt(table, cfg)
    root = model.trees[0].root
    assert root.feature == 0
    assert root.threshold == 1.5
    assert root.left.is_leaf and root.right.is_leaf
    assert root.left.value < 0.0 < root.right.value


def test_zero_trees_predicts_prior():
    y = np.array([0, 0, 0, 1], dtype=np.int64)
    table = make_table(np.arange(4.0), y=y)
    model = train_gbt(table, GBTConfig(n_trees=0))
    assert model.trees == ()
    p = predict_proba(model, table)
    assert np.allclose(p, 0.25, atol=1e-12)
    assert model.base_score == pytest.approx(math.log(1.0 / 3.0))


def test_constant_feature_never_chosen():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(120, 3))
    X[:, 1] = 7.0  # no candidate thresholds exist here
    y = (X[:, 0] + 0.5 * X[:, 2] > 0).astype(np.int64)
    model = train_gbt(make_table(X, y=y), GBTConfig(n_trees=20, max_depth=3))
    used: set[int] = set()
    for tree in model.trees:
        walk_features(tree.root, used)
    assert 1 not in used
    assert used  # something informative was split on


@pytest.mark.parametrize("seed", range(12))
def test_first_split_matches_exhaustive_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 50))
    d = int(rng.integers(1, 4))
    X = np.round(rng.normal(size=(n, d)), 1)  # coarse grid forces value ties
    y = rng.integers(0, 2, size=n).astype(np.int64)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    cfg = GBTConfig(n_trees=1, max_depth=1)
    model = train_gbt(make_table(X, y=y), cfg)
    root = model.trees[0].root
    expected = oracle_first_split(X, y, cfg)
    if expected is None:
        assert root.is_leaf
    else:
        assert (root.feature, root.threshold) == expected


def test_training_loss_is_monotone():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(200, 4))
    logits = 1.5 * X[:, 0] - X[:, 2] + 0.3 * rng.normal(size=200)
    y = (rng.random(200) < sigmoid(logits)).astype(np.int64)
    table = make_table(X, y=y)
    cfg = GBTConfig(n_trees=30, max_depth=3)
    model = train_gbt(table, cfg)
    # replay the ensemble one tree at a time
    margin = np.full(len(table), model.base_score)
    losses = [log_loss(y, sigmoid(margin))]
    for tree in model.trees:
        margin = margin + model.learning_rate * tree.leaf_values(table.rows)
        losses.append(log_loss(y, sigmoid(margin)))
    for prev, cur in zip(losses, losses[1:]):
        assert cur <= prev + 1e-12
    assert losses[-1] < losses[0]


def test_deep_tree_fits_conjunction():
    # y = x0 AND x1 needs an interaction, so depth 1 alone cannot fit it
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] * 8)
    y = (X[:, 0] * X[:, 1] > 0).astype(np.int64)
    table = make_table(X, y=y)
    shallow = train_gbt(table, GBTConfig(n_trees=60, max_depth=1, learning_rate=0.3))
    deep = train_gbt(table, GBTConfig(n_trees=60, max_depth=2, learning_rate=0.3))
    assert (classify(predict_proba(deep, table)) == y).all()
    assert log_loss(y, predict_proba(deep, table)) < log_loss(y, predict_proba(shallow, table))


def test_zero_gain_symmetry_stops_splitting():
    # xor residuals cancel on both axes, so no root split clears the gain bar
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] * 8)
    y = (X[:, 0] != X[:, 1]).astype(np.int64)
    model = train_gbt(make_table(X, y=y), GBTConfig(n_trees=3, max_depth=2))
    assert all(t.root.is_leaf for t in model.trees)


def test_gbt_determinism():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 3))
    y = rng.integers(0, 2, size=80).astype(np.int64)
    y[0], y[1] = 0, 1
    table = make_table(X, y=y)
    a = train_gbt(table, GBTConfig(n_trees=10))
    b = train_gbt(table, GBTConfig(n_trees=10))
    assert model_to_json(a) == model_to_json(b)


# ---------------------------------------------------------------------------
# logistic baseline


def test_logistic_without_features_learns_prior_log_odds():
    y = np.array([0, 0, 0, 1, 1, 1, 1, 1], dtype=np.int64)
    table = FeatureTable(feature_names=(), rows=np.empty((8, 0)), labels=y)
    model = train_logistic(table, LogisticConfig(l2=0.0))
    assert model.weights.shape == (0,)
    assert model.bias == pytest.approx(math.log(5.0 / 3.0), abs=1e-5)


def test_logistic_separates_blobs():
    rng = np.random.default_rng(9)
    a = rng.normal(loc=-3.0, size=(60, 2))
    b = rng.normal(loc=3.0, size=(60, 2))
    X = np.vstack([a, b])
    y = np.array([0] * 60 + [1] * 60, dtype=np.int64)
    table = make_table(X, y=y)
    model = train_logistic(table, LogisticConfig(l2=1e-4))
    preds = classify(predict_proba(model, table))
    assert (preds == y).all()


@pytest.mark.parametrize("seed", range(6))
def test_logistic_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    n, d = 24, 3
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, size=n).astype(np.float64)
    w = rng.normal(size=d)
    b = float(rng.normal())
    l2 = 0.3
    _, gw, gb = logistic_loss_and_grad(w, b, X, y, l2)
    eps = 1e-6
    for j in range(d):
        step = np.zeros(d)
        step[j] = eps
        hi, _, _ = logistic_loss_and_grad(w + step, b, X, y, l2)
        lo, _, _ = logistic_loss_and_grad(w - step, b, X, y, l2)
        num = (hi - lo) / (2 * eps)
        assert abs(num - gw[j]) <= 1e-5 * max(1.0, abs(num))
    hi, _, _ = logistic_loss_and_grad(w, b + eps, X, y, l2)
    lo, _, _ = logistic_loss_and_grad(w, b - eps, X, y, l2)
    assert abs((hi - lo) / (2 * eps) - gb) <= 1e-5


def test_l2_shrinks_weights():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(100, 2))
    y = (X[:, 0] > 0).astype(np.int64)
    table = make_table(X, y=y)
    loose = train_logistic(table, LogisticConfig(l2=1e-6))
    tight = train_logistic(table, LogisticConfig(l2=10.0))
    assert np.linalg.norm(tight.weights) < np.linalg.norm(loose.weights)


# ---------------------------------------------------------------------------
# schema alignment and validation


def test_permuted_schema_predicts_identically():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 3))
    y = rng.integers(0, 2, size=50).astype(np.int64)
    y[:2] = [0, 1]
    table = make_table(X, y=y, names=("a", "b", "c"))
    model = train_gbt(table, GBTConfig(n_trees=5))
    shuffled = FeatureTable(
        feature_names=("c", "a", "b"),
        rows=X[:, [2, 0, 1]],
        labels=y,
    )
    assert np.array_equal(predict_proba(model, table), predict_proba(model, shuffled))


def test_schema_mismatch_is_rejected():
    table = make_table(np.zeros((3, 2)), names=("a", "b"))
    with pytest.raises(ValueError, match="feature schema mismatch"):
        aligned_rows(("a", "z"), table)


@pytest.mark.parametrize(
    "X,y,message",
    [
        (np.zeros((0, 1)), np.zeros(0, dtype=np.int64), "at least one row"),
        (np.zeros((3, 1)), np.array([1, 1, 1]), "both classes"),
        (np.array([[np.inf], [0.0]]), np.array([0, 1]), "non-finite"),
    ],
)
def test_training_table_validation(X, y, message):
    table = make_table(X, y=y)
    with pytest.raises(ValueError, match=message):
        train_gbt(table)
    with pytest.raises(ValueError, match=message):
        train_logistic(table)


def test_unlabeled_table_cannot_train():
    table = make_table(np.zeros((3, 1)))
    with pytest.raises(ValueError, match="label"):
        train_gbt(table)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_trees": -1},
        {"max_depth": 0},
        {"learning_rate": 0.0},
        {"l2": -0.5},
        {"leaf_clamp": 0.0},
    ],
)
def test_gbt_config_validation(kwargs):
    with pytest.raises(ValueError):
        GBTConfig(**kwargs).validate()


@pytest.mark.parametrize("kwargs", [{"l2": -1.0}, {"tol": 0.0}, {"max_epochs": 0}])
def test_logistic_config_validation(kwargs):
    with pytest.raises(ValueError):
        LogisticConfig(**kwargs).validate()


def test_classify_threshold():
    assert classify([0.49, 0.5, 0.51], threshold=0.5).tolist() == [0, 1, 1]
    with pytest.raises(ValueError, match="threshold"):
        classify([0.5], threshold=1.0)


# ---------------------------------------------------------------------------
# serialization


def test_gbt_json_round_trip_is_exact():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(60, 3))
    y = rng.integers(0, 2, size=60).astype(np.int64)
    y[:2] = [0, 1]
    table = make_table(X, y=y)
    model = train_gbt(table, GBTConfig(n_trees=8))
    text = model_to_json(model)
    back = model_from_json(text)
    assert np.array_equal(model.margin(table), back.margin(table))
    assert model_to_json(back) == text  # stable bytes through a full cycle


def test_logistic_json_round_trip():
    model = LogisticModel(feature_names=("a", "b"), weights=np.array([0.5, -1.25]), bias=0.125)
    back = model_from_json(model_to_json(model))
    assert isinstance(back, LogisticModel)
    assert back.feature_names == ("a", "b")
    assert np.array_equal(back.weights, model.weights)
    assert back.bias == model.bias


def test_model_json_rejects_unknown_type():
    doc = {"format_version": json.loads(model_to_json(LogisticModel(("a",), np.zeros(1), 0.0)))["format_version"]}
    doc["type"] = "forest"
    with pytest.raises(ValueError, match="unknown model type"):
        model_from_json(json.dumps(doc))
    with pytest.raises(ValueError, match="format_version"):
        model_from_json(json.dumps({"format_version": "0", "type": "gbt"}))


# ---------------------------------------------------------------------------
# undersampling


def test_undersample_exact_counts():
    y = np.array([1] * 10 + [0] * 1000, dtype=np.int64)
    table = make_table(np.arange(1010.0), y=y)
    out = undersample(table, majority_ratio=5.0, seed=0)
    assert len(out) == 60
    assert int(out.labels.sum()) == 10  # every minority row survives


def test_undersample_preserves_row_order():
    y = np.array([0, 1, 0, 0, 1, 0, 0, 0], dtype=np.int64)
    table = make_table(np.arange(8.0), y=y)
    out = undersample(table, majority_ratio=2.0, seed=1)
    positions = [int(v) for v in out.rows[:, 0]]
    assert positions == sorted(positions)
    assert out.tx_ids == tuple(f"t{p:04d}" for p in positions)


def test_undersample_is_deterministic():
    y = np.array([1] * 20 + [0] * 400, dtype=np.int64)
    table = make_table(np.arange(420.0), y=y)
    a = undersample(table, majority_ratio=3.0, seed=42)
    b = undersample(table, majority_ratio=3.0, seed=42)
    c = undersample(table, majority_ratio=3.0, seed=43)
    assert a.tx_ids == b.tx_ids
    assert a.tx_ids != c.tx_ids


def test_undersample_saturates_when_majority_is_scarce():
    y = np.array([1] * 6 + [0] * 9, dtype=np.int64)
    table = make_table(np.arange(15.0), y=y)
    out = undersample(table, majority_ratio=10.0, seed=0)
    assert len(out) == 15  # fewer majority rows than requested, keep them all


def test_undersample_validation():
    table = make_table(np.arange(4.0), y=np.array([1, 1, 1, 1]))
    with pytest.raises(ValueError, match="both classes"):
        undersample(table)
    with pytest.raises(ValueError, match="positive"):
        undersample(make_table(np.arange(2.0), y=np.array([0, 1])), majority_ratio=0.0)
    with pytest.raises(ValueError, match="label"):
        undersample(make_table(np.arange(2.0)))


@settings(max_examples=60)
@given(
    n_min=st.integers(1, 20),
    n_maj=st.integers(1, 200),
    ratio=st.floats(0.5, 20.0, allow_nan=False),
    seed=st.integers(0, 2**20),
)
def test_undersample_count_property(n_min, n_maj, ratio, seed):
    # build with the minority as the positive class
    if n_min > n_maj:
        n_min, n_maj = n_maj, n_min
    y = np.array([1] * n_min + [0] * n_maj, dtype=np.int64)
    table = make_table(np.arange(float(n_min + n_maj)), y=y)
    out = undersample(table, majority_ratio=ratio, seed=seed)
    kept_majority = len(out) - n_min
    assert int(out.labels.sum()) == n_min
    assert kept_majority == min(n_maj, math.ceil(ratio * n_min))
