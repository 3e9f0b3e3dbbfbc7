"""Gradient-boosted tree classifier and logistic baseline, from first principles.

Boosting fits each regression tree to the negative gradient of the logistic
loss (label minus predicted probability). Splits greedily maximize the
L2-regularized variance gain

    0.5 * (GL^2/(nL + l2) + GR^2/(nR + l2) - G^2/(n + l2))

over every midpoint between consecutive distinct sorted feature values, and a
leaf's weight is sum(residual) / (count + l2), clamped. Ties in gain break
toward the lower feature index, then the lower threshold, so training is
fully deterministic; there is no stochastic component at all.

Every node records its would-be leaf weight, which downstream attribution
uses as the node value for decision-path deltas.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FeatureTable

FORMAT_VERSION = 1


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


# ---------------------------------------------------------------------------
# configs


@dataclass(frozen=True, slots=True)
class GBTConfig:
    n_trees: int = 200
    max_depth: int = 4
    learning_rate: float = 0.1
    l2: float = 1.0
    min_child_weight: float = 1.0
    leaf_clamp: float = 10.0

    def validate(self) -> None:
        if self.n_trees < 0:
            raise ValueError(f"n_trees must be >= 0, got {self.n_trees}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if not (0.0 < self.learning_rate <= 8.0):
            raise ValueError(f"learning_rate must be in (0, 8], got {self.learning_rate}")
        if self.l2 < 0.0:
            raise ValueError(f"l2 must be >= 0, got {self.l2}")
        if self.min_child_weight < 0.0:
            raise ValueError(f"min_child_weight must be >= 0, got {self.min_child_weight}")
        if self.leaf_clamp <= 0.0:
            raise ValueError(f"leaf_clamp must be positive, got {self.leaf_clamp}")


@dataclass(frozen=True, slots=True)
class LogisticConfig:
    l2: float = 0.1
    tol: float = 1e-6
    max_epochs: int = 5000

    def validate(self) -> None:
        if self.l2 < 0.0:
            raise ValueError(f"l2 must be >= 0, got {self.l2}")
        if self.tol <= 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")


# ---------------------------------------------------------------------------
# trees


@dataclass(frozen=True)
class TreeNode:
    """value is the leaf weight this node would emit if it were a leaf."""

    value: float
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class Tree:
    root: TreeNode
    _flat: tuple | None = field(default=None, repr=False, compare=False)

    def flat(self) -> tuple:
        """Parallel node arrays (feature, threshold, left, right, value, depth)."""
        if self._flat is None:
            feats: list[int] = []
            thrs: list[float] = []
            lefts: list[int] = []
            rights: list[int] = []
            values: list[float] = []

            def walk(node: TreeNode) -> int:
                i = len(feats)
                feats.append(-1 if node.is_leaf else node.feature)
                thrs.append(0.0 if node.is_leaf else node.threshold)
                lefts.append(-1)
                rights.append(-1)
                values.append(node.value)
                if not node.is_leaf:
                    lefts[i] = walk(node.left)
                    rights[i] = walk(node.right)
                return i

            walk(self.root)
            depth = _tree_depth(self.root)
            self._flat = (
                np.array(feats, dtype=np.int64),
                np.array(thrs, dtype=np.float64),
                np.array(lefts, dtype=np.int64),
                np.array(rights, dtype=np.int64),
                np.array(values, dtype=np.float64),
                depth,
            )
        return self._flat

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        """Leaf weight reached by each row; goes left when x[feature] < threshold."""
        feats, thrs, lefts, rights, values, depth = self.flat()
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        for _ in range(depth):
            f = feats[node]
            internal = f >= 0
            if not internal.any():
                break
            x = X[rows, np.where(internal, f, 0)]
            nxt = np.where(x < thrs[node], lefts[node], rights[node])
            node = np.where(internal, nxt, node)
        return values[node]


def _tree_depth(node: TreeNode) -> int:
    if node.is_leaf:
        return 0
    return 1 + max(_tree_depth(node.left), _tree_depth(node.right))


def _leaf_weight(residual_sum: float, count: int, cfg: GBTConfig) -> float:
    w = residual_sum / (count + cfg.l2)
    return max(-cfg.leaf_clamp, min(cfg.leaf_clamp, w))


def _best_split(X: np.ndarray, r: np.ndarray, idx: np.ndarray, cfg: GBTConfig):
    """Best (feature, threshold, gain) at a node, or None if no positive gain.

    Candidates are midpoints between consecutive distinct sorted values of
    each feature. The first strictly-better candidate wins, scanning features
    ascending and thresholds ascending, which fixes all tie-breaks.
    """
    n = idx.size
    total = float(r[idx].sum())
    base_term = total * total / (n + cfg.l2)
    best = None  # (gain, feature, threshold, sorted order, left count)
    for f in range(X.shape[1]):
        xv_all = X[idx, f]
        order = np.argsort(xv_all, kind="stable")
        xv = xv_all[order]
        if xv[0] == xv[-1]:
            continue  # constant feature at this node, no candidates
        rv = r[idx[order]]
        prefix = np.cumsum(rv)
        pos = np.nonzero(xv[1:] > xv[:-1])[0] + 1  # left-side row counts
        n_left = pos.astype(np.float64)
        n_right = n - n_left
        ok = (n_left >= cfg.min_child_weight) & (n_right >= cfg.min_child_weight)
        if not ok.any():
            continue
        pos = pos[ok]
        n_left = n_left[ok]
        n_right = n_right[ok]
        g_left = prefix[pos - 1]
        g_right = total - g_left
        gains = 0.5 * (
            g_left * g_left / (n_left + cfg.l2)
            + g_right * g_right / (n_right + cfg.l2)
            - base_term
        )
        k = int(np.argmax(gains))  # first maximum, so the lowest threshold wins
        if gains[k] > 0.0 and (best is None or gains[k] > best[0]):
            p = int(pos[k])
            threshold = float((xv[p - 1] + xv[p]) / 2.0)
            best = (float(gains[k]), f, threshold, order, p)
    return best


def _build_node(X: np.ndarray, r: np.ndarray, idx: np.ndarray, depth: int, cfg: GBTConfig) -> TreeNode:
    value = _leaf_weight(float(r[idx].sum()), idx.size, cfg)
    if depth >= cfg.max_depth or idx.size < 2:
        return TreeNode(value=value)
    found = _best_split(X, r, idx, cfg)
    if found is None:
        return TreeNode(value=value)
    _, f, threshold, order, p = found
    left_idx = idx[order[:p]]
    right_idx = idx[order[p:]]
    return TreeNode(
        value=value,
        feature=f,
        threshold=threshold,
        left=_build_node(X, r, left_idx, depth + 1, cfg),
        right=_build_node(X, r, right_idx, depth + 1, cfg),
    )


# ---------------------------------------------------------------------------
# models


@dataclass
class GBTModel:
    feature_names: tuple[str, ...]
    base_score: float
    learning_rate: float
    trees: tuple[Tree, ...]

    def margin(self, table: FeatureTable) -> np.ndarray:
        X = aligned_rows(self.feature_names, table)
        out = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            out += self.learning_rate * tree.leaf_values(X)
        return out


@dataclass
class LogisticModel:
    feature_names: tuple[str, ...]
    weights: np.ndarray
    bias: float

    def margin(self, table: FeatureTable) -> np.ndarray:
        X = aligned_rows(self.feature_names, table)
        return X @ self.weights + self.bias


Model = GBTModel | LogisticModel


def aligned_rows(feature_names: Sequence[str], table: FeatureTable) -> np.ndarray:
    """Rows reordered into the model's feature order; names must match as sets."""
    names = tuple(feature_names)
    if tuple(table.feature_names) == names:
        return table.rows
    missing = [f for f in names if f not in table.feature_names]
    extra = [f for f in table.feature_names if f not in names]
    if missing or extra:
        raise ValueError(
            f"feature schema mismatch: missing {missing or 'none'}, unexpected {extra or 'none'}"
        )
    order = [table.feature_names.index(f) for f in names]
    return table.rows[:, order]


def predict_proba(model: Model, table: FeatureTable) -> np.ndarray:
    """Fraud probability per row, strictly inside (0, 1)."""
    return np.asarray(sigmoid(model.margin(table)))


def classify(probabilities: Sequence[float], threshold: float = 0.5) -> np.ndarray:
    """1 where probability >= threshold. The threshold must be in (0, 1)."""
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    p = np.asarray(probabilities, dtype=np.float64)
    return (p >= threshold).astype(np.int64)


def _check_training_table(table: FeatureTable) -> tuple[np.ndarray, np.ndarray]:
    if table.labels is None:
        raise ValueError("training requires a labeled feature table")
    if len(table) == 0:
        raise ValueError("training requires at least one row")
    X = table.rows
    if not np.isfinite(X).all():
        raise ValueError("feature table contains non-finite values")
    y = table.labels.astype(np.float64)
    if y.min() == y.max():
        raise ValueError("training requires both classes to be present")
    return X, y


def train_gbt(table: FeatureTable, cfg: GBTConfig | None = None) -> GBTModel:
    """Boosted ensemble; prediction is sigmoid(base + lr * sum of leaf weights)."""
    cfg = cfg or GBTConfig()
    cfg.validate()
    X, y = _check_training_table(table)
    pos = float(y.sum())
    neg = float(y.size - pos)
    base = math.log(pos / neg)
    margin = np.full(y.size, base, dtype=np.float64)
    trees: list[Tree] = []
    all_idx = np.arange(y.size)
    for _ in range(cfg.n_trees):
        p = sigmoid(margin)
        residual = y - p
        tree = Tree(root=_build_node(X, residual, all_idx, 0, cfg))
        margin += cfg.learning_rate * tree.leaf_values(X)
        trees.append(tree)
    return GBTModel(
        feature_names=tuple(table.feature_names),
        base_score=base,
        learning_rate=cfg.learning_rate,
        trees=tuple(trees),
    )


def logistic_loss_and_grad(
    weights: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, float]:
    """Mean logistic loss with L2 penalty on weights (not bias), and its gradient."""
    n = y.size
    z = X @ weights + bias
    loss = float(np.logaddexp(0.0, z).mean() - (y * z).mean() + 0.5 * l2 * (weights @ weights))
    p = sigmoid(z)
    grad_w = X.T @ (p - y) / n + l2 * weights
    grad_b = float((p - y).mean())
    return loss, grad_w, grad_b


def train_logistic(table: FeatureTable, cfg: LogisticConfig | None = None) -> LogisticModel:
    """Full-batch gradient descent with backtracking line search.

    Stops when the gradient norm falls below tol or max_epochs is reached;
    both the path and the result are deterministic.
    """
    cfg = cfg or LogisticConfig()
    cfg.validate()
    X, y = _check_training_table(table)
    w = np.zeros(X.shape[1], dtype=np.float64)
    b = 0.0
    step = 1.0
    loss, gw, gb = logistic_loss_and_grad(w, b, X, y, cfg.l2)
    for _ in range(cfg.max_epochs):
        gnorm_sq = float(gw @ gw + gb * gb)
        if math.sqrt(gnorm_sq) <= cfg.tol:
            break
        while step >= 1e-12:
            w_new = w - step * gw
            b_new = b - step * gb
            loss_new, gw_new, gb_new = logistic_loss_and_grad(w_new, b_new, X, y, cfg.l2)
            if loss_new <= loss - 1e-4 * step * gnorm_sq:
                w, b, loss, gw, gb = w_new, b_new, loss_new, gw_new, gb_new
                step = min(step * 2.0, 64.0)
                break
            step *= 0.5
        else:
            break  # no productive step length remains
    return LogisticModel(feature_names=tuple(table.feature_names), weights=w, bias=float(b))


# ---------------------------------------------------------------------------
# class imbalance


def undersample(table: FeatureTable, majority_ratio: float = 10.0, seed: int = 0) -> FeatureTable:
    """Keep every minority row and ceil(ratio * minority) majority rows.

    Majority rows are drawn without replacement under the seed; the result
    preserves the original row order. If fewer majority rows exist than the
    ratio asks for, all of them are kept.
    """
    if majority_ratio <= 0.0:
        raise ValueError(f"majority_ratio must be positive, got {majority_ratio}")
    if table.labels is None:
        raise ValueError("undersampling requires labels")
    labels = table.labels
    n_pos = int(labels.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("undersampling requires both classes to be present")
    minority_label = 1 if n_pos <= n_neg else 0
    minority_idx = np.nonzero(labels == minority_label)[0]
    majority_idx = np.nonzero(labels != minority_label)[0]
    want = math.ceil(majority_ratio * minority_idx.size)
    rng = np.random.default_rng(seed)
    if want >= majority_idx.size:
        chosen = majority_idx
    else:
        chosen = rng.choice(majority_idx, size=want, replace=False)
    keep = np.sort(np.concatenate([minority_idx, chosen]))
    return table.take(keep)


# ---------------------------------------------------------------------------
# serialization


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value}
    return {
        "value": node.value,
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(doc: dict) -> TreeNode:
    if "feature" not in doc:
        return TreeNode(value=float(doc["value"]))
    return TreeNode(
        value=float(doc["value"]),
        feature=int(doc["feature"]),
        threshold=float(doc["threshold"]),
        left=_node_from_dict(doc["left"]),
        right=_node_from_dict(doc["right"]),
    )


def model_to_json(model: Model) -> str:
    if isinstance(model, GBTModel):
        doc = {
            "format_version": FORMAT_VERSION,
            "type": "gbt",
            "feature_names": list(model.feature_names),
            "base_score": model.base_score,
            "learning_rate": model.learning_rate,
            "trees": [_node_to_dict(t.root) for t in model.trees],
        }
    elif isinstance(model, LogisticModel):
        doc = {
            "format_version": FORMAT_VERSION,
            "type": "logistic",
            "feature_names": list(model.feature_names),
            "weights": [float(v) for v in model.weights],
            "bias": model.bias,
        }
    else:
        raise ValueError(f"cannot serialize {type(model).__name__}")
    return json.dumps(doc, indent=2, sort_keys=True)


def model_from_json(text: str) -> Model:
    doc = json.loads(text)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {version!r}")
    kind = doc.get("type")
    if kind == "gbt":
        return GBTModel(
            feature_names=tuple(doc["feature_names"]),
            base_score=float(doc["base_score"]),
            learning_rate=float(doc["learning_rate"]),
            trees=tuple(Tree(root=_node_from_dict(d)) for d in doc["trees"]),
        )
    if kind == "logistic":
        return LogisticModel(
            feature_names=tuple(doc["feature_names"]),
            weights=np.array(doc["weights"], dtype=np.float64),
            bias=float(doc["bias"]),
        )
    raise ValueError(f"unknown model type {kind!r}")


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path: str | Path) -> Model:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
