"""Decision-path attribution for the boosted ensemble, and the temporal
interpretability score (TIS) built on top of it.

Walking a tree from root to leaf, every edge credits the change in node value
(the would-be leaf weight) to the feature tested at the parent. Scaled by the
ensemble's learning rate and telescoped over all trees, these deltas satisfy
an exact completeness identity:

    bias + sum(contributions) == raw margin

where bias is base_score plus the learning-rate-scaled sum of root values.

TIS for one prediction is the share of absolute contribution mass carried by
temporal features; it is 0 when the total mass is 0, and always in [0, 1].
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .enrich import ATTRIBUTE_NAMES
from .features import FeatureTable
from .model import GBTModel, Model, aligned_rows, predict_proba, sigmoid

TEMPORAL_FEATURES = ATTRIBUTE_NAMES


@dataclass(frozen=True, slots=True)
class FeatureContribution:
    feature_name: str
    contribution: float  # signed, in margin (log-odds) units


@dataclass(frozen=True, slots=True)
class SequenceStep:
    tree_index: int
    feature_name: str
    threshold: float
    branch: str  # "left" when value < threshold, else "right"
    delta: float  # learning-rate-scaled change in node value


@dataclass(frozen=True)
class ExplanationSequence:
    tx_id: str
    bias: float
    steps: tuple[SequenceStep, ...]
    margin: float
    probability: float


def _require_ensemble(model: Model) -> GBTModel:
    if not isinstance(model, GBTModel):
        raise ValueError("decision-path attribution requires the boosted ensemble")
    return model


def _walk_row(model: GBTModel, row: np.ndarray):
    """Yield (tree_index, feature_index, threshold, branch, raw_delta) steps."""
    for t_i, tree in enumerate(model.trees):
        node = tree.root
        while not node.is_leaf:
            child = node.left if row[node.feature] < node.threshold else node.right
            yield (
                t_i,
                node.feature,
                node.threshold,
                "left" if child is node.left else "right",
                child.value - node.value,
            )
            node = child


def ensemble_bias(model: GBTModel) -> float:
    return model.base_score + model.learning_rate * sum(t.root.value for t in model.trees)


def attribute_prediction(
    model: Model, row: Sequence[float]
) -> tuple[list[FeatureContribution], float]:
    """Per-feature contributions and the bias for one feature row.

    The row must already be in the model's feature order. Contributions of
    features never visited are 0 and are still reported, keeping the output
    aligned with feature_names.
    """
    gbt = _require_ensemble(model)
    vec = np.asarray(row, dtype=np.float64)
    if vec.shape != (len(gbt.feature_names),):
        raise ValueError(
            f"row has {vec.shape} values, model expects {len(gbt.feature_names)}"
        )
    totals = [0.0] * len(gbt.feature_names)
    for _, f, _, _, delta in _walk_row(gbt, vec):
        totals[f] += gbt.learning_rate * delta
    contribs = [
        FeatureContribution(feature_name=name, contribution=totals[i])
        for i, name in enumerate(gbt.feature_names)
    ]
    return contribs, ensemble_bias(gbt)


def explanation_sequence(model: Model, table: FeatureTable, row_index: int) -> ExplanationSequence:
    """Ordered decision path for one row, steps in (tree, depth) order."""
    gbt = _require_ensemble(model)
    X = aligned_rows(gbt.feature_names, table)
    if not (0 <= row_index < X.shape[0]):
        raise ValueError(f"row_index {row_index} out of range for {X.shape[0]} rows")
    row = X[row_index]
    steps = tuple(
        SequenceStep(
            tree_index=t_i,
            feature_name=gbt.feature_names[f],
            threshold=thr,
            branch=branch,
            delta=gbt.learning_rate * delta,
        )
        for t_i, f, thr, branch, delta in _walk_row(gbt, row)
    )
    bias = ensemble_bias(gbt)
    margin = bias + sum(s.delta for s in steps)
    tx_id = table.tx_ids[row_index] if table.tx_ids is not None else f"row{row_index}"
    return ExplanationSequence(
        tx_id=tx_id,
        bias=bias,
        steps=steps,
        margin=margin,
        probability=float(sigmoid(margin)),
    )


def attribution_matrix(model: Model, table: FeatureTable) -> tuple[np.ndarray, float]:
    """(n_rows, n_features) contribution matrix plus the shared bias.

    Level-by-level vectorized walk over each tree; row sums plus bias equal
    the margins exactly (same additions as the per-row walk, reordered).
    """
    gbt = _require_ensemble(model)
    X = aligned_rows(gbt.feature_names, table)
    n = X.shape[0]
    contrib = np.zeros((n, len(gbt.feature_names)), dtype=np.float64)
    rows = np.arange(n)
    for tree in gbt.trees:
        feats, thrs, lefts, rights, values, depth = tree.flat()
        node = np.zeros(n, dtype=np.int64)
        for _ in range(depth):
            f = feats[node]
            internal = f >= 0
            if not internal.any():
                break
            x = X[rows, np.where(internal, f, 0)]
            nxt = np.where(x < thrs[node], lefts[node], rights[node])
            nxt = np.where(internal, nxt, node)
            delta = gbt.learning_rate * (values[nxt] - values[node])
            np.add.at(contrib, (rows[internal], f[internal]), delta[internal])
            node = nxt
    return contrib, ensemble_bias(gbt)


# ---------------------------------------------------------------------------
# temporal interpretability score


def tis(
    contributions: Sequence[FeatureContribution] | Mapping[str, float],
    temporal_feature_set: Sequence[str] = TEMPORAL_FEATURES,
) -> float:
    """Share of absolute contribution mass on temporal features, in [0, 1]."""
    if isinstance(contributions, Mapping):
        items = contributions.items()
    else:
        items = ((c.feature_name, c.contribution) for c in contributions)
    temporal = set(temporal_feature_set)
    total = 0.0
    t_mass = 0.0
    for name, value in items:
        mass = abs(value)
        total += mass
        if name in temporal:
            t_mass += mass
    if total == 0.0:
        return 0.0
    return min(1.0, t_mass / total)


@dataclass(frozen=True)
class TISReport:
    temporal_feature_set: tuple[str, ...]
    threshold: float
    per_tx: tuple[tuple[str, float], ...]  # (tx_id, tis) for every scored row
    flagged_tx_ids: tuple[str, ...]
    aggregate: float | None  # mean TIS over flagged rows; None when none flagged

    def to_json(self) -> str:
        doc = {
            "temporal_feature_set": list(self.temporal_feature_set),
            "threshold": self.threshold,
            "per_tx": [{"tx_id": t, "tis": v} for t, v in self.per_tx],
            "flagged_tx_ids": list(self.flagged_tx_ids),
            "aggregate": self.aggregate,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def tis_report_from_json(text: str) -> TISReport:
    doc = json.loads(text)
    return TISReport(
        temporal_feature_set=tuple(doc["temporal_feature_set"]),
        threshold=float(doc["threshold"]),
        per_tx=tuple((p["tx_id"], float(p["tis"])) for p in doc["per_tx"]),
        flagged_tx_ids=tuple(doc["flagged_tx_ids"]),
        aggregate=None if doc["aggregate"] is None else float(doc["aggregate"]),
    )


def aggregate_tis(
    model: Model,
    table: FeatureTable,
    temporal_feature_set: Sequence[str] = TEMPORAL_FEATURES,
    threshold: float = 0.5,
) -> TISReport:
    """Per-row TIS for every row; aggregate averages the rows the model flags.

    Temporal names absent from the model's features contribute no mass.
    """
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    gbt = _require_ensemble(model)
    contrib, _ = attribution_matrix(gbt, table)
    temporal = [i for i, f in enumerate(gbt.feature_names) if f in set(temporal_feature_set)]
    mass = np.abs(contrib)
    total = mass.sum(axis=1)
    t_mass = mass[:, temporal].sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where(total > 0.0, np.minimum(1.0, t_mass / np.maximum(total, 1e-300)), 0.0)
    ids = table.tx_ids if table.tx_ids is not None else tuple(f"row{i}" for i in range(len(table)))
    probs = predict_proba(gbt, table)
    flagged = probs >= threshold
    aggregate = float(scores[flagged].mean()) if flagged.any() else None
    return TISReport(
        temporal_feature_set=tuple(temporal_feature_set),
        threshold=threshold,
        per_tx=tuple(zip(ids, (float(s) for s in scores))),
        flagged_tx_ids=tuple(i for i, fl in zip(ids, flagged) if fl),
        aggregate=aggregate,
    )


def sequence_to_json(seq: ExplanationSequence, temporal_feature_set: Sequence[str] = TEMPORAL_FEATURES) -> str:
    """Sequence JSON with the per-feature rollup and this prediction's TIS."""
    totals: dict[str, float] = {}
    for s in seq.steps:
        totals[s.feature_name] = totals.get(s.feature_name, 0.0) + s.delta
    doc = {
        "tx_id": seq.tx_id,
        "bias": seq.bias,
        "steps": [
            {
                "tree": s.tree_index,
                "feature": s.feature_name,
                "threshold": s.threshold,
                "branch": s.branch,
                "delta": s.delta,
            }
            for s in seq.steps
        ],
        "feature_contributions": {k: totals[k] for k in sorted(totals)},
        "margin": seq.margin,
        "probability": seq.probability,
        "tis": tis(totals, temporal_feature_set),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def margin_check(seq: ExplanationSequence, tolerance: float = 1e-9) -> bool:
    """True when bias plus step deltas reproduces the margin within tolerance."""
    return math.isclose(
        seq.bias + sum(s.delta for s in seq.steps), seq.margin, abs_tol=tolerance, rel_tol=0.0
    )
