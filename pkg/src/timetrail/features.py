"""Feature tables for model input, plus min-max scaling fit on train only."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import TX_TYPES, Transaction
from .enrich import ATTRIBUTE_NAMES, EnrichedTransaction

# Raw features available without enrichment: amount plus tx_type one-hots.
# Identifiers and the raw epoch timestamp are deliberately excluded.
RAW_FEATURES = ("amount",) + tuple(f"tx_type_{t}" for t in TX_TYPES)
ENRICHED_FEATURES = RAW_FEATURES + ATTRIBUTE_NAMES


@dataclass(frozen=True)
class FeatureTable:
    """Rectangular numeric matrix with named columns.

    labels are 0 (legit) / 1 (fraud) when every row is labeled, else None.
    tx_ids are carried for fingerprints and explanations.
    """

    feature_names: tuple[str, ...]
    rows: np.ndarray
    labels: np.ndarray | None = None
    tx_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != len(self.feature_names):
            raise ValueError(
                f"rows must be (n, {len(self.feature_names)}) to match feature_names, "
                f"got shape {rows.shape}"
            )
        object.__setattr__(self, "rows", rows)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (rows.shape[0],):
                raise ValueError("labels length must match row count")
            if not np.isin(labels, (0, 1)).all():
                raise ValueError("labels must be 0 or 1")
            object.__setattr__(self, "labels", labels)
        if self.tx_ids is not None and len(self.tx_ids) != rows.shape[0]:
            raise ValueError("tx_ids length must match row count")

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.feature_names.index(name)]

    def take(self, indices: Sequence[int]) -> "FeatureTable":
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureTable(
            feature_names=self.feature_names,
            rows=self.rows[idx],
            labels=None if self.labels is None else self.labels[idx],
            tx_ids=None if self.tx_ids is None else tuple(self.tx_ids[i] for i in idx),
        )


def _labels_of(rows: Sequence[Transaction]) -> np.ndarray | None:
    if any(t.label is None for t in rows):
        return None
    return np.array([1 if t.label == "fraud" else 0 for t in rows], dtype=np.int64)


def _raw_matrix(rows: Sequence[Transaction]) -> np.ndarray:
    m = np.zeros((len(rows), len(RAW_FEATURES)), dtype=np.float64)
    type_col = {t: 1 + i for i, t in enumerate(TX_TYPES)}
    for i, t in enumerate(rows):
        m[i, 0] = t.amount
        m[i, type_col[t.tx_type]] = 1.0
    return m


def raw_feature_table(rows: Sequence[Transaction]) -> FeatureTable:
    """Parity baseline inputs: no temporal information."""
    return FeatureTable(
        feature_names=RAW_FEATURES,
        rows=_raw_matrix(rows),
        labels=_labels_of(rows),
        tx_ids=tuple(t.tx_id for t in rows),
    )


def enriched_feature_table(rows: Sequence[EnrichedTransaction]) -> FeatureTable:
    """Raw features plus the nine temporal attributes, in declared order."""
    base = [r.base for r in rows]
    raw = _raw_matrix(base)
    attrs = np.array(
        [[getattr(r.attrs, a) for a in ATTRIBUTE_NAMES] for r in rows], dtype=np.float64
    ).reshape(len(rows), len(ATTRIBUTE_NAMES))
    return FeatureTable(
        feature_names=ENRICHED_FEATURES,
        rows=np.hstack([raw, attrs]) if rows else np.zeros((0, len(ENRICHED_FEATURES))),
        labels=_labels_of(base),
        tx_ids=tuple(t.tx_id for t in base),
    )


@dataclass(frozen=True)
class ScalerParams:
    feature_names: tuple[str, ...]
    mins: tuple[float, ...]
    maxs: tuple[float, ...]

    def to_json(self) -> str:
        doc = {
            "feature_names": list(self.feature_names),
            "mins": list(self.mins),
            "maxs": list(self.maxs),
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ScalerParams":
        doc = json.loads(text)
        return ScalerParams(
            feature_names=tuple(doc["feature_names"]),
            mins=tuple(float(v) for v in doc["mins"]),
            maxs=tuple(float(v) for v in doc["maxs"]),
        )


def fit_scaler(train: FeatureTable) -> ScalerParams:
    """Per-feature min/max from training rows only."""
    if len(train) == 0:
        raise ValueError("cannot fit a scaler on an empty table")
    if not np.isfinite(train.rows).all():
        raise ValueError("feature table contains non-finite values")
    return ScalerParams(
        feature_names=train.feature_names,
        mins=tuple(float(v) for v in train.rows.min(axis=0)),
        maxs=tuple(float(v) for v in train.rows.max(axis=0)),
    )


def apply_scaler(params: ScalerParams, table: FeatureTable) -> FeatureTable:
    """Map each feature to [0, 1]; out-of-range values clip to the ends.

    A feature whose training min equals its max maps to the constant 0.0.
    """
    if params.feature_names != table.feature_names:
        raise ValueError(
            f"scaler features {params.feature_names} do not match table features "
            f"{table.feature_names}"
        )
    mins = np.array(params.mins)
    span = np.array(params.maxs) - mins
    degenerate = span == 0.0
    safe_span = np.where(degenerate, 1.0, span)
    scaled = (table.rows - mins) / safe_span
    scaled = np.clip(scaled, 0.0, 1.0)
    scaled[:, degenerate] = 0.0
    return FeatureTable(
        feature_names=table.feature_names,
        rows=scaled,
        labels=table.labels,
        tx_ids=table.tx_ids,
    )


def save_scaler(params: ScalerParams, path: str | Path) -> None:
    Path(path).write_text(params.to_json(), encoding="utf-8")


def load_scaler(path: str | Path) -> ScalerParams:
    return ScalerParams.from_json(Path(path).read_text(encoding="utf-8"))
