"""Classification metrics with honest undefined handling, and report comparison.

Fraud is the positive class. Any metric whose denominator is zero is None
(serialized as null), never a silent 0. AUC uses the rank statistic with
average ranks, so tied scores earn half credit, which equals trapezoidal
integration of the ROC curve.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

METRIC_NAMES = (
    "accuracy",
    "precision",
    "recall",
    "f1",
    "auc_roc",
    "average_precision",
    "tis",
)


@dataclass(frozen=True, slots=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int


def _check_binary(values: Sequence[int], what: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{what} must contain only 0 and 1")
    return arr.astype(np.int64)


def confusion(labels: Sequence[int], predictions: Sequence[int]) -> ConfusionMatrix:
    y = _check_binary(labels, "labels")
    p = _check_binary(predictions, "predictions")
    if y.size != p.size:
        raise ValueError(f"labels and predictions lengths differ: {y.size} vs {p.size}")
    return ConfusionMatrix(
        tp=int(((y == 1) & (p == 1)).sum()),
        fp=int(((y == 0) & (p == 1)).sum()),
        tn=int(((y == 0) & (p == 0)).sum()),
        fn=int(((y == 1) & (p == 0)).sum()),
    )


def precision_of(cm: ConfusionMatrix) -> float | None:
    d = cm.tp + cm.fp
    return cm.tp / d if d else None


def recall_of(cm: ConfusionMatrix) -> float | None:
    d = cm.tp + cm.fn
    return cm.tp / d if d else None


def f1_of(cm: ConfusionMatrix) -> float | None:
    p, r = precision_of(cm), recall_of(cm)
    if p is None or r is None or p + r == 0.0:
        return None
    return 2.0 * p * r / (p + r)


def accuracy_of(cm: ConfusionMatrix) -> float | None:
    n = cm.tp + cm.fp + cm.tn + cm.fn
    return (cm.tp + cm.tn) / n if n else None


def _check_scores(labels, scores) -> tuple[np.ndarray, np.ndarray]:
    y = _check_binary(labels, "labels")
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise ValueError(f"labels and scores lengths differ: {y.size} vs {s.size}")
    if s.size and not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    return y, s


def auc_roc(labels: Sequence[int], scores: Sequence[float]) -> float | None:
    """Rank-based AUC; ties between classes count half. None if one class."""
    y, s = _check_scores(labels, scores)
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(s, kind="mergesort")
    sorted_scores = s[order]
    ranks = np.empty(y.size, dtype=np.float64)
    i = 0
    while i < y.size:
        j = i
        while j + 1 < y.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # average 1-based rank
        i = j + 1
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(labels: Sequence[int], scores: Sequence[float]) -> float | None:
    """Step-weighted precision over the descending score sweep, ties grouped."""
    y, s = _check_scores(labels, scores)
    n_pos = int(y.sum())
    if n_pos == 0:
        return None
    order = np.argsort(-s, kind="mergesort")
    y_sorted = y[order]
    s_sorted = s[order]
    ap = 0.0
    tp = 0
    seen = 0
    prev_recall = 0.0
    i = 0
    n = y.size
    while i < n:
        j = i
        while j + 1 < n and s_sorted[j + 1] == s_sorted[i]:
            j += 1
        tp += int(y_sorted[i : j + 1].sum())
        seen += j - i + 1
        recall = tp / n_pos
        precision = tp / seen
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return ap


def dataset_fingerprint(tx_ids: Sequence[str]) -> str:
    """Content hash of the evaluation rows, order-sensitive."""
    h = hashlib.sha256()
    for t in tx_ids:
        h.update(t.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


@dataclass(frozen=True)
class EvaluationReport:
    model_name: str
    threshold: float
    fingerprint: str
    row_count: int
    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    auc_roc: float | None
    average_precision: float | None
    tis: float | None

    def metric(self, name: str) -> float | None:
        if name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {name!r}")
        return getattr(self, name)


def evaluate(
    labels: Sequence[int],
    scores: Sequence[float],
    threshold: float,
    tx_ids: Sequence[str],
    model_name: str,
    tis_aggregate: float | None = None,
) -> EvaluationReport:
    """Score a labeled set at one decision threshold."""
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    y, s = _check_scores(labels, scores)
    if y.size != len(tx_ids):
        raise ValueError("tx_ids length must match labels")
    preds = (s >= threshold).astype(np.int64)
    cm = confusion(y, preds)
    return EvaluationReport(
        model_name=model_name,
        threshold=threshold,
        fingerprint=dataset_fingerprint(tx_ids),
        row_count=int(y.size),
        accuracy=accuracy_of(cm),
        precision=precision_of(cm),
        recall=recall_of(cm),
        f1=f1_of(cm),
        auc_roc=auc_roc(y, s),
        average_precision=average_precision(y, s),
        tis=tis_aggregate,
    )


def report_to_json(report: EvaluationReport) -> str:
    doc = {
        "model": report.model_name,
        "threshold": report.threshold,
        "fingerprint": report.fingerprint,
        "row_count": report.row_count,
        "metrics": {name: report.metric(name) for name in METRIC_NAMES},
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def report_from_json(text: str) -> EvaluationReport:
    doc = json.loads(text)
    metrics = doc.get("metrics")
    if not isinstance(metrics, dict):
        raise ValueError("report has no 'metrics' object")
    for name in METRIC_NAMES:
        if name not in metrics:
            raise ValueError(f"report missing metric {name!r}")
    return EvaluationReport(
        model_name=str(doc["model"]),
        threshold=float(doc["threshold"]),
        fingerprint=str(doc["fingerprint"]),
        row_count=int(doc["row_count"]),
        accuracy=metrics["accuracy"],
        precision=metrics["precision"],
        recall=metrics["recall"],
        f1=metrics["f1"],
        auc_roc=metrics["auc_roc"],
        average_precision=metrics["average_precision"],
        tis=metrics["tis"],
    )


def save_report(report: EvaluationReport, path: str | Path) -> None:
    Path(path).write_text(report_to_json(report), encoding="utf-8")


def load_report(path: str | Path) -> EvaluationReport:
    return report_from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ComparisonTable:
    baseline_name: str
    timetrail_name: str
    rows: tuple[tuple[str, float | None, float | None], ...]

    def to_csv(self) -> str:
        def cell(v: float | None) -> str:
            return "" if v is None else repr(float(v))

        lines = ["metric,baseline,timetrail"]
        for name, b, t in self.rows:
            lines.append(f"{name},{cell(b)},{cell(t)}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        def cell(v: float | None) -> str:
            return "undefined" if v is None else f"{v:.4f}"

        width = max(len(n) for n, _, _ in self.rows)
        header = f"{'metric'.ljust(width)}  {'baseline':>10}  {'timetrail':>10}"
        lines = [header, "-" * len(header)]
        for name, b, t in self.rows:
            lines.append(f"{name.ljust(width)}  {cell(b):>10}  {cell(t):>10}")
        return "\n".join(lines) + "\n"


def compare(baseline: EvaluationReport, timetrail: EvaluationReport) -> ComparisonTable:
    """Side-by-side metric table; refuses reports from different test sets."""
    if baseline.fingerprint != timetrail.fingerprint:
        raise ValueError(
            "cannot compare reports with different dataset fingerprints: "
            f"{baseline.fingerprint[:12]} vs {timetrail.fingerprint[:12]}"
        )
    rows = tuple((name, baseline.metric(name), timetrail.metric(name)) for name in METRIC_NAMES)
    return ComparisonTable(
        baseline_name=baseline.model_name,
        timetrail_name=timetrail.model_name,
        rows=rows,
    )
