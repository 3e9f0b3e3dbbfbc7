"""Temporal enrichment: per-transaction attributes computed from history only.

All rolling windows are half-open on the left, (t - w, t], and include the
row itself, so counts are always >= 1. Nothing after a row's timestamp can
influence its attributes.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Callable, Sequence

from .data import Dataset, Transaction, day_of_week, hour_of_day

DAY = 86400
ATTRIBUTE_NAMES = (
    "hour_of_day",
    "day_of_week",
    "is_night",
    "seconds_since_last_user_tx",
    "user_tx_count_24h",
    "user_tx_count_48h",
    "user_tx_count_7d",
    "terminal_tx_count_48h",
    "amount_over_user_mean_30d",
)

# Night is the half-open hour range [0, 6).
NIGHT_END_HOUR = 6
# Ratio floor keeping amount_over_user_mean_30d strictly positive for 0 amounts.
MIN_AMOUNT_RATIO = 1e-9


@dataclass(frozen=True, slots=True)
class EnrichConfig:
    # Recency saturates here; also the sentinel for a user's first transaction.
    recency_cap_seconds: int = 30 * DAY

    def validate(self) -> None:
        if self.recency_cap_seconds <= 0:
            raise ValueError(
                f"recency_cap_seconds must be positive, got {self.recency_cap_seconds}"
            )


@dataclass(frozen=True, slots=True)
class TemporalAttributes:
    hour_of_day: int
    day_of_week: int
    is_night: int
    seconds_since_last_user_tx: int
    user_tx_count_24h: int
    user_tx_count_48h: int
    user_tx_count_7d: int
    terminal_tx_count_48h: int
    amount_over_user_mean_30d: float

    def value(self, name: str) -> float:
        if name not in ATTRIBUTE_NAMES:
            raise ValueError(f"unknown temporal attribute {name!r}")
        return float(getattr(self, name))


@dataclass(frozen=True, slots=True)
class EnrichedTransaction:
    base: Transaction
    attrs: TemporalAttributes

    @property
    def context(self) -> dict:
        """Echo of the base fields most often read next to the attributes."""
        b = self.base
        return {"tx_type": b.tx_type, "terminal_id": b.terminal_id, "amount": b.amount}


def _grouped_indices(rows: Sequence[Transaction], key: Callable[[Transaction], str]) -> dict:
    groups: dict[str, list[int]] = {}
    for i, t in enumerate(rows):
        groups.setdefault(key(t), []).append(i)
    return groups


def _windowed_counts_into(
    out: list[int], rows: Sequence[Transaction], groups: dict, window: int
) -> None:
    """For each row, the number of same-group rows with timestamp in (t-w, t].

    Two-pointer sweep per group, O(n) overall. Rows sharing a timestamp see
    each other regardless of their order in the group.
    """
    for idxs in groups.values():
        ts = [rows[i].timestamp for i in idxs]
        m = len(idxs)
        left = 0
        i = 0
        while i < m:
            j = i
            while j + 1 < m and ts[j + 1] == ts[i]:
                j += 1
            while ts[left] <= ts[i] - window:
                left += 1
            count = j - left + 1
            for k in range(i, j + 1):
                out[idxs[k]] = count
            i = j + 1


def _recency_into(
    out: list[int], rows: Sequence[Transaction], groups: dict, cap: int
) -> None:
    """Seconds since the user's latest other transaction at or before t.

    A tie at the same timestamp yields 0; a user's first transaction gets the
    cap as sentinel; gaps longer than the cap saturate at the cap.
    """
    for idxs in groups.values():
        ts = [rows[i].timestamp for i in idxs]
        m = len(idxs)
        i = 0
        while i < m:
            j = i
            while j + 1 < m and ts[j + 1] == ts[i]:
                j += 1
            if j > i:
                gap = 0
            elif i == 0:
                gap = cap
            else:
                gap = min(ts[i] - ts[i - 1], cap)
            for k in range(i, j + 1):
                out[idxs[k]] = gap
            i = j + 1


def _amount_ratio_into(
    out: list[float], rows: Sequence[Transaction], groups: dict, window: int
) -> None:
    """amount / mean(amount of the user's strictly-earlier rows in (t-w, t)).

    No prior rows, or a non-positive prior mean, gives the neutral ratio 1.0.
    The result is floored at MIN_AMOUNT_RATIO so it stays strictly positive.
    """
    for idxs in groups.values():
        ts = [rows[i].timestamp for i in idxs]
        amounts = [rows[i].amount for i in idxs]
        m = len(idxs)
        prefix = [0.0] * (m + 1)
        for k in range(m):
            prefix[k + 1] = prefix[k] + amounts[k]
        left = 0
        i = 0
        while i < m:
            j = i
            while j + 1 < m and ts[j + 1] == ts[i]:
                j += 1
            while ts[left] <= ts[i] - window:
                left += 1
            count = i - left  # strictly earlier rows only; ties excluded
            mean = (prefix[i] - prefix[left]) / count if count > 0 else 0.0
            for k in range(i, j + 1):
                if count <= 0 or mean <= 0.0:
                    ratio = 1.0
                else:
                    ratio = max(MIN_AMOUNT_RATIO, amounts[k] / mean)
                    if not math.isfinite(ratio):
                        ratio = sys.float_info.max
                out[idxs[k]] = ratio
            i = j + 1


def rolling_user_counts(d: Dataset, window_seconds: int) -> list[int]:
    """Per-row count of the same user's transactions in (t - w, t]."""
    if window_seconds <= 0:
        raise ValueError(f"window_seconds must be positive, got {window_seconds}")
    rows = d.transactions
    _require_complete(rows)
    out = [0] * len(rows)
    _windowed_counts_into(out, rows, _grouped_indices(rows, lambda t: t.user_id), window_seconds)
    return out


def _require_complete(rows: Sequence[Transaction]) -> None:
    for t in rows:
        if t.user_id is None or t.terminal_id is None or t.amount is None:
            raise ValueError(
                f"transaction {t.tx_id} has missing fields; cleanse the dataset before enriching"
            )


def enrich(d: Dataset, cfg: EnrichConfig | None = None) -> list[EnrichedTransaction]:
    """Attach the nine temporal attributes to every row, in dataset order."""
    cfg = cfg or EnrichConfig()
    cfg.validate()
    rows = d.transactions
    _require_complete(rows)
    n = len(rows)

    by_user = _grouped_indices(rows, lambda t: t.user_id)
    by_terminal = _grouped_indices(rows, lambda t: t.terminal_id)

    c24 = [0] * n
    c48 = [0] * n
    c7d = [0] * n
    term48 = [0] * n
    recency = [0] * n
    ratio = [0.0] * n
    _windowed_counts_into(c24, rows, by_user, DAY)
    _windowed_counts_into(c48, rows, by_user, 2 * DAY)
    _windowed_counts_into(c7d, rows, by_user, 7 * DAY)
    _windowed_counts_into(term48, rows, by_terminal, 2 * DAY)
    _recency_into(recency, rows, by_user, cfg.recency_cap_seconds)
    _amount_ratio_into(ratio, rows, by_user, 30 * DAY)

    out = []
    for i, t in enumerate(rows):
        hour = hour_of_day(t.timestamp)
        attrs = TemporalAttributes(
            hour_of_day=hour,
            day_of_week=day_of_week(t.timestamp),
            is_night=1 if hour < NIGHT_END_HOUR else 0,
            seconds_since_last_user_tx=recency[i],
            user_tx_count_24h=c24[i],
            user_tx_count_48h=c48[i],
            user_tx_count_7d=c7d[i],
            terminal_tx_count_48h=term48[i],
            amount_over_user_mean_30d=ratio[i],
        )
        out.append(EnrichedTransaction(base=t, attrs=attrs))
    return out


def attribute_value(row: EnrichedTransaction, name: str) -> float:
    """Numeric value of a temporal attribute, or of the base amount."""
    if name == "amount":
        return float(row.base.amount)
    return row.attrs.value(name)


def is_finite_attribute(value: float) -> bool:
    return math.isfinite(value)
