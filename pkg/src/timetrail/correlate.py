"""Pearson correlation between temporal attributes, static and windowed.

Two computation routes exist on purpose: `pearson` is the definitional
two-pass formula over centered sums, while `RunningMoments` accumulates the
same centered sums incrementally (Welford updates) and backs the sliding
windows in `dynamic_correlation`. Constant series, or fewer than two points,
make the coefficient undefined (None), never NaN or a silent 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .enrich import ATTRIBUTE_NAMES, EnrichedTransaction, attribute_value


@dataclass(frozen=True)
class AttributeSeries:
    """Finite numeric values of one attribute, row-level or window-aggregate."""

    attribute_name: str
    values: tuple[float, ...]

    def __post_init__(self):
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError(
                    f"series {self.attribute_name!r} contains a non-finite value"
                )


def _values_of(x) -> Sequence[float]:
    return x.values if isinstance(x, AttributeSeries) else x


def pearson(x, y) -> float | None:
    """Population Pearson coefficient via the two-pass centered-sum formula.

    Returns None when fewer than two points or when either series is
    constant. The result is clamped into [-1, 1].
    """
    xs, ys = _values_of(x), _values_of(y)
    if len(xs) != len(ys):
        raise ValueError(f"series lengths differ: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        return None
    if min(xs) == max(xs) or min(ys) == max(ys):
        return None
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    sxx = math.fsum((vx - mean_x) ** 2 for vx in xs)
    syy = math.fsum((vy - mean_y) ** 2 for vy in ys)
    sxy = math.fsum((vx - mean_x) * (vy - mean_y) for vx, vy in zip(xs, ys))
    if sxx <= 0.0 or syy <= 0.0:
        return None
    # single sqrt keeps clean cases exact; the product can under/overflow for
    # extreme magnitudes even when both factors are positive, so fall back to
    # the two-sqrt form there
    prod = sxx * syy
    denom = math.sqrt(prod) if 0.0 < prod < math.inf else math.sqrt(sxx) * math.sqrt(syy)
    if denom <= 0.0 or not math.isfinite(denom):
        return None
    r = sxy / denom
    if not math.isfinite(r):
        return None
    return max(-1.0, min(1.0, r))


class RunningMoments:
    """Incremental centered sums for one (x, y) stream, Welford style.

    Accumulates counts, means, and the centered second moments m2x, m2y, cxy;
    exactly-constant input keeps the corresponding m2 at exactly 0.0, so the
    undefined cases match the two-pass route.
    """

    __slots__ = ("n", "mean_x", "mean_y", "m2x", "m2y", "cxy")

    def __init__(self) -> None:
        self.n = 0
        self.mean_x = 0.0
        self.mean_y = 0.0
        self.m2x = 0.0
        self.m2y = 0.0
        self.cxy = 0.0

    def update(self, x: float, y: float) -> None:
        self.n += 1
        dx = x - self.mean_x
        self.mean_x += dx / self.n
        dy = y - self.mean_y
        self.mean_y += dy / self.n
        # dx is pre-update, the second factors post-update: E[sum] stays exact
        self.m2x += dx * (x - self.mean_x)
        self.m2y += dy * (y - self.mean_y)
        self.cxy += dx * (y - self.mean_y)

    def correlation(self) -> float | None:
        if self.n < 2 or self.m2x <= 0.0 or self.m2y <= 0.0:
            return None
        prod = self.m2x * self.m2y
        denom = (
            math.sqrt(prod)
            if 0.0 < prod < math.inf
            else math.sqrt(self.m2x) * math.sqrt(self.m2y)
        )
        if denom <= 0.0 or not math.isfinite(denom):
            return None
        r = self.cxy / denom
        if not math.isfinite(r):
            return None
        return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class DynamicCorrelationSeries:
    pair: tuple[str, str]
    window_seconds: int
    stride_seconds: int
    points: tuple[tuple[int, float | None], ...]  # (window_start, coefficient)


def _check_attribute(name: str) -> None:
    if name not in ATTRIBUTE_NAMES and name != "amount":
        raise ValueError(
            f"unknown attribute {name!r}; expected one of {ATTRIBUTE_NAMES + ('amount',)}"
        )


def dynamic_correlation(
    rows: Sequence[EnrichedTransaction],
    pair: tuple[str, str],
    window_seconds: int,
    stride_seconds: int | None = None,
) -> DynamicCorrelationSeries:
    """Windowed correlation of two attributes over time-sorted rows.

    Window k covers [t_min + k*stride, t_min + k*stride + window); one point
    per window position until t_max is passed. Rows inside each window feed
    the incremental accumulator in timestamp order.
    """
    stride = window_seconds if stride_seconds is None else stride_seconds
    if stride <= 0 or window_seconds <= 0:
        raise ValueError("window and stride must be positive")
    if stride > window_seconds:
        raise ValueError(
            f"stride {stride} larger than window {window_seconds} would skip rows"
        )
    for name in pair:
        _check_attribute(name)
    if not rows:
        return DynamicCorrelationSeries(pair, window_seconds, stride, ())

    ts = [r.base.timestamp for r in rows]
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise ValueError("rows must be sorted by timestamp")
    xs = [attribute_value(r, pair[0]) for r in rows]
    ys = [attribute_value(r, pair[1]) for r in rows]

    t_min, t_max = ts[0], ts[-1]
    n = len(rows)
    points: list[tuple[int, float | None]] = []
    lo = hi = 0
    start = t_min
    while start <= t_max:
        end = start + window_seconds
        while lo < n and ts[lo] < start:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n and ts[hi] < end:
            hi += 1
        acc = RunningMoments()
        for i in range(lo, hi):
            acc.update(xs[i], ys[i])
        points.append((start, acc.correlation()))
        start += stride
    return DynamicCorrelationSeries(pair, window_seconds, stride, tuple(points))


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric attribute-by-attribute coefficients for one time window."""

    attributes: tuple[str, ...]
    window: tuple[int, int] | None  # (start, end) half-open, None = whole range
    values: tuple[tuple[float | None, ...], ...]

    def at(self, a: str, b: str) -> float | None:
        i, j = self.attributes.index(a), self.attributes.index(b)
        return self.values[i][j]


def correlation_matrix(
    rows: Sequence[EnrichedTransaction],
    attributes: Sequence[str] | None = None,
    window: tuple[int, int] | None = None,
) -> CorrelationMatrix:
    """Pairwise two-pass Pearson over the given rows.

    The upper triangle is computed and mirrored, so symmetry is exact; the
    diagonal is 1.0 unless the attribute is constant (then undefined).
    """
    attrs = tuple(attributes) if attributes is not None else ATTRIBUTE_NAMES
    for name in attrs:
        _check_attribute(name)
    series = [[attribute_value(r, a) for r in rows] for a in attrs]
    k = len(attrs)
    grid: list[list[float | None]] = [[None] * k for _ in range(k)]
    for i in range(k):
        constant = len(series[i]) < 2 or min(series[i]) == max(series[i])
        grid[i][i] = None if constant else 1.0
        for j in range(i + 1, k):
            grid[i][j] = grid[j][i] = pearson(series[i], series[j])
    return CorrelationMatrix(
        attributes=attrs,
        window=window,
        values=tuple(tuple(row) for row in grid),
    )


def window_aggregate_series(
    rows: Sequence[EnrichedTransaction],
    attribute: str,
    window_seconds: int,
) -> AttributeSeries:
    """Per-window mean of an attribute over tumbling windows from t_min.

    Supports correlating window aggregates instead of raw rows; empty windows
    contribute no point.
    """
    _check_attribute(attribute)
    if window_seconds <= 0:
        raise ValueError("window_seconds must be positive")
    if not rows:
        return AttributeSeries(attribute_name=attribute, values=())
    t_min = rows[0].base.timestamp
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for r in rows:
        k = (r.base.timestamp - t_min) // window_seconds
        sums[k] = sums.get(k, 0.0) + attribute_value(r, attribute)
        counts[k] = counts.get(k, 0) + 1
    values = tuple(sums[k] / counts[k] for k in sorted(sums))
    return AttributeSeries(attribute_name=attribute, values=values)
