"""Plot-data exporters and deterministic SVG renderings.

Every figure exists first as plain data (CSV or JSON) so downstream tooling
never has to scrape pixels; the SVG renderings are built from the same data
with fixed float formatting, so identical inputs yield identical bytes.
Undefined correlation cells serialize as empty CSV fields / JSON null and
render as hatched cells.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

from .correlate import CorrelationMatrix
from .explain import ExplanationSequence, TISReport

# Diverging scale anchors: -1 cold, 0 neutral, +1 hot.
_COLD = (33, 102, 172)
_NEUTRAL = (247, 247, 247)
_HOT = (178, 24, 43)


def _lerp_color(a: tuple, b: tuple, t: float) -> str:
    channels = (round(a[i] + (b[i] - a[i]) * t) for i in range(3))
    return "#{:02x}{:02x}{:02x}".format(*channels)


def diverging_color(value: float) -> str:
    v = max(-1.0, min(1.0, value))
    if v < 0.0:
        return _lerp_color(_NEUTRAL, _COLD, -v)
    return _lerp_color(_NEUTRAL, _HOT, v)


def _svg(width: int, height: int, body: str) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">{body}</svg>\n'
    )


_HATCH_DEF = (
    '<defs><pattern id="undef" width="6" height="6" patternUnits="userSpaceOnUse">'
    '<rect width="6" height="6" fill="#e8e8e8"/>'
    '<path d="M0,6 L6,0" stroke="#9a9a9a" stroke-width="1"/>'
    "</pattern></defs>"
)


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# ---------------------------------------------------------------------------
# correlation heatmap


@dataclass(frozen=True)
class HeatmapSpec:
    labels: tuple[str, ...]
    window: tuple[int, int] | None
    values: tuple[tuple[float | None, ...], ...]


def heatmap_data(m: CorrelationMatrix) -> HeatmapSpec:
    return HeatmapSpec(labels=m.attributes, window=m.window, values=m.values)


def heatmap_to_csv(m: CorrelationMatrix) -> str:
    """Long form, one row per ordered cell; undefined cells have no value."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["attr_a", "attr_b", "window_start", "window_end", "coefficient"])
    start = "" if m.window is None else str(m.window[0])
    end = "" if m.window is None else str(m.window[1])
    for i, a in enumerate(m.attributes):
        for j, b in enumerate(m.attributes):
            v = m.values[i][j]
            w.writerow([a, b, start, end, "" if v is None else repr(float(v))])
    return out.getvalue()


def heatmap_from_csv(text: str) -> CorrelationMatrix:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != ["attr_a", "attr_b", "window_start", "window_end", "coefficient"]:
        raise ValueError(f"unexpected heatmap csv header {header}")
    attrs: list[str] = []
    cells: dict[tuple[str, str], float | None] = {}
    window: tuple[int, int] | None = None
    for a, b, start, end, coeff in reader:
        if a not in attrs:
            attrs.append(a)
        cells[(a, b)] = None if coeff == "" else float(coeff)
        if start != "":
            window = (int(start), int(end))
    values = tuple(tuple(cells[(a, b)] for b in attrs) for a in attrs)
    return CorrelationMatrix(attributes=tuple(attrs), window=window, values=values)


def heatmap_to_json(m: CorrelationMatrix) -> str:
    doc = {
        "attributes": list(m.attributes),
        "window": None if m.window is None else {"start": m.window[0], "end": m.window[1]},
        "values": [[v for v in row] for row in m.values],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def heatmap_from_json(text: str) -> CorrelationMatrix:
    doc = json.loads(text)
    window = doc.get("window")
    return CorrelationMatrix(
        attributes=tuple(doc["attributes"]),
        window=None if window is None else (int(window["start"]), int(window["end"])),
        values=tuple(tuple(v for v in row) for row in doc["values"]),
    )


def heatmap_to_svg(spec: HeatmapSpec) -> str:
    """One rect per cell; the margin carries row and column labels."""
    cell = 34
    left = 10 + max((len(l) for l in spec.labels), default=0) * 7
    top = 112
    k = len(spec.labels)
    width = left + k * cell + 20
    height = top + k * cell + 20
    parts = [_HATCH_DEF]
    for j, label in enumerate(spec.labels):
        x = left + j * cell + cell // 2
        parts.append(
            f'<text x="{x}" y="{top - 8}" font-size="11" text-anchor="start" '
            f'transform="rotate(-60 {x} {top - 8})" font-family="monospace">{_esc(label)}</text>'
        )
    for i, label in enumerate(spec.labels):
        y = top + i * cell + cell // 2 + 4
        parts.append(
            f'<text x="{left - 6}" y="{y}" font-size="11" text-anchor="end" '
            f'font-family="monospace">{_esc(label)}</text>'
        )
        for j in range(k):
            v = spec.values[i][j]
            x = left + j * cell
            y0 = top + i * cell
            fill_attr = "url(#undef)" if v is None else diverging_color(v)
            title = "undefined" if v is None else f"{v:.4f}"
            parts.append(
                f'<rect x="{x}" y="{y0}" width="{cell}" height="{cell}" fill="{fill_attr}" '
                f'stroke="#ffffff" stroke-width="1"><title>{_esc(spec.labels[i])} / '
                f"{_esc(spec.labels[j])}: {title}</title></rect>"
            )
            if v is not None:
                tx = x + cell // 2
                ty = y0 + cell // 2 + 3
                parts.append(
                    f'<text x="{tx}" y="{ty}" font-size="8" text-anchor="middle" '
                    f'font-family="monospace">{v:.2f}</text>'
                )
    return _svg(width, height, "".join(parts))


# ---------------------------------------------------------------------------
# flagged-transaction frequency series


@dataclass(frozen=True)
class TimeSeriesSpec:
    name: str
    window_seconds: int
    points: tuple[tuple[int, int], ...]  # (window_start, flagged_count)
    overlay: tuple[tuple[int, int], ...] | None  # (window_start, true_fraud_count)


def flagged_frequency_series(
    rows: Sequence[tuple[int, int]],
    window_seconds: int,
    labels: Sequence[int] | None = None,
) -> TimeSeriesSpec:
    """Count flagged rows per tumbling window over the rows' full time range.

    rows are (timestamp, flag) pairs; optional labels (1 = fraud) add a
    ground-truth overlay. Interior windows with no flags still appear, so a
    flagless period is an all-zero series rather than a gap.
    """
    if window_seconds <= 0:
        raise ValueError("window_seconds must be positive")
    if labels is not None and len(labels) != len(rows):
        raise ValueError("labels length must match rows")
    if not rows:
        return TimeSeriesSpec("flagged", window_seconds, (), None if labels is None else ())
    ts = [t for t, _ in rows]
    t_min, t_max = min(ts), max(ts)
    n_windows = (t_max - t_min) // window_seconds + 1
    counts = [0] * n_windows
    fraud = [0] * n_windows
    for i, (t, flag) in enumerate(rows):
        k = (t - t_min) // window_seconds
        if flag:
            counts[k] += 1
        if labels is not None and labels[i]:
            fraud[k] += 1
    points = tuple((t_min + k * window_seconds, counts[k]) for k in range(n_windows))
    overlay = (
        None
        if labels is None
        else tuple((t_min + k * window_seconds, fraud[k]) for k in range(n_windows))
    )
    return TimeSeriesSpec("flagged", window_seconds, points, overlay)


def series_to_csv(spec: TimeSeriesSpec) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    if spec.overlay is None:
        w.writerow(["window_start", "flagged_count"])
        for t, c in spec.points:
            w.writerow([t, c])
    else:
        w.writerow(["window_start", "flagged_count", "fraud_count"])
        fraud = dict(spec.overlay)
        for t, c in spec.points:
            w.writerow([t, c, fraud.get(t, 0)])
    return out.getvalue()


def series_to_svg(spec: TimeSeriesSpec) -> str:
    """Flagged counts as a polyline; windows holding true fraud get red dots."""
    width, height = 640, 220
    pad_l, pad_r, pad_t, pad_b = 48, 12, 14, 26
    n = len(spec.points)
    parts = []
    if n == 0:
        parts.append(
            f'<text x="{width // 2}" y="{height // 2}" text-anchor="middle" '
            f'font-family="monospace" font-size="12">no data</text>'
        )
        return _svg(width, height, "".join(parts))
    max_count = max(max(c for _, c in spec.points), 1)
    span_x = width - pad_l - pad_r
    span_y = height - pad_t - pad_b

    def x_of(i: int) -> float:
        return pad_l + (span_x * i / max(n - 1, 1))

    def y_of(c: int) -> float:
        return pad_t + span_y * (1.0 - c / max_count)

    coords = " ".join(f"{x_of(i):.2f},{y_of(c):.2f}" for i, (_, c) in enumerate(spec.points))
    parts.append(
        f'<polyline points="{coords}" fill="none" stroke="#2166ac" stroke-width="1.5"/>'
    )
    if spec.overlay is not None:
        for i, (_, fc) in enumerate(spec.overlay):
            if fc > 0:
                parts.append(
                    f'<circle cx="{x_of(i):.2f}" cy="{y_of(spec.points[i][1]):.2f}" r="3" '
                    f'fill="#b2182b"><title>{fc} fraud</title></circle>'
                )
    parts.append(
        f'<line x1="{pad_l}" y1="{height - pad_b}" x2="{width - pad_r}" '
        f'y2="{height - pad_b}" stroke="#444444" stroke-width="1"/>'
    )
    parts.append(
        f'<text x="{pad_l - 6}" y="{pad_t + 4}" text-anchor="end" font-size="10" '
        f'font-family="monospace">{max_count}</text>'
    )
    parts.append(
        f'<text x="{pad_l - 6}" y="{height - pad_b + 4}" text-anchor="end" font-size="10" '
        f'font-family="monospace">0</text>'
    )
    parts.append(
        f'<text x="{pad_l}" y="{height - 8}" font-size="10" font-family="monospace">'
        f"window={spec.window_seconds}s, {n} windows</text>"
    )
    return _svg(width, height, "".join(parts))


# ---------------------------------------------------------------------------
# decision-path sequence diagram


def render_sequence(seq: ExplanationSequence) -> str:
    """n splits render as n+1 nodes: the bias node plus one per step."""
    row_h = 26
    width = 560
    n = len(seq.steps)
    height = 20 + (n + 1) * row_h + 30
    parts = []

    def node(y: int, text: str, fill: str) -> str:
        return (
            f'<rect x="16" y="{y}" width="{width - 32}" height="{row_h - 6}" rx="4" '
            f'fill="{fill}" stroke="#888888" stroke-width="0.8"/>'
            f'<text x="24" y="{y + 14}" font-size="11" font-family="monospace">{_esc(text)}</text>'
        )

    parts.append(node(10, f"bias = {seq.bias:+.6f}", "#f0f0f0"))
    y = 10 + row_h
    for s in seq.steps:
        op = "<" if s.branch == "left" else ">="
        text = (
            f"t{s.tree_index}: {s.feature_name} {op} {s.threshold:.6g}  "
            f"delta {s.delta:+.6f}"
        )
        fill = "#fbe4e1" if s.delta > 0 else "#e2ecf6" if s.delta < 0 else "#f0f0f0"
        parts.append(node(y, text, fill))
        parts.append(
            f'<line x1="{width // 2}" y1="{y - 6}" x2="{width // 2}" y2="{y}" '
            f'stroke="#888888" stroke-width="0.8"/>'
        )
        y += row_h
    parts.append(
        f'<text x="16" y="{y + 16}" font-size="11" font-family="monospace">'
        f"{_esc(seq.tx_id)}: margin {seq.margin:+.6f}, p = {seq.probability:.6f}</text>"
    )
    return _svg(width, height, "".join(parts))


# ---------------------------------------------------------------------------
# TIS histogram


@dataclass(frozen=True)
class HistogramSpec:
    edges: tuple[float, ...]  # len bins + 1, uniform over [0, 1]
    counts: tuple[int, ...]


def tis_histogram(report: TISReport, bins: int = 10) -> HistogramSpec:
    """Uniform bins over [0, 1]; the last bin is closed so 1.0 lands inside."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    counts = [0] * bins
    for _, v in report.per_tx:
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"tis value {v} outside [0, 1]")
        counts[min(int(v * bins), bins - 1)] += 1
    edges = tuple(i / bins for i in range(bins + 1))
    return HistogramSpec(edges=edges, counts=tuple(counts))


def histogram_to_csv(spec: HistogramSpec) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["bin_start", "bin_end", "count"])
    for i, c in enumerate(spec.counts):
        w.writerow([repr(spec.edges[i]), repr(spec.edges[i + 1]), c])
    return out.getvalue()


def histogram_to_svg(spec: HistogramSpec) -> str:
    width, height = 420, 200
    pad_l, pad_b, pad_t = 40, 24, 12
    bins = len(spec.counts)
    max_c = max(max(spec.counts), 1) if spec.counts else 1
    bar_w = (width - pad_l - 12) / bins
    parts = []
    for i, c in enumerate(spec.counts):
        h = (height - pad_t - pad_b) * c / max_c
        x = pad_l + i * bar_w
        y = height - pad_b - h
        parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w - 2:.2f}" height="{h:.2f}" '
            f'fill="#2166ac"><title>[{spec.edges[i]:.2f}, {spec.edges[i + 1]:.2f}'
            f"{']' if i == bins - 1 else ')'}: {c}</title></rect>"
        )
    parts.append(
        f'<line x1="{pad_l}" y1="{height - pad_b}" x2="{width - 8}" y2="{height - pad_b}" '
        f'stroke="#444444" stroke-width="1"/>'
    )
    parts.append(
        f'<text x="{pad_l - 4}" y="{pad_t + 4}" text-anchor="end" font-size="10" '
        f'font-family="monospace">{max_c}</text>'
    )
    parts.append(
        f'<text x="{pad_l}" y="{height - 6}" font-size="10" font-family="monospace">0.0</text>'
    )
    parts.append(
        f'<text x="{width - 8}" y="{height - 6}" text-anchor="end" font-size="10" '
        f'font-family="monospace">1.0</text>'
    )
    return _svg(width, height, "".join(parts))
