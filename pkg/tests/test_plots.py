"""Plot-data exporter tests.

SVG output is checked structurally (parseable XML, element counts, markers
for undefined cells) and for byte determinism, never pixel by pixel.
"""

import xml.etree.ElementTree as ET

import pytest

from timetrail.correlate import CorrelationMatrix
from timetrail.explain import ExplanationSequence, SequenceStep, TISReport
from timetrail.plots import (
    HistogramSpec,
    diverging_color,
    flagged_frequency_series,
    heatmap_data,
    heatmap_from_csv,
    heatmap_from_json,
    heatmap_to_csv,
    heatmap_to_json,
    heatmap_to_svg,
    histogram_to_csv,
    histogram_to_svg,
    render_sequence,
    series_to_csv,
    series_to_svg,
    tis_histogram,
)


def svg_ok(text: str) -> ET.Element:
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    return root


def count_rects(text: str) -> int:
    return text.count("<rect")


@pytest.fixture
def matrix():
    return CorrelationMatrix(
        attributes=("a", "b", "c"),
        window=(100, 200),
        values=(
            (1.0, 0.5, None),
            (0.5, 1.0, -0.25),
            (None, -0.25, 1.0),
        ),
    )


# ---------------------------------------------------------------------------
# colors


def test_diverging_anchor_colors():
    assert diverging_color(0.0) == "#f7f7f7"
    assert diverging_color(1.0) == "#b2182b"
    assert diverging_color(-1.0) == "#2166ac"
    assert diverging_color(5.0) == "#b2182b"  # out of range clamps


def test_diverging_scale_is_monotone_toward_red():
    # the red channel of the hot side falls as values rise
    reds = [int(diverging_color(v)[1:3], 16) for v in (0.0, 0.25, 0.5, 0.75, 1.0)]
    greens = [int(diverging_color(v)[3:5], 16) for v in (0.0, 0.25, 0.5, 0.75, 1.0)]
    assert greens == sorted(greens, reverse=True)
    assert reds[0] > reds[-1]


# ---------------------------------------------------------------------------
# heatmap


def test_heatmap_csv_round_trip(matrix):
    text = heatmap_to_csv(matrix)
    lines = text.strip().splitlines()
    assert lines[0] == "attr_a,attr_b,window_start,window_end,coefficient"
    assert len(lines) == 1 + 9  # k^2 cells
    assert "a,c,100,200," in lines  # undefined cell keeps an empty value field
    back = heatmap_from_csv(text)
    assert back == matrix


def test_heatmap_json_round_trip(matrix):
    text = heatmap_to_json(matrix)
    back = heatmap_from_json(text)
    assert back == matrix
    assert '"values"' in text and "null" in text


def test_heatmap_round_trip_without_window():
    m = CorrelationMatrix(attributes=("x",), window=None, values=((1.0,),))
    assert heatmap_from_csv(heatmap_to_csv(m)) == m
    assert heatmap_from_json(heatmap_to_json(m)) == m


def test_heatmap_csv_header_is_checked():
    with pytest.raises(ValueError, match="header"):
        heatmap_from_csv("a,b,c\n1,2,3\n")


def test_heatmap_svg_structure(matrix):
    svg = heatmap_to_svg(heatmap_data(matrix))
    svg_ok(svg)
    # 9 cells plus the 6x6 hatch swatch inside <defs>
    assert count_rects(svg) == 9 + 1
    assert svg.count('fill="url(#undef)"') == 2
    assert '<pattern id="undef"' in svg
    assert "undefined" in svg  # hover titles spell it out


def test_heatmap_svg_is_deterministic(matrix):
    spec = heatmap_data(matrix)
    assert heatmap_to_svg(spec) == heatmap_to_svg(spec)


# ---------------------------------------------------------------------------
# flagged-frequency series


def test_series_zero_fills_interior_windows():
    rows = [(0, 1), (50, 0), (250, 1)]
    spec = flagged_frequency_series(rows, window_seconds=100)
    assert [p for p in spec.points] == [(0, 1), (100, 0), (200, 1)]
    assert spec.overlay is None


def test_series_overlay_counts_fraud():
    rows = [(0, 1), (10, 0), (110, 0)]
    spec = flagged_frequency_series(rows, 100, labels=[0, 1, 1])
    assert spec.points == ((0, 1), (100, 0))
    assert spec.overlay == ((0, 1), (100, 1))
    csv_text = series_to_csv(spec)
    lines = csv_text.strip().splitlines()
    assert lines[0] == "window_start,flagged_count,fraud_count"
    assert lines[1] == "0,1,1"
    assert lines[2] == "100,0,1"


def test_series_csv_without_overlay():
    spec = flagged_frequency_series([(5, 1)], 60)
    assert series_to_csv(spec) == "window_start,flagged_count\n5,1\n"


def test_series_validation():
    with pytest.raises(ValueError, match="window_seconds"):
        flagged_frequency_series([(0, 1)], 0)
    with pytest.raises(ValueError, match="labels length"):
        flagged_frequency_series([(0, 1)], 10, labels=[1, 0])


def test_series_empty_input():
    spec = flagged_frequency_series([], 60)
    assert spec.points == ()
    svg = series_to_svg(spec)
    svg_ok(svg)
    assert "no data" in svg


def test_series_svg_marks_fraud_windows():
    rows = [(i * 60, 1) for i in range(10)]
    labels = [1 if i == 3 else 0 for i in range(10)]
    svg = series_to_svg(flagged_frequency_series(rows, 60, labels=labels))
    svg_ok(svg)
    assert svg.count("<circle") == 1
    assert "<polyline" in svg
    assert 'stroke="#2166ac"' in svg


def test_series_svg_is_deterministic():
    spec = flagged_frequency_series([(i * 7, i % 2) for i in range(50)], 35)
    assert series_to_svg(spec) == series_to_svg(spec)


# ---------------------------------------------------------------------------
# decision-path rendering


def make_sequence(n_steps):
    steps = tuple(
        SequenceStep(
            tree_index=i,
            feature_name=f"f{i % 3}",
            threshold=0.5 * i,
            branch="left" if i % 2 == 0 else "right",
            delta=0.1 * (1 if i % 2 else -1),
        )
        for i in range(n_steps)
    )
    margin = -0.2 + sum(s.delta for s in steps)
    return ExplanationSequence(
        tx_id="tx000042",
        bias=-0.2,
        steps=steps,
        margin=margin,
        probability=0.5,
    )


@pytest.mark.parametrize("n", [0, 1, 7])
def test_sequence_node_count(n):
    svg = render_sequence(make_sequence(n))
    svg_ok(svg)
    assert count_rects(svg) == n + 1  # bias node plus one per step
    assert "tx000042" in svg


def test_sequence_branch_text():
    svg = render_sequence(make_sequence(2))
    assert "t0: f0 &lt; 0" in svg  # left branch, escaped comparison
    assert "t1: f1 &gt;= 0.5" in svg
    assert "bias = -0.200000" in svg


def test_sequence_rendering_is_deterministic():
    seq = make_sequence(5)
    assert render_sequence(seq) == render_sequence(seq)


# ---------------------------------------------------------------------------
# TIS histogram


def report_of(values):
    return TISReport(
        temporal_feature_set=("x",),
        threshold=0.5,
        per_tx=tuple((f"t{i}", v) for i, v in enumerate(values)),
        flagged_tx_ids=(),
        aggregate=None,
    )


def test_histogram_counts_partition():
    spec = tis_histogram(report_of([0.0, 0.05, 0.5, 0.95, 1.0]), bins=10)
    assert len(spec.edges) == 11
    assert sum(spec.counts) == 5
    assert spec.counts[0] == 2  # 0.0 and 0.05
    assert spec.counts[5] == 1
    assert spec.counts[9] == 2  # 0.95 plus 1.0 in the closed last bin


def test_histogram_single_bin():
    spec = tis_histogram(report_of([0.2, 0.9]), bins=1)
    assert spec.counts == (2,)
    assert spec.edges == (0.0, 1.0)


def test_histogram_validation():
    with pytest.raises(ValueError, match="bins"):
        tis_histogram(report_of([0.5]), bins=0)
    with pytest.raises(ValueError, match="outside"):
        tis_histogram(report_of([1.5]))


def test_histogram_csv():
    spec = tis_histogram(report_of([0.25, 0.25, 0.8]), bins=4)
    text = histogram_to_csv(spec)
    lines = text.strip().splitlines()
    assert lines[0] == "bin_start,bin_end,count"
    assert len(lines) == 5
    assert lines[2] == "0.25,0.5,2"


def test_histogram_svg():
    spec = HistogramSpec(edges=(0.0, 0.5, 1.0), counts=(3, 1))
    svg = histogram_to_svg(spec)
    svg_ok(svg)
    assert count_rects(svg) == 2
    assert "0.0" in svg and "1.0" in svg
    assert histogram_to_svg(spec) == histogram_to_svg(spec)
