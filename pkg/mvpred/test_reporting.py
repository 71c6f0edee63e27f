"""Tests for comparison metrics, aggregation and report rendering"""

import csv
import math

import pytest

from .data_models import ComparisonRow, Coordinate, Prediction, MotionVector, Scheme, Signal
from .errors import StatisticError
from .conftest import make_sample
from .reporting import (
    AggregateCell, aggregate_rows, apply_improvements, coordinate_row, format_number, format_percent,
    relative_improvement, render_html, render_markdown, scheme_rows, summary_rows, write_comparison_csv,
    write_report,
)


def _row(scheme, coordinate=Coordinate.X, mse=1.0, entropy=1.0, bits=100, flat=0, huffman=0, category=3):
    return ComparisonRow(scheme=scheme, category=category, coordinate=coordinate, samples=10, mse=mse,
                         entropy=entropy, bits=bits, signal_bits_flat=flat, signal_bits_huffman=huffman)


def test_relative_improvement():
    assert relative_improvement(3.0, 4.0) == pytest.approx(0.25)
    assert relative_improvement(5.0, 4.0) == pytest.approx(-0.25)
    assert relative_improvement(1.0, 0.0) is None


def test_coordinate_row_metrics():
    row, hist = coordinate_row(Scheme.BEST, 3, Coordinate.X, [0, 0, 1, -1],
                               signals=[Signal.MEDIAN, Signal.MEDIAN, Signal.LOWER, Signal.HIGHER])
    assert row.mse == pytest.approx(0.5)
    assert row.entropy == pytest.approx(1.5)
    assert row.bits == 6
    assert row.signal_bits_flat == 6
    assert row.signal_bits_huffman == 6
    assert row.bits_with_flat_signaling == 12
    assert hist.counts == {-1: 1, 0: 2, 1: 1}


def test_coordinate_row_needs_residuals():
    with pytest.raises(StatisticError):
        coordinate_row(Scheme.MEDIAN, 3, Coordinate.X, [])


def test_scheme_rows_report_raw_mse_for_regression():
    samples = [make_sample([(1, 1), (1, 1)], (2, 2)), make_sample([(1, 1), (1, 1)], (3, 1))]
    predictions = [
        Prediction(pmv=MotionVector(2, 2), residual=(0, 0), raw=(2.4, 1.6)),
        Prediction(pmv=MotionVector(3, 1), residual=(0, 0), raw=(3.0, 1.0)),
    ]
    row_x, row_y = (row for row, _ in scheme_rows(Scheme.REGRESSOR, 2, samples, predictions))
    assert row_x.mse == 0.0
    assert row_x.mse_raw == pytest.approx(0.4 ** 2 / 2)
    assert row_y.mse_raw == pytest.approx(0.4 ** 2 / 2)
    assert row_x.signal_bits_flat == 0


def test_improvements_are_relative_to_median():
    rows = apply_improvements([
        _row(Scheme.MEDIAN, mse=4.0, entropy=2.0, bits=200),
        _row(Scheme.BEST, mse=2.0, entropy=1.5, bits=150, flat=30, huffman=20),
        _row(Scheme.MEDIAN, Coordinate.Y, mse=0.0, bits=0, entropy=0.0),
        _row(Scheme.BEST, Coordinate.Y, mse=0.0, bits=0, entropy=0.0),
    ])
    best_x = rows[1]
    assert best_x.improvement['mse'] == pytest.approx(0.5)
    assert best_x.improvement['entropy'] == pytest.approx(0.25)
    assert best_x.improvement['bits'] == pytest.approx(0.25)
    assert best_x.improvement['bits_flat'] == pytest.approx(0.1)
    assert best_x.improvement['bits_huffman'] == pytest.approx(0.15)
    assert rows[0].improvement['mse'] == pytest.approx(0.0)
    assert rows[3].improvement['mse'] is None


def test_summary_totals_both_coordinates():
    rows = [
        _row(Scheme.MEDIAN, Coordinate.X, bits=100), _row(Scheme.MEDIAN, Coordinate.Y, bits=100),
        _row(Scheme.BEST, Coordinate.X, bits=60, flat=20, huffman=15),
        _row(Scheme.BEST, Coordinate.Y, bits=60, flat=20, huffman=15),
    ]
    summary = {row.scheme: row for row in summary_rows(rows)}
    assert summary[Scheme.BEST].bits == 120
    assert summary[Scheme.BEST].bits_flat == 160
    assert summary[Scheme.BEST].saving_flat == pytest.approx(0.2)
    assert summary[Scheme.BEST].saving_huffman == pytest.approx(0.25)
    assert summary[Scheme.MEDIAN].saving_flat == pytest.approx(0.0)


def test_aggregate_of_identical_runs_has_zero_spread():
    run = [_row(Scheme.MEDIAN, mse=2.5)]
    (row,) = aggregate_rows([run, run, run])
    assert row.observations == 3
    assert row.metrics['mse'].mean == pytest.approx(2.5)
    assert row.metrics['mse'].std == 0.0


def test_aggregate_two_point_statistics():
    (row,) = aggregate_rows([[_row(Scheme.MEDIAN, mse=2.0)], [_row(Scheme.MEDIAN, mse=4.0)]])
    assert row.metrics['mse'].mean == pytest.approx(3.0)
    assert row.metrics['mse'].std == pytest.approx(math.sqrt(2))


def test_formatting():
    assert format_percent(0.1234) == '12.3%'
    assert format_percent(None) == 'n/a'
    assert format_number(1.23456) == '1.235'
    assert format_number(None) == 'n/a'
    assert AggregateCell(mean=3.0, std=1.41421).formatted() == '3.000 ± 1.414'


def test_comparison_csv(tmp_path):
    rows = apply_improvements([_row(Scheme.MEDIAN), _row(Scheme.BEST, mse=0.5)])
    path = tmp_path / 'comparison.csv'
    write_comparison_csv(path, rows)
    with open(path, newline='') as file:
        records = list(csv.DictReader(file))
    assert [r['scheme'] for r in records] == ['median', 'best']
    assert float(records[1]['improvement_mse']) == pytest.approx(0.5)
    assert records[0]['mse_raw'] == ''


def _report_context(rows):
    return dict(
        settings={'Seed': '7'},
        status='ok',
        categories=[{'category': 3, 'train': 50, 'test': 10, 'rows': rows}],
        summary=summary_rows(rows),
        classifier=[],
        statistics=[],
    )


def test_report_markdown_lists_every_scheme():
    rows = apply_improvements([_row(Scheme.MEDIAN), _row(Scheme.BEST, mse=0.5)])
    text = render_markdown('report.md.j2', **_report_context(rows))
    assert '| Seed | 7 |' in text
    assert '## Category 3 (3 neighbors)' in text
    assert '| best | Δx | 0.500 |' in text
    assert '50.0%' in text


def test_no_samples_report():
    text = render_markdown('report.md.j2', settings={}, status='no_samples', categories=[], summary=[],
                           classifier=[], statistics=[])
    assert 'no_samples' in text
    assert '## Total bits' not in text


def test_html_companion(tmp_path):
    rows = apply_improvements([_row(Scheme.MEDIAN)])
    md_path, html_path = write_report(tmp_path, 'report', 'report.md.j2', **_report_context(rows))
    assert md_path.read_text().startswith('# Motion vector prediction report')
    html = html_path.read_text()
    assert '<table>' in html
    assert '<h1>' in html


def test_render_html_wraps_document():
    html = render_html('# Title\n\ntext\n', title='run')
    assert html.startswith('<!DOCTYPE html>')
    assert '<title>run</title>' in html
