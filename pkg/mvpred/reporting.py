"""
Comparison metrics and report rendering

Per scheme, category and coordinate: residual MSE, entropy and Huffman bits,
signaling costs and improvement relative to the median predictor. Reports are
written as CSV plus a Markdown document (jinja2) with an HTML companion
(markdown2).
"""

import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import markdown2
import numpy as np
from jinja2 import Environment, FileSystemLoader, StrictUndefined
from pydantic import BaseModel, Field

from .data_models import ComparisonRow, Coordinate, MotionStatistics, NeighborSample, Prediction, Scheme, Signal
from .entropy_coding import SymbolHistogram, build_huffman, code_cost, entropy, histogram, signaling_cost
from .errors import StatisticError

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).parent / 'templates'
IMPROVEMENT_METRICS = ('mse', 'entropy', 'bits', 'bits_flat', 'bits_huffman')
AGGREGATE_METRICS = ('mse', 'entropy', 'bits')
COMPARISON_CSV_HEADER = [
    'scheme', 'category', 'coordinate', 'samples', 'mse', 'mse_raw', 'entropy', 'bits',
    'signal_bits_flat', 'signal_bits_huffman', *(f'improvement_{m}' for m in IMPROVEMENT_METRICS),
]


class SummaryRow(BaseModel):
    """Total x + y bits of one scheme in one category"""
    scheme: Scheme
    category: int
    samples: int
    bits: int = Field(..., description="Residual bits, signaling excluded")
    bits_flat: int = Field(..., description="Residual bits plus flat signaling")
    bits_huffman: int = Field(..., description="Residual bits plus Huffman-coded signaling")
    saving_flat: Optional[float] = None
    saving_huffman: Optional[float] = None


class ClassifierSummary(BaseModel):
    """Accuracy of one coordinate's classifier"""
    coordinate: Coordinate
    val_accuracy: Optional[float] = None
    test_accuracy: float
    majority_frequency: float = Field(..., description="Share of the most common test label")
    epochs_run: int = 0


class AggregateCell(BaseModel):
    mean: float
    std: float

    def formatted(self, digits: int = 3) -> str:
        return f"{self.mean:.{digits}f} ± {self.std:.{digits}f}"


class AggregateRow(BaseModel):
    """Mean ± sample std of one scheme/category/coordinate across datasets"""
    scheme: Scheme
    category: int
    coordinate: Coordinate
    observations: int
    metrics: Dict[str, AggregateCell]


def relative_improvement(value: float, baseline: float) -> Optional[float]:
    """1 - value / baseline; undefined against a zero baseline"""
    if baseline == 0:
        return None
    return 1.0 - value / baseline


def coordinate_row(scheme: Scheme, category: int, coordinate: Coordinate, residuals: Sequence[int],
                   signals: Optional[Sequence[Signal]] = None,
                   raw_residuals: Optional[Sequence[float]] = None) -> Tuple[ComparisonRow, SymbolHistogram]:
    """Metrics of one coordinate's residuals, with the histogram they were coded from"""
    if len(residuals) == 0:
        raise StatisticError(f"No {scheme.value} residuals for category {category}")
    values = np.asarray(residuals, dtype=np.float64)
    hist = histogram(int(v) for v in residuals)
    coded = [s for s in (signals or []) if Signal(s) is not Signal.NONE]
    row = ComparisonRow(
        scheme=scheme,
        category=category,
        coordinate=coordinate,
        samples=len(residuals),
        mse=float(np.mean(values ** 2)),
        mse_raw=float(np.mean(np.asarray(raw_residuals) ** 2)) if raw_residuals is not None else None,
        entropy=entropy(hist),
        bits=code_cost(hist, build_huffman(hist)),
        signal_bits_flat=signaling_cost(coded, 'flat'),
        signal_bits_huffman=signaling_cost(coded, 'huffman'),
    )
    return row, hist


def scheme_rows(scheme: Scheme, category: int, samples: Sequence[NeighborSample],
                predictions: Sequence[Prediction]) -> List[Tuple[ComparisonRow, SymbolHistogram]]:
    """x and y comparison rows for one scheme over one category's test samples"""
    scheme = Scheme(scheme)
    raw = None
    if predictions and predictions[0].raw is not None:
        raw = [(p.raw[0] - s.gt.dx, p.raw[1] - s.gt.dy) for s, p in zip(samples, predictions)]
    return [
        coordinate_row(scheme, category, Coordinate.X, [p.residual[0] for p in predictions],
                       [p.signal_x for p in predictions], [r[0] for r in raw] if raw else None),
        coordinate_row(scheme, category, Coordinate.Y, [p.residual[1] for p in predictions],
                       [p.signal_y for p in predictions], [r[1] for r in raw] if raw else None),
    ]


def apply_improvements(rows: Sequence[ComparisonRow]) -> List[ComparisonRow]:
    """Fill in 1 - scheme/median per metric against the median row of the same category and coordinate"""
    baselines = {
        (row.category, row.coordinate): row
        for row in rows if row.scheme is Scheme.MEDIAN
    }
    updated = []
    for row in rows:
        base = baselines.get((row.category, row.coordinate))
        if base is None:
            updated.append(row)
            continue
        improvement = {
            'mse': relative_improvement(row.mse, base.mse),
            'entropy': relative_improvement(row.entropy, base.entropy),
            'bits': relative_improvement(row.bits, base.bits),
            'bits_flat': relative_improvement(row.bits_with_flat_signaling, base.bits),
            'bits_huffman': relative_improvement(row.bits_with_huffman_signaling, base.bits),
        }
        updated.append(row.model_copy(update={'improvement': improvement}))
    return updated


def summary_rows(rows: Sequence[ComparisonRow]) -> List[SummaryRow]:
    """Total x + y bits per scheme and category, with savings against the median"""
    totals: Dict[Tuple[int, Scheme], Dict[str, int]] = {}
    for row in rows:
        entry = totals.setdefault((row.category, row.scheme),
                                  {'samples': row.samples, 'bits': 0, 'bits_flat': 0, 'bits_huffman': 0})
        entry['bits'] += row.bits
        entry['bits_flat'] += row.bits_with_flat_signaling
        entry['bits_huffman'] += row.bits_with_huffman_signaling

    summary = []
    for (category, scheme), entry in totals.items():
        median = totals.get((category, Scheme.MEDIAN))
        summary.append(SummaryRow(
            scheme=scheme,
            category=category,
            samples=entry['samples'],
            bits=entry['bits'],
            bits_flat=entry['bits_flat'],
            bits_huffman=entry['bits_huffman'],
            saving_flat=relative_improvement(entry['bits_flat'], median['bits']) if median else None,
            saving_huffman=relative_improvement(entry['bits_huffman'], median['bits']) if median else None,
        ))
    return summary


def aggregate_rows(runs: Sequence[Sequence[ComparisonRow]]) -> List[AggregateRow]:
    """Mean ± sample standard deviation (ddof=1) of each metric across runs"""
    grouped: Dict[Tuple[Scheme, int, Coordinate], List[ComparisonRow]] = {}
    for rows in runs:
        for row in rows:
            grouped.setdefault((row.scheme, row.category, row.coordinate), []).append(row)

    aggregated = []
    for (scheme, category, coordinate), group in grouped.items():
        metrics = {}
        for metric in AGGREGATE_METRICS:
            values = np.asarray([getattr(row, metric) for row in group], dtype=np.float64)
            std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
            metrics[metric] = AggregateCell(mean=float(values.mean()), std=std)
        aggregated.append(AggregateRow(scheme=scheme, category=category, coordinate=coordinate,
                                       observations=len(group), metrics=metrics))
    return aggregated


def _optional(value) -> str:
    return '' if value is None else repr(value) if isinstance(value, float) else str(value)


def write_comparison_csv(path: Union[str, Path], rows: Iterable[ComparisonRow]):
    with open(path, 'w', newline='', encoding='utf-8') as file:
        writer = csv.writer(file)
        writer.writerow(COMPARISON_CSV_HEADER)
        for row in rows:
            writer.writerow([
                row.scheme.value, row.category, row.coordinate.value, row.samples,
                repr(row.mse), _optional(row.mse_raw), repr(row.entropy), row.bits,
                row.signal_bits_flat, row.signal_bits_huffman,
                *(_optional(row.improvement.get(m)) for m in IMPROVEMENT_METRICS),
            ])


def write_summary_csv(path: Union[str, Path], rows: Iterable[SummaryRow]):
    with open(path, 'w', newline='', encoding='utf-8') as file:
        writer = csv.writer(file)
        writer.writerow(['scheme', 'category', 'samples', 'bits', 'bits_flat', 'bits_huffman',
                         'saving_flat', 'saving_huffman'])
        for row in rows:
            writer.writerow([row.scheme.value, row.category, row.samples, row.bits, row.bits_flat,
                             row.bits_huffman, _optional(row.saving_flat), _optional(row.saving_huffman)])


def write_statistics_csv(path: Union[str, Path], stats: Iterable[MotionStatistics]):
    fields = list(MotionStatistics.model_fields)
    with open(path, 'w', newline='', encoding='utf-8') as file:
        writer = csv.writer(file)
        writer.writerow(fields)
        for entry in stats:
            writer.writerow([_optional(getattr(entry, name)) for name in fields])


def write_histograms_csv(path: Union[str, Path],
                         histograms: Dict[Tuple[Scheme, int, Coordinate], SymbolHistogram]):
    with open(path, 'w', newline='', encoding='utf-8') as file:
        writer = csv.writer(file)
        writer.writerow(['scheme', 'category', 'coordinate', 'residual', 'count'])
        for (scheme, category, coordinate), hist in histograms.items():
            for symbol, count in sorted(hist.counts.items()):
                writer.writerow([scheme.value, category, coordinate.value, symbol, count])


def write_aggregate_csv(path: Union[str, Path], rows: Iterable[AggregateRow]):
    """Columns follow the MSE, Entropy, # Bits order of the comparison tables"""
    with open(path, 'w', newline='', encoding='utf-8') as file:
        writer = csv.writer(file)
        writer.writerow(['scheme', 'category', 'coordinate', 'observations',
                         *(f'{m}_{part}' for m in AGGREGATE_METRICS for part in ('mean', 'std'))])
        for row in rows:
            writer.writerow([row.scheme.value, row.category, row.coordinate.value, row.observations,
                             *(repr(getattr(row.metrics[m], part)) for m in AGGREGATE_METRICS
                               for part in ('mean', 'std'))])


def format_percent(value: Optional[float]) -> str:
    if value is None:
        return 'n/a'
    return f"{100.0 * value:.1f}%"


def format_number(value: Optional[float], digits: int = 3) -> str:
    if value is None:
        return 'n/a'
    return f"{value:.{digits}f}"


def _environment() -> Environment:
    env = Environment(
        loader=FileSystemLoader(str(TEMPLATE_DIR)),
        undefined=StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )
    env.filters['pct'] = format_percent
    env.filters['num'] = format_number
    return env


def render_markdown(template_name: str, **context) -> str:
    return _environment().get_template(template_name).render(**context)


def render_html(markdown_text: str, title: str = 'mvpred report') -> str:
    """HTML companion of a Markdown report"""
    body = markdown2.markdown(markdown_text, extras=['tables', 'fenced-code-blocks'])
    return (
        '<!DOCTYPE html>\n<html>\n<head>\n<meta charset="utf-8">\n'
        f'<title>{title}</title>\n</head>\n<body>\n{body}</body>\n</html>\n'
    )


def write_report(directory: Union[str, Path], stem: str, template_name: str, **context) -> List[Path]:
    """Render ``template_name`` to <stem>.md and <stem>.html"""
    directory = Path(directory)
    markdown_text = render_markdown(template_name, **context)
    md_path = directory / f'{stem}.md'
    html_path = directory / f'{stem}.html'
    md_path.write_text(markdown_text, encoding='utf-8')
    html_path.write_text(render_html(markdown_text), encoding='utf-8')
    return [md_path, html_path]
