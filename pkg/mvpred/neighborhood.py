"""
Neighbor samples

Turns motion fields into samples of (left, top-left, top) neighbor vectors
plus ground truth, and provides the median and best-neighbor PMVs, residual
statistics, network input encoding and the source-disjoint dataset split.
"""

import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .data_models import (
    Coordinate,
    MedianResult,
    MotionStatistics,
    MotionVector,
    MVField,
    NeighborSample,
    NeighborTag,
    NormalizationConstants,
)
from .errors import CategoryError, DimensionError, FormatError, SplitError, StatisticError

logger = logging.getLogger(__name__)

NORM_SCALE = 0.8
ARG_BASE = 0.85
ARG_STEP = 0.05
DATASET_CSV_HEADER = ['source', 'cat', 'ax', 'ay', 'bx', 'by', 'cx', 'cy', 'gtx', 'gty']

# (tag, column offset, row offset) in A, B, C order
NEIGHBOR_OFFSETS = (
    (NeighborTag.A, -1, 0),
    (NeighborTag.B, -1, -1),
    (NeighborTag.C, 0, -1),
)


def extract_samples(fields: Sequence[MVField], source_id: str) -> List[NeighborSample]:
    """Collect one sample per MC block with non-zero motion and at least one MC neighbor"""
    if fields:
        reference = fields[0]
        for field in fields[1:]:
            if (field.block_size, field.cols, field.rows) != (reference.block_size, reference.cols, reference.rows):
                raise DimensionError(
                    f"Field {field.frame_index} grid {field.cols}x{field.rows}@{field.block_size} "
                    f"differs from {reference.cols}x{reference.rows}@{reference.block_size}"
                )

    samples = []
    for field in fields:
        for row in range(field.rows):
            for col in range(field.cols):
                gt = field.mv_at(col, row)
                if gt is None or gt.is_zero():
                    continue
                neighbors = []
                for tag, col_offset, row_offset in NEIGHBOR_OFFSETS:
                    mv = field.mv_at(col + col_offset, row + row_offset)
                    if mv is not None:
                        neighbors.append((tag, mv))
                if neighbors:
                    samples.append(NeighborSample(gt=gt, neighbors=tuple(neighbors), source_id=source_id))

    logger.info(f"Extracted {len(samples)} samples from {len(fields)} fields of '{source_id}'")
    return samples


def _median_component(values: Sequence[int]) -> Tuple[int, int]:
    middle = sorted(values)[1]
    return middle, values.index(middle)


def _average_toward_zero(a: int, b: int) -> int:
    total = a + b
    half = abs(total) // 2
    return half if total >= 0 else -half


def median_pmv(sample: NeighborSample) -> MedianResult:
    """Component-wise median of three neighbors; average of two; the lone vector of one"""
    vectors = sample.vectors
    if sample.category == 3:
        x, arg_x = _median_component([mv.dx for mv in vectors])
        y, arg_y = _median_component([mv.dy for mv in vectors])
        return MedianResult(pmv=MotionVector(x, y), arg_x=arg_x, arg_y=arg_y)
    if sample.category == 2:
        first, second = vectors
        pmv = MotionVector(_average_toward_zero(first.dx, second.dx),
                           _average_toward_zero(first.dy, second.dy))
        return MedianResult(pmv=pmv, arg_x=0, arg_y=0)
    if sample.category == 1:
        return MedianResult(pmv=vectors[0], arg_x=0, arg_y=0)
    raise CategoryError(f"Median needs 1 to 3 neighbors, got {sample.category}")


def _select_closest(values: Sequence[int], target: int, median_arg: int) -> int:
    distances = [abs(v - target) for v in values]
    smallest = min(distances)
    if distances[median_arg] == smallest:
        return median_arg
    return distances.index(smallest)


def best_pmv(sample: NeighborSample, median: Optional[MedianResult] = None) -> Tuple[MotionVector, int, int]:
    """Per-coordinate neighbor closest to the ground truth.

    Ties go to the median's neighbor when it is among the closest, otherwise to
    the lowest index. x and y may come from different neighbors.
    """
    if sample.category != 3:
        raise CategoryError(f"Best PMV needs three neighbors, got {sample.category}")
    median = median or median_pmv(sample)
    vectors = sample.vectors
    sel_x = _select_closest([mv.dx for mv in vectors], sample.gt.dx, median.arg_x)
    sel_y = _select_closest([mv.dy for mv in vectors], sample.gt.dy, median.arg_y)
    return MotionVector(vectors[sel_x].dx, vectors[sel_y].dy), sel_x, sel_y


def residual(pmv: MotionVector, gt: MotionVector) -> Tuple[int, int]:
    return pmv - gt


def mse(residuals: Sequence[Tuple[float, float]]) -> Tuple[float, float, float]:
    """(mse_x, mse_y, mse_x + mse_y) over a list of residual pairs"""
    if len(residuals) == 0:
        raise StatisticError("MSE of an empty residual list is undefined")
    values = np.asarray(residuals, dtype=np.float64).reshape(-1, 2)
    mse_x = float(np.mean(values[:, 0] ** 2))
    mse_y = float(np.mean(values[:, 1] ** 2))
    return mse_x, mse_y, mse_x + mse_y


def fit_normalization(samples: Iterable[NeighborSample]) -> NormalizationConstants:
    """Max |dx|, |dy| over training neighbors and ground truth (at least 1)"""
    max_x = max_y = 0
    for sample in samples:
        for mv in sample.vectors + [sample.gt]:
            max_x = max(max_x, abs(mv.dx))
            max_y = max(max_y, abs(mv.dy))
    return NormalizationConstants(max_abs_x=max(max_x, 1), max_abs_y=max(max_y, 1))


def _scale(value: int, bound: int) -> float:
    return float(np.clip(NORM_SCALE * value / bound, -NORM_SCALE, NORM_SCALE))


def encode_arg(arg: int) -> float:
    return arg * ARG_STEP + ARG_BASE


def normalize_sample(sample: NeighborSample, consts: NormalizationConstants,
                     median: Optional[MedianResult] = None, include_args: bool = True) -> np.ndarray:
    """Network input for a three-neighbor sample.

    Six scaled coordinates in A, B, C order, followed by the encoded median
    arguments when ``include_args`` (classifier input).
    """
    if sample.category != 3:
        raise CategoryError(f"Network input needs three neighbors, got {sample.category}")
    values = []
    for mv in sample.vectors:
        values.append(_scale(mv.dx, consts.max_abs_x))
        values.append(_scale(mv.dy, consts.max_abs_y))
    if include_args:
        median = median or median_pmv(sample)
        values.append(encode_arg(median.arg_x))
        values.append(encode_arg(median.arg_y))
    return np.asarray(values, dtype=np.float64)


def regression_input(sample: NeighborSample, consts: NormalizationConstants) -> np.ndarray:
    """Six scaled coordinates by tag; an absent neighbor of a two-neighbor sample is zero-filled"""
    if sample.category not in (2, 3):
        raise CategoryError(f"Regression input needs two or three neighbors, got {sample.category}")
    values = []
    for tag, _, _ in NEIGHBOR_OFFSETS:
        mv = sample.neighbor(tag)
        if mv is None:
            values.extend((0.0, 0.0))
        else:
            values.append(_scale(mv.dx, consts.max_abs_x))
            values.append(_scale(mv.dy, consts.max_abs_y))
    return np.asarray(values, dtype=np.float64)


def regression_target(sample: NeighborSample, consts: NormalizationConstants, coordinate: Coordinate) -> float:
    """Ground truth on the input scale, unclamped"""
    return NORM_SCALE * sample.gt.component(coordinate) / consts.for_coordinate(coordinate)


def class_label(sample: NeighborSample, median: Optional[MedianResult] = None) -> Tuple[int, int]:
    """Classifier targets: the best-PMV selection indices"""
    _, sel_x, sel_y = best_pmv(sample, median)
    return sel_x, sel_y


def split_dataset(samples: Sequence[NeighborSample], train_quota: int = 50_000, test_quota: int = 2_000,
                  seed: int = 0) -> Tuple[List[NeighborSample], List[NeighborSample]]:
    """Source-disjoint train/test split.

    Source ids are shuffled with the seed and handed to the test side until
    the test quota is covered, always keeping one for training. Both sides
    are then truncated to their quotas.
    """
    by_source: Dict[str, List[NeighborSample]] = {}
    for sample in samples:
        by_source.setdefault(sample.source_id, []).append(sample)
    if len(by_source) < 2:
        raise SplitError(f"Need at least two sources for a disjoint split, got {len(by_source)}")

    rng = np.random.default_rng(seed)
    source_ids = sorted(by_source)
    order = [source_ids[i] for i in rng.permutation(len(source_ids))]

    test_ids = []
    test_supply = 0
    for source_id in order[:-1]:
        if test_supply >= test_quota:
            break
        test_ids.append(source_id)
        test_supply += len(by_source[source_id])
    train_ids = [source_id for source_id in order if source_id not in test_ids]

    train = [s for source_id in train_ids for s in by_source[source_id]]
    test = [s for source_id in test_ids for s in by_source[source_id]]

    if len(train) < train_quota:
        logger.warning(f"Only {len(train)} training samples available for quota {train_quota}")
    if len(test) < test_quota:
        logger.warning(f"Only {len(test)} test samples available for quota {test_quota}")

    train, test = train[:train_quota], test[:test_quota]
    logger.info(f"Split {len(train)} train samples from {len(train_ids)} sources, "
                f"{len(test)} test samples from {len(test_ids)} sources")
    return train, test


def filter_category(samples: Iterable[NeighborSample], category: int) -> List[NeighborSample]:
    return [sample for sample in samples if sample.category == category]


def mv_statistics(samples: Sequence[NeighborSample], source: str) -> MotionStatistics:
    """Mean and spread of the ground-truth vectors of a dataset, and of every neighbor vector it holds"""
    if not samples:
        raise StatisticError(f"No samples in '{source}' to describe")
    gt = np.asarray([(s.gt.dx, s.gt.dy) for s in samples], dtype=np.float64)
    neighbors = np.asarray([(mv.dx, mv.dy) for s in samples for mv in s.vectors], dtype=np.float64)
    return MotionStatistics(
        source=source,
        samples=len(samples),
        mean_dx=float(gt[:, 0].mean()),
        mean_dy=float(gt[:, 1].mean()),
        std_dx=float(gt[:, 0].std()),
        std_dy=float(gt[:, 1].std()),
        mean_abs_dx=float(np.abs(gt[:, 0]).mean()),
        mean_abs_dy=float(np.abs(gt[:, 1]).mean()),
        neighbors=len(neighbors),
        neighbor_mean_dx=float(neighbors[:, 0].mean()),
        neighbor_mean_dy=float(neighbors[:, 1].mean()),
        neighbor_std_dx=float(neighbors[:, 0].std()),
        neighbor_std_dy=float(neighbors[:, 1].std()),
    )


def write_dataset_csv(path: Union[str, Path], samples: Iterable[NeighborSample]) -> int:
    count = 0
    with open(path, 'w', newline='', encoding='utf-8') as file:
        writer = csv.writer(file)
        writer.writerow(DATASET_CSV_HEADER)
        for sample in samples:
            row = [sample.source_id, sample.category]
            for tag, _, _ in NEIGHBOR_OFFSETS:
                mv = sample.neighbor(tag)
                row.extend(('', '') if mv is None else (mv.dx, mv.dy))
            row.extend((sample.gt.dx, sample.gt.dy))
            writer.writerow(row)
            count += 1
    return count


def read_dataset_csv(path: Union[str, Path]) -> List[NeighborSample]:
    samples = []
    with open(path, 'r', newline='', encoding='utf-8') as file:
        reader = csv.DictReader(file)
        if reader.fieldnames != DATASET_CSV_HEADER:
            raise FormatError(f"{path}: expected header {','.join(DATASET_CSV_HEADER)}", key='header')
        for line_number, row in enumerate(reader, start=2):
            try:
                neighbors = []
                for tag, prefix in ((NeighborTag.A, 'a'), (NeighborTag.B, 'b'), (NeighborTag.C, 'c')):
                    if row[f'{prefix}x'] != '':
                        neighbors.append((tag, MotionVector(int(row[f'{prefix}x']), int(row[f'{prefix}y']))))
                sample = NeighborSample(
                    gt=MotionVector(int(row['gtx']), int(row['gty'])),
                    neighbors=tuple(neighbors),
                    source_id=row['source'],
                )
            except (TypeError, ValueError) as e:
                raise FormatError(f"{path}: bad sample at line {line_number}: {e}") from None
            if sample.category != int(row['cat']):
                raise FormatError(f"{path}: line {line_number} declares category {row['cat']} "
                                  f"but has {sample.category} neighbors", key='cat')
            samples.append(sample)
    return samples
