"""
Ground-truth motion estimation

Exhaustive block matching (SAD) over a clipped ±search_range window, the
SAD-threshold intra proxy, frame-stride estimation for the fast-forward
regime, and the per-block CSV interchange format.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from itertools import islice
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from .data_models import LumaFrame, MVField
from .errors import ConfigurationError, DimensionError, FormatError

logger = logging.getLogger(__name__)

VALID_BLOCK_SIZES = (4, 8, 16)
FIELD_CSV_HEADER = ['frame', 'col', 'row', 'mc', 'dx', 'dy', 'sad']


def candidate_order(search_range: int) -> List[Tuple[int, int]]:
    """All displacements in tie-break order: |dx|+|dy|, then dy, then dx"""
    candidates = [
        (dx, dy)
        for dy in range(-search_range, search_range + 1)
        for dx in range(-search_range, search_range + 1)
    ]
    candidates.sort(key=lambda c: (abs(c[0]) + abs(c[1]), c[1], c[0]))
    return candidates


def full_search(current: LumaFrame, reference: LumaFrame, block_size: int = 16,
                search_range: int = 16) -> MVField:
    """Exhaustive SAD block matching of ``current`` against ``reference``.

    The reference block for the block at (x, y) is at (x + dx, y + dy) and must
    lie entirely inside the reference frame. Candidates are visited in
    tie-break order and replaced only on a strictly smaller SAD, so ties go to
    the smallest |dx|+|dy|, then smaller dy, then smaller dx.
    """
    if (current.width, current.height) != (reference.width, reference.height):
        raise DimensionError(
            f"Frame {current.index} is {current.width}x{current.height} but reference "
            f"{reference.index} is {reference.width}x{reference.height}"
        )
    if block_size not in VALID_BLOCK_SIZES:
        raise ConfigurationError(f"Block size must be one of {VALID_BLOCK_SIZES}, got {block_size}")
    if block_size > current.width or block_size > current.height:
        raise ConfigurationError(
            f"Block size {block_size} exceeds frame {current.width}x{current.height}"
        )
    if search_range < 1:
        raise ConfigurationError(f"Search range must be at least 1, got {search_range}")

    width, height = current.width, current.height
    cols, rows = width // block_size, height // block_size
    crop_h, crop_w = rows * block_size, cols * block_size
    r = search_range

    cur = current.samples[:crop_h, :crop_w].astype(np.int32)
    padded = np.zeros((height + 2 * r, width + 2 * r), dtype=np.int32)
    padded[r:r + height, r:r + width] = reference.samples

    xs = np.arange(cols) * block_size
    ys = np.arange(rows) * block_size

    best_sad = np.full((rows, cols), np.iinfo(np.int64).max, dtype=np.int64)
    best_dx = np.zeros((rows, cols), dtype=np.int64)
    best_dy = np.zeros((rows, cols), dtype=np.int64)

    for dx, dy in candidate_order(r):
        col_ok = (xs + dx >= 0) & (xs + dx + block_size <= width)
        row_ok = (ys + dy >= 0) & (ys + dy + block_size <= height)
        valid = row_ok[:, None] & col_ok[None, :]
        if not valid.any():
            continue

        shifted = padded[r + dy:r + dy + crop_h, r + dx:r + dx + crop_w]
        sad = np.abs(cur - shifted).reshape(rows, block_size, cols, block_size).sum(axis=(1, 3))
        better = valid & (sad < best_sad)
        best_sad[better] = sad[better]
        best_dx[better] = dx
        best_dy[better] = dy

    return MVField(
        frame_index=current.index,
        block_size=block_size,
        cols=cols,
        rows=rows,
        mc=np.ones((rows, cols), dtype=bool),
        dx=best_dx,
        dy=best_dy,
        sad=best_sad,
    )


def classify_blocks(field: MVField, sad_threshold_per_pel: float) -> MVField:
    """Mark blocks with SAD above threshold × block area as non motion-compensated"""
    limit = sad_threshold_per_pel * field.block_size ** 2
    mc = field.mc & (field.sad <= limit)
    return MVField(
        frame_index=field.frame_index,
        block_size=field.block_size,
        cols=field.cols,
        rows=field.rows,
        mc=mc,
        dx=np.where(mc, field.dx, 0),
        dy=np.where(mc, field.dy, 0),
        sad=field.sad.copy(),
    )


def _strided_pairs(frames: Iterable[LumaFrame], stride: int) -> Iterator[Tuple[LumaFrame, LumaFrame]]:
    """(frame[k·stride], frame[(k-1)·stride]) pairs, holding one previous frame"""
    previous = None
    for position, frame in enumerate(frames):
        if position % stride:
            continue
        if previous is not None:
            yield frame, previous
        previous = frame


def estimate_sequence(frames: Iterable[LumaFrame], stride: int = 1, block_size: int = 16,
                      search_range: Optional[int] = None, sad_threshold_per_pel: Optional[float] = None,
                      workers: int = 1, progress: bool = False) -> List[MVField]:
    """Motion fields between every pair of frames ``stride`` apart.

    Fields carry the current frame's index. When ``sad_threshold_per_pel`` is
    given the fields are also passed through :func:`classify_blocks`. Output
    is the same for any number of workers.
    """
    if stride < 1:
        raise ConfigurationError(f"Stride must be at least 1, got {stride}")
    if search_range is None:
        search_range = 16 if stride == 1 else 48

    def estimate(pair: Tuple[LumaFrame, LumaFrame]) -> MVField:
        current, reference = pair
        field = full_search(current, reference, block_size, search_range)
        if sad_threshold_per_pel is not None:
            field = classify_blocks(field, sad_threshold_per_pel)
        return field

    pairs = _strided_pairs(frames, stride)
    if progress:
        pairs = tqdm(pairs, desc="Motion search", unit="pair")

    fields: List[MVField] = []
    if workers <= 1:
        fields.extend(estimate(pair) for pair in pairs)
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            while True:
                chunk = list(islice(pairs, workers * 2))
                if not chunk:
                    break
                fields.extend(executor.map(estimate, chunk))

    if not fields:
        logger.warning(f"Fewer than 2 usable frames at stride {stride}; no motion fields produced")
    else:
        logger.info(f"Estimated {len(fields)} motion fields (block {block_size}, range ±{search_range}, stride {stride})")
    return fields


def write_fields_csv(path: Union[str, Path], fields: Iterable[MVField]) -> int:
    """Write one row per block; dx/dy are empty for non-MC blocks. Returns rows written."""
    rows_written = 0
    with open(path, 'w', newline='', encoding='utf-8') as file:
        writer = csv.writer(file)
        writer.writerow(FIELD_CSV_HEADER)
        for field in fields:
            for row in range(field.rows):
                for col in range(field.cols):
                    mc = bool(field.mc[row, col])
                    writer.writerow([
                        field.frame_index, col, row, int(mc),
                        int(field.dx[row, col]) if mc else '',
                        int(field.dy[row, col]) if mc else '',
                        int(field.sad[row, col]),
                    ])
                    rows_written += 1
    return rows_written


def read_fields_csv(path: Union[str, Path], block_size: int = 16) -> List[MVField]:
    """Read fields written by :func:`write_fields_csv`, ordered by frame index"""
    records: Dict[int, Dict[Tuple[int, int], Tuple[bool, int, int, int]]] = {}
    with open(path, 'r', newline='', encoding='utf-8') as file:
        reader = csv.DictReader(file)
        if reader.fieldnames != FIELD_CSV_HEADER:
            raise FormatError(f"{path}: expected header {','.join(FIELD_CSV_HEADER)}", key='header')
        for line_number, row in enumerate(reader, start=2):
            try:
                mc = row['mc'] == '1'
                frame = int(row['frame'])
                records.setdefault(frame, {})[(int(row['col']), int(row['row']))] = (
                    mc,
                    int(row['dx']) if mc else 0,
                    int(row['dy']) if mc else 0,
                    int(row['sad']),
                )
            except (TypeError, ValueError) as e:
                raise FormatError(f"{path}: bad field row at line {line_number}: {e}") from None

    fields = []
    for frame in sorted(records):
        blocks = records[frame]
        cols = max(col for col, _ in blocks) + 1
        rows = max(row for _, row in blocks) + 1
        if len(blocks) != cols * rows:
            raise FormatError(f"{path}: frame {frame} has {len(blocks)} blocks, expected {cols * rows}")
        mc = np.zeros((rows, cols), dtype=bool)
        dx = np.zeros((rows, cols), dtype=np.int64)
        dy = np.zeros((rows, cols), dtype=np.int64)
        sad = np.zeros((rows, cols), dtype=np.int64)
        for (col, row), (block_mc, block_dx, block_dy, block_sad) in blocks.items():
            mc[row, col], dx[row, col], dy[row, col], sad[row, col] = block_mc, block_dx, block_dy, block_sad
        fields.append(MVField(frame_index=frame, block_size=block_size, cols=cols, rows=rows,
                              mc=mc, dx=dx, dy=dy, sad=sad))
    return fields
