"""Shared value types for frames, motion fields, neighbor samples and reports"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator


class NeighborTag(str, Enum):
    """Causal neighbor positions around the current block"""
    A = "A"  # left (col - 1, row)
    B = "B"  # top-left (col - 1, row - 1)
    C = "C"  # top (col, row - 1)


class Signal(str, Enum):
    """Per-coordinate selection symbol sent for the best-PMV scheme"""
    MEDIAN = "MEDIAN"
    LOWER = "LOWER"
    HIGHER = "HIGHER"
    NONE = "NONE"


class Scheme(str, Enum):
    """PMV schemes compared by the harness"""
    MEDIAN = "median"
    BEST = "best"
    CLASSIFIER = "classifier"
    REGRESSOR = "regressor"


class Coordinate(str, Enum):
    X = "x"
    Y = "y"


@dataclass(frozen=True)
class MotionVector:
    """Integer-pel displacement pointing from a block into its reference frame"""
    dx: int
    dy: int

    def __sub__(self, other: "MotionVector") -> Tuple[int, int]:
        return (self.dx - other.dx, self.dy - other.dy)

    def is_zero(self) -> bool:
        return self.dx == 0 and self.dy == 0

    def component(self, coordinate: Coordinate) -> int:
        return self.dx if Coordinate(coordinate) is Coordinate.X else self.dy


ZERO_MV = MotionVector(0, 0)


@dataclass(frozen=True)
class LumaFrame:
    """One 8-bit luma plane, stored as a read-only (height, width) array"""
    width: int
    height: int
    index: int
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"Frame dimensions must be positive, got {self.width}x{self.height}")
        samples = np.asarray(self.samples)
        if samples.size != self.width * self.height:
            raise ValueError(
                f"Frame {self.index} has {samples.size} samples, expected {self.width * self.height}"
            )
        samples = np.array(samples, dtype=np.uint8).reshape(self.height, self.width)
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)


@dataclass(frozen=True)
class BlockRecord:
    """Motion search result for one block of the grid"""
    col: int
    row: int
    mc: bool
    mv: Optional[MotionVector]
    sad: int


@dataclass
class MVField:
    """Per-frame block grid: motion-compensated flags, vectors and SAD scores.

    Arrays are indexed [row, col]. Where ``mc`` is false the vector is absent and
    the stored dx/dy are zero.
    """
    frame_index: int
    block_size: int
    cols: int
    rows: int
    mc: np.ndarray = field(repr=False)
    dx: np.ndarray = field(repr=False)
    dy: np.ndarray = field(repr=False)
    sad: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = (self.rows, self.cols)
        for name in ('mc', 'dx', 'dy', 'sad'):
            array = np.asarray(getattr(self, name))
            if array.shape != shape:
                raise ValueError(f"MVField.{name} has shape {array.shape}, expected {shape}")
        self.mc = np.asarray(self.mc, dtype=bool)
        self.dx = np.asarray(self.dx, dtype=np.int64)
        self.dy = np.asarray(self.dy, dtype=np.int64)
        self.sad = np.asarray(self.sad, dtype=np.int64)

    def block(self, col: int, row: int) -> BlockRecord:
        mc = bool(self.mc[row, col])
        mv = MotionVector(int(self.dx[row, col]), int(self.dy[row, col])) if mc else None
        return BlockRecord(col=col, row=row, mc=mc, mv=mv, sad=int(self.sad[row, col]))

    @property
    def blocks(self) -> List[BlockRecord]:
        """Row-major list of block records"""
        return [self.block(col, row) for row in range(self.rows) for col in range(self.cols)]

    def mv_at(self, col: int, row: int) -> Optional[MotionVector]:
        if not (0 <= col < self.cols and 0 <= row < self.rows):
            return None
        if not self.mc[row, col]:
            return None
        return MotionVector(int(self.dx[row, col]), int(self.dy[row, col]))


@dataclass(frozen=True)
class NeighborSample:
    """One dataset row: present causal neighbors and the block's ground-truth MV"""
    gt: MotionVector
    neighbors: Tuple[Tuple[NeighborTag, MotionVector], ...]
    source_id: str

    def __post_init__(self):
        if not 1 <= len(self.neighbors) <= 3:
            raise ValueError(f"A sample needs 1 to 3 neighbors, got {len(self.neighbors)}")
        if self.gt.is_zero():
            raise ValueError("Zero-motion blocks are not valid samples")

    @property
    def category(self) -> int:
        return len(self.neighbors)

    @property
    def vectors(self) -> List[MotionVector]:
        return [mv for _, mv in self.neighbors]

    def neighbor(self, tag: NeighborTag) -> Optional[MotionVector]:
        for neighbor_tag, mv in self.neighbors:
            if neighbor_tag == tag:
                return mv
        return None


@dataclass(frozen=True)
class MedianResult:
    """Median PMV with the neighbor index that supplied each coordinate"""
    pmv: MotionVector
    arg_x: int
    arg_y: int


class NormalizationConstants(BaseModel):
    """Per-coordinate magnitude bounds used to scale network inputs"""
    max_abs_x: int = Field(..., gt=0, description="Max |dx| over training neighbors and GT")
    max_abs_y: int = Field(..., gt=0, description="Max |dy| over training neighbors and GT")

    model_config = {'frozen': True}

    def for_coordinate(self, coordinate: Coordinate) -> int:
        return self.max_abs_x if Coordinate(coordinate) is Coordinate.X else self.max_abs_y


@dataclass(frozen=True)
class Prediction:
    """PMV chosen by one scheme for one sample"""
    pmv: MotionVector
    residual: Tuple[int, int]
    signal_x: Signal = Signal.NONE
    signal_y: Signal = Signal.NONE
    raw: Optional[Tuple[float, float]] = None  # regression output before rounding


class EpochRecord(BaseModel):
    """One line of training history"""
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: Optional[float] = None


class MotionStatistics(BaseModel):
    """Magnitude statistics of a dataset's ground-truth vectors and of the neighbor vectors next to them"""
    source: str
    samples: int
    mean_dx: float
    mean_dy: float
    std_dx: float
    std_dy: float
    mean_abs_dx: float
    mean_abs_dy: float
    neighbors: int = Field(..., description="Neighbor vectors over all samples")
    neighbor_mean_dx: float
    neighbor_mean_dy: float
    neighbor_std_dx: float
    neighbor_std_dy: float


class ComparisonRow(BaseModel):
    """One scheme/category/coordinate line of the comparison table"""
    scheme: Scheme
    category: int = Field(..., ge=1, le=3)
    coordinate: Coordinate
    samples: int = Field(..., ge=0)
    mse: float
    mse_raw: Optional[float] = Field(None, description="MSE before integer rounding (regressor only)")
    entropy: float = Field(..., description="Bits per symbol of the residual")
    bits: int = Field(..., description="Huffman bits, signaling excluded")
    signal_bits_flat: int = 0
    signal_bits_huffman: int = 0
    improvement: Dict[str, Optional[float]] = Field(
        default_factory=dict,
        description="1 - scheme/median per metric: mse, entropy, bits, bits_flat, bits_huffman",
    )

    @field_validator('mse', 'entropy')
    @classmethod
    def validate_non_negative(cls, v):
        if v < 0:
            raise ValueError('Statistic must be non-negative')
        return v

    @property
    def bits_with_flat_signaling(self) -> int:
        return self.bits + self.signal_bits_flat

    @property
    def bits_with_huffman_signaling(self) -> int:
        return self.bits + self.signal_bits_huffman
