"""Exception hierarchy shared by every mvpred stage.

Configuration problems map to CLI exit code 2, data problems to exit code 3.
"""

from typing import Optional


class MvpredError(Exception):
    """Base class for all mvpred errors"""
    exit_code = 1


class ConfigurationError(MvpredError):
    """Invalid configuration, model/head mismatch or impossible parameters"""
    exit_code = 2


class DataError(MvpredError):
    """Input data that cannot be processed"""
    exit_code = 3


class FormatError(DataError):
    """Malformed container, CSV or model document"""

    def __init__(self, message: str, offset: Optional[int] = None, key: Optional[str] = None):
        self.offset = offset
        self.key = key
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        if key is not None:
            message = f"{message} (key: {key})"
        super().__init__(message)


class TruncationError(DataError):
    """Frame payload shorter than the declared frame size"""

    def __init__(self, message: str, frame_index: Optional[int] = None):
        self.frame_index = frame_index
        if frame_index is not None:
            message = f"{message} (frame {frame_index})"
        super().__init__(message)


class DimensionError(DataError):
    """Frames that do not share dimensions"""


class ShapeError(DataError):
    """Vector or matrix with the wrong length for a network layer"""


class CategoryError(DataError):
    """Operation requested on a sample with an unsupported neighbor count"""


class StatisticError(DataError):
    """Statistic requested over an empty population"""


class CoverageError(DataError):
    """Symbol missing from a Huffman table"""


class DecodeError(DataError):
    """Bitstring that does not decode with the given table"""

    def __init__(self, message: str, bit_offset: int):
        self.bit_offset = bit_offset
        super().__init__(f"{message} (at bit offset {bit_offset})")


class SplitError(DataError):
    """Dataset that cannot be split into disjoint train/test sources"""


class StageError(MvpredError):
    """Error escaping a pipeline stage, tagged with the stage and artifact"""

    def __init__(self, stage: str, artifact: Optional[str], cause: Exception):
        self.stage = stage
        self.artifact = artifact
        self.cause = cause
        self.exit_code = getattr(cause, 'exit_code', 1)
        where = f" [{artifact}]" if artifact else ""
        super().__init__(f"stage '{stage}' failed{where}: {cause}")
