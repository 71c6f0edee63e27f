"""
Video input

Streams 8-bit luma planes out of YUV4MPEG2 files and headerless planar
YUV 4:2:0 files. Chroma is read past and discarded.
"""

import logging
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Optional, Tuple, Union

import numpy as np

from .data_models import LumaFrame
from .errors import ConfigurationError, FormatError, TruncationError

logger = logging.getLogger(__name__)

Y4M_MAGIC = b'YUV4MPEG2'
FRAME_MAGIC = b'FRAME'
MAX_HEADER_LENGTH = 4096

SUPPORTED_CHROMA = {'420', '420jpeg', '420paldv', '420mpeg2', '444'}
HIGH_BIT_DEPTH = re.compile(r'^(420|422|444)p(9|10|12|14|16)$')


@dataclass(frozen=True)
class Y4MHeader:
    width: int
    height: int
    chroma: str = '420jpeg'
    frame_rate: Tuple[int, int] = (25, 1)

    @property
    def luma_size(self) -> int:
        return self.width * self.height

    @property
    def chroma_size(self) -> int:
        if self.chroma == '444':
            return 2 * self.width * self.height
        return 2 * ((self.width + 1) // 2) * ((self.height + 1) // 2)


def yuv420_frame_size(width: int, height: int) -> int:
    return width * height + 2 * ((width + 1) // 2) * ((height + 1) // 2)


class FrameStream:
    """Single-consumer iterator over the luma frames of one file.

    Frames are yielded in file order with indices counting from 0. Use as a
    context manager, or exhaust it, to release the file handle.
    """

    def __init__(self, file: BinaryIO, frames: Iterator[LumaFrame], width: int, height: int,
                 path: Optional[Path] = None):
        self._file = file
        self._frames = frames
        self.width = width
        self.height = height
        self.path = path

    def __iter__(self) -> "FrameStream":
        return self

    def __next__(self) -> LumaFrame:
        try:
            return next(self._frames)
        except StopIteration:
            self.close()
            raise
        except Exception:
            self.close()
            raise

    def close(self):
        if not self._file.closed:
            self._file.close()

    def __enter__(self) -> "FrameStream":
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()


def parse_y4m_header(line: bytes) -> Y4MHeader:
    """Parse the stream header line (without the trailing newline)"""
    if not line.startswith(Y4M_MAGIC):
        raise FormatError("Missing YUV4MPEG2 signature", offset=0)

    width = height = None
    chroma = '420jpeg'
    frame_rate = (25, 1)

    offset = len(Y4M_MAGIC)
    for token in line[len(Y4M_MAGIC):].split(b' '):
        token_offset = offset
        offset += len(token) + 1
        if not token:
            continue
        tag, value = chr(token[0]), token[1:].decode('ascii', errors='replace')
        try:
            if tag == 'W':
                width = int(value)
            elif tag == 'H':
                height = int(value)
            elif tag == 'F':
                num, den = value.split(':')
                frame_rate = (int(num), int(den))
            elif tag == 'C':
                chroma = value
        except ValueError:
            raise FormatError(f"Bad header token '{token.decode('ascii', errors='replace')}'",
                              offset=token_offset) from None
        # I (interlace), A (aspect) and X (extensions) do not affect the payload layout

        if tag in 'WH' and (width is not None and width <= 0 or height is not None and height <= 0):
            raise FormatError("Frame dimensions must be positive", offset=token_offset)

    if width is None or height is None:
        raise FormatError("Header lacks W or H", offset=len(line))
    if HIGH_BIT_DEPTH.match(chroma):
        raise FormatError(f"Only 8-bit input is supported, header declares C{chroma}", offset=0)
    if chroma not in SUPPORTED_CHROMA:
        raise FormatError(f"Unsupported chroma layout C{chroma} (need 4:2:0 or 4:4:4)", offset=0)

    return Y4MHeader(width=width, height=height, chroma=chroma, frame_rate=frame_rate)


def _iter_y4m_frames(file: BinaryIO, header: Y4MHeader) -> Iterator[LumaFrame]:
    index = 0
    while True:
        marker_offset = file.tell()
        line = file.readline(MAX_HEADER_LENGTH)
        if not line:
            return
        if not line.startswith(FRAME_MAGIC) or not line.endswith(b'\n'):
            raise FormatError(f"Expected FRAME marker before frame {index}", offset=marker_offset)

        luma = file.read(header.luma_size)
        if len(luma) < header.luma_size:
            raise TruncationError(
                f"Luma payload has {len(luma)} of {header.luma_size} bytes", frame_index=index
            )
        chroma = file.read(header.chroma_size)
        if len(chroma) < header.chroma_size:
            raise TruncationError(
                f"Chroma payload has {len(chroma)} of {header.chroma_size} bytes", frame_index=index
            )

        yield LumaFrame(
            width=header.width,
            height=header.height,
            index=index,
            samples=np.frombuffer(luma, dtype=np.uint8),
        )
        index += 1


def open_y4m(path: Union[str, Path]) -> FrameStream:
    """Open a YUV4MPEG2 file; the header is validated immediately"""
    path = Path(path)
    file = open(path, 'rb')
    try:
        line = file.readline(MAX_HEADER_LENGTH)
        if not line.endswith(b'\n'):
            raise FormatError("Unterminated YUV4MPEG2 header", offset=len(line))
        header = parse_y4m_header(line[:-1])
    except Exception:
        file.close()
        raise

    logger.info(f"Opened {path.name}: {header.width}x{header.height} C{header.chroma}")
    return FrameStream(file, _iter_y4m_frames(file, header), header.width, header.height, path)


def _iter_raw_frames(file: BinaryIO, width: int, height: int, count: int) -> Iterator[LumaFrame]:
    luma_size = width * height
    chroma_size = yuv420_frame_size(width, height) - luma_size
    for index in range(count):
        luma = file.read(luma_size)
        if len(luma) < luma_size:
            raise TruncationError("Raw YUV file ended early", frame_index=index)
        file.seek(chroma_size, os.SEEK_CUR)
        yield LumaFrame(width=width, height=height, index=index,
                        samples=np.frombuffer(luma, dtype=np.uint8))


def open_raw_yuv(path: Union[str, Path], width: int, height: int) -> FrameStream:
    """Open a headerless planar 8-bit YUV 4:2:0 file"""
    if width <= 0 or height <= 0:
        raise ConfigurationError(f"Raw YUV dimensions must be positive, got {width}x{height}")

    path = Path(path)
    frame_size = yuv420_frame_size(width, height)
    size = os.path.getsize(path)
    if size % frame_size != 0:
        raise TruncationError(
            f"{path.name}: size {size} is not a multiple of the {width}x{height} frame size {frame_size}",
            frame_index=size // frame_size,
        )

    count = size // frame_size
    logger.info(f"Opened {path.name}: {width}x{height} raw 4:2:0, {count} frames")
    file = open(path, 'rb')
    return FrameStream(file, _iter_raw_frames(file, width, height, count), width, height, path)


def write_y4m(path: Union[str, Path], frames: Iterable[Union[LumaFrame, np.ndarray]],
              width: int, height: int, frame_rate: Tuple[int, int] = (25, 1)) -> int:
    """Write luma planes as a C420jpeg Y4M file with neutral chroma.

    Returns the number of frames written.
    """
    chroma = bytes([128]) * (2 * ((width + 1) // 2) * ((height + 1) // 2))
    count = 0
    with open(path, 'wb') as file:
        file.write(
            f"YUV4MPEG2 W{width} H{height} F{frame_rate[0]}:{frame_rate[1]} Ip A1:1 C420jpeg\n".encode('ascii')
        )
        for frame in frames:
            samples = frame.samples if isinstance(frame, LumaFrame) else np.asarray(frame)
            if samples.shape != (height, width):
                raise ConfigurationError(
                    f"Frame {count} has shape {samples.shape}, expected {(height, width)}"
                )
            file.write(FRAME_MAGIC + b'\n')
            file.write(np.ascontiguousarray(samples, dtype=np.uint8).tobytes())
            file.write(chroma)
            count += 1
    return count


def open_video(path: Union[str, Path], fmt: str = 'y4m',
               width: Optional[int] = None, height: Optional[int] = None) -> FrameStream:
    """Dispatch on the input format name used by the config and CLI"""
    if fmt == 'yuv':
        if width is None or height is None:
            raise ConfigurationError("Raw YUV input needs --width and --height")
        return open_raw_yuv(path, width, height)
    return open_y4m(path)
