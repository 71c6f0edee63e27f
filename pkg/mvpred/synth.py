"""
Synthetic test sequences

Seeded generators for desk-scale motion data:
- pan: a random texture seen through a window moving by a fixed velocity
- multi-object: the panning texture with textured rectangles bouncing over it
- noise: a background with fresh per-frame noise, so most blocks have no good match

A pan of velocity v satisfies F_k(x, y) = F_{k-1}(x + vx, y + vy), so block
matching recovers v as the motion vector. Rectangles moving by u show up as -u.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator
from tqdm import tqdm

from .video_io import write_y4m

logger = logging.getLogger(__name__)

NOISE_KIND_SIGMA = 20.0


class SynthKind(str, Enum):
    PAN = "pan"
    MULTI_OBJECT = "multi-object"
    NOISE = "noise"


class SynthParams(BaseModel):
    """Dimensions and motion of a synthetic sequence"""
    width: int = Field(default=176, ge=16, description="Frame width in pels")
    height: int = Field(default=144, ge=16, description="Frame height in pels")
    frames: int = Field(default=30, ge=1)
    pan_velocity: Tuple[int, int] = Field(default=(2, 0), description="Background (vx, vy) per frame")
    objects: int = Field(default=4, ge=0, description="Rectangles drawn by the multi-object kind")
    object_size: Tuple[int, int] = Field(default=(16, 48), description="Min and max rectangle side")
    object_speed: int = Field(default=6, ge=0, description="Max |u| per coordinate of a rectangle")
    texture_strength: float = Field(default=1.0, ge=0.0, le=1.0, description="0 gives a flat background")
    noise_sigma: Optional[float] = Field(None, ge=0.0, description="Per-frame noise; 20 for the noise kind, else 0")
    frame_rate: Tuple[int, int] = (25, 1)

    @model_validator(mode='after')
    def validate_object_size(self):
        low, high = self.object_size
        if low < 1 or high < low:
            raise ValueError('object_size must be (min, max) with 1 <= min <= max')
        if high > min(self.width, self.height):
            raise ValueError('Rectangles must fit inside the frame')
        return self

    def resolved_noise_sigma(self, kind: SynthKind) -> float:
        if self.noise_sigma is not None:
            return self.noise_sigma
        return NOISE_KIND_SIGMA if kind is SynthKind.NOISE else 0.0


@dataclass
class MovingRect:
    x: int
    y: int
    vx: int
    vy: int
    patch: np.ndarray

    def advance(self, width: int, height: int):
        """Move by the velocity, bouncing off the frame edges"""
        h, w = self.patch.shape
        self.x += self.vx
        self.y += self.vy
        if self.x < 0 or self.x + w > width:
            self.vx = -self.vx
            self.x = min(max(self.x, 0), width - w)
        if self.y < 0 or self.y + h > height:
            self.vy = -self.vy
            self.y = min(max(self.y, 0), height - h)


def _texture(rng: np.random.Generator, shape: Tuple[int, int], strength: float) -> np.ndarray:
    raw = rng.integers(0, 256, size=shape).astype(np.float64)
    return 128.0 + strength * (raw - 128.0)


def _spawn_rects(rng: np.random.Generator, params: SynthParams) -> List[MovingRect]:
    low, high = params.object_size
    rects = []
    for _ in range(params.objects):
        w, h = (int(v) for v in rng.integers(low, high + 1, size=2))
        rects.append(MovingRect(
            x=int(rng.integers(0, params.width - w + 1)),
            y=int(rng.integers(0, params.height - h + 1)),
            vx=int(rng.integers(-params.object_speed, params.object_speed + 1)),
            vy=int(rng.integers(-params.object_speed, params.object_speed + 1)),
            patch=_texture(rng, (h, w), 1.0),
        ))
    return rects


def synth_frames(kind: SynthKind, params: SynthParams, seed: int) -> Iterator[np.ndarray]:
    """Yield (height, width) uint8 luma planes"""
    kind = SynthKind(kind)
    rng = np.random.default_rng(seed)
    vx, vy = params.pan_velocity
    span = params.frames - 1

    canvas = _texture(rng, (params.height + abs(vy) * span, params.width + abs(vx) * span),
                      params.texture_strength)
    origin_x = abs(vx) * span if vx < 0 else 0
    origin_y = abs(vy) * span if vy < 0 else 0
    rects = _spawn_rects(rng, params) if kind is SynthKind.MULTI_OBJECT else []
    sigma = params.resolved_noise_sigma(kind)

    for k in range(params.frames):
        top, left = origin_y + k * vy, origin_x + k * vx
        frame = canvas[top:top + params.height, left:left + params.width].copy()
        for rect in rects:
            h, w = rect.patch.shape
            frame[rect.y:rect.y + h, rect.x:rect.x + w] = rect.patch
            rect.advance(params.width, params.height)
        if sigma > 0:
            frame = frame + rng.normal(0.0, sigma, size=frame.shape)
        yield np.clip(np.rint(frame), 0, 255).astype(np.uint8)


def synth_generate(kind: SynthKind, params: SynthParams, seed: int, path: Union[str, Path],
                   progress: bool = False) -> Path:
    """Write a deterministic synthetic sequence as Y4M; the same seed gives the same bytes"""
    kind = SynthKind(kind)
    path = Path(path)
    frames = synth_frames(kind, params, seed)
    if progress:
        frames = tqdm(frames, total=params.frames, desc=f"Synthesizing {kind.value}", unit="frame")
    count = write_y4m(path, frames, params.width, params.height, params.frame_rate)
    logger.info(f"Wrote {count} {kind.value} frames ({params.width}x{params.height}, seed {seed}) to {path}")
    return path
