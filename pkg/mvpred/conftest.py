"""Shared fixtures for the mvpred tests"""

import os
from typing import List, Sequence, Tuple

import numpy as np
import pytest

from .data_models import LumaFrame, MotionVector, NeighborSample, NeighborTag
from .synth import SynthKind, SynthParams, synth_frames

TAGS = (NeighborTag.A, NeighborTag.B, NeighborTag.C)


def pytest_collection_modifyitems(config, items):
    if os.getenv('MVPRED_RUN_SLOW') == '1':
        return
    skip_slow = pytest.mark.skip(reason="set MVPRED_RUN_SLOW=1 to run slow experiment checks")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def isolated_dirs(tmp_path, monkeypatch):
    """Keep logs and default outputs inside the test's tmp dir"""
    monkeypatch.setenv('MVPRED_LOG_DIR', str(tmp_path / 'logs'))
    monkeypatch.setenv('MVPRED_OUTPUT_DIR', str(tmp_path / 'runs'))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_sample(neighbors: Sequence[Tuple[int, int]], gt: Tuple[int, int], source_id: str = 'seq0',
                tags: Sequence[NeighborTag] = TAGS) -> NeighborSample:
    """Sample with the given neighbor vectors assigned to tags A, B, C in order"""
    return NeighborSample(
        gt=MotionVector(*gt),
        neighbors=tuple((tag, MotionVector(*mv)) for tag, mv in zip(tags, neighbors)),
        source_id=source_id,
    )


def random_sample(rng: np.random.Generator, category: int = 3, spread: int = 8,
                  source_id: str = 'seq0') -> NeighborSample:
    vectors = [tuple(int(v) for v in rng.integers(-spread, spread + 1, size=2)) for _ in range(category)]
    gt = (0, 0)
    while gt == (0, 0):
        gt = tuple(int(v) for v in rng.integers(-spread, spread + 1, size=2))
    return make_sample(vectors, gt, source_id)


def frames_from_arrays(arrays) -> List[LumaFrame]:
    return [
        LumaFrame(width=a.shape[1], height=a.shape[0], index=k, samples=a)
        for k, a in enumerate(arrays)
    ]


def pan_frames(velocity: Tuple[int, int], frames: int = 6, width: int = 64, height: int = 64,
               seed: int = 7) -> List[LumaFrame]:
    params = SynthParams(width=width, height=height, frames=frames, pan_velocity=velocity,
                         object_size=(8, 16))
    return frames_from_arrays(synth_frames(SynthKind.PAN, params, seed))


@pytest.fixture
def sample_factory():
    return make_sample
