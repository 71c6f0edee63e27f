"""Experiment configuration, environment defaults and logging setup"""

import json
import logging
import os
from enum import Enum
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .data_models import Scheme
from .errors import ConfigurationError
from .optimizers import OptimizerKind

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def load_environment():
    """Load .env once so the MVPRED_* variables below pick it up"""
    load_dotenv()


def default_output_dir() -> Path:
    return Path(os.getenv('MVPRED_OUTPUT_DIR', 'data/runs'))


def default_log_dir() -> Path:
    return Path(os.getenv('MVPRED_LOG_DIR', 'data/logs'))


def default_workers() -> int:
    return int(os.getenv('MVPRED_WORKERS', '1'))


def setup_logging(log_dir: Optional[Path] = None, level: Optional[str] = None):
    """Log to data/logs/mvpred.log and the console"""
    log_dir = Path(log_dir) if log_dir is not None else default_log_dir()
    log_dir.mkdir(parents=True, exist_ok=True)
    level = level or os.getenv('MVPRED_LOG_LEVEL', 'INFO')
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(log_dir / 'mvpred.log'),
            logging.StreamHandler()
        ],
        force=True,
    )


class InputFormat(str, Enum):
    Y4M = "y4m"
    YUV = "yuv"


class InputSpec(BaseModel):
    """One video input and the source id its samples are tagged with"""
    path: Path = Field(..., description="Y4M or raw YUV 4:2:0 file")
    format: Optional[InputFormat] = Field(None, description="Inferred from the suffix when omitted")
    width: Optional[int] = Field(None, gt=0, description="Required for raw YUV")
    height: Optional[int] = Field(None, gt=0, description="Required for raw YUV")
    source_id: Optional[str] = Field(None, description="Defaults to the file stem")

    @model_validator(mode='after')
    def validate_format(self):
        if self.format is None:
            suffix = self.path.suffix.lower()
            self.format = InputFormat.YUV if suffix == '.yuv' else InputFormat.Y4M
        if self.format is InputFormat.YUV and (self.width is None or self.height is None):
            raise ValueError('Raw YUV input needs width and height')
        return self

    @property
    def resolved_source_id(self) -> str:
        return self.source_id or self.path.stem


class MotionConfig(BaseModel):
    """Block matching parameters"""
    block_size: int = Field(default=16, description="Square block side: 4, 8 or 16")
    search_range: Optional[int] = Field(None, ge=1, description="±pels; 16 for stride 1, 48 otherwise")
    stride: int = Field(default=1, ge=1, description="Frame stride; >1 gives the fast-forward regime")
    sad_threshold_per_pel: float = Field(default=6.0, ge=0.0, description="Blocks above this are non-MC")
    workers: int = Field(default_factory=default_workers, ge=1, description="Frame pairs searched in parallel")

    @field_validator('block_size')
    @classmethod
    def validate_block_size(cls, v):
        if v not in (4, 8, 16):
            raise ValueError('Block size must be 4, 8 or 16')
        return v

    @property
    def resolved_search_range(self) -> int:
        if self.search_range is not None:
            return self.search_range
        return 16 if self.stride == 1 else 48


class NetworkConfig(BaseModel):
    """Hidden stacks of the classifier and regressor networks, all of one width"""
    hidden_layers: int = Field(default=5, ge=1, le=5, description="Tanh hidden layers of the classifier")
    regressor_hidden_layers: int = Field(default=1, ge=1, le=5, description="Tanh hidden layers of the regressors")
    hidden_width: int = Field(default=8, ge=1, description="Neurons per hidden layer")

    @property
    def hidden_sizes(self) -> List[int]:
        return [self.hidden_width] * self.hidden_layers

    @property
    def regressor_hidden_sizes(self) -> List[int]:
        return [self.hidden_width] * self.regressor_hidden_layers


class OptimizerConfig(BaseModel):
    kind: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = Field(default=0.001, gt=0.0)
    rho: float = Field(default=0.9, ge=0.0, lt=1.0, description="Momentum friction")
    beta: float = Field(default=0.9, ge=0.0, lt=1.0, description="RMSprop decay")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)


class TrainingConfig(BaseModel):
    """Full-batch training with patience-based early stopping"""
    patience: int = Field(default=20, ge=1)
    min_delta: float = Field(default=0.01, ge=0.0)
    validation_fraction: float = Field(default=0.30, ge=0.0, lt=1.0)
    classifier_max_epochs: int = Field(default=500, ge=1)
    regressor_max_epochs: int = Field(default=50, ge=1)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)


class ExperimentConfig(BaseModel):
    """Everything one pipeline run depends on; all randomness flows from seed"""
    inputs: List[InputSpec] = Field(default_factory=list)
    motion: MotionConfig = Field(default_factory=MotionConfig)
    train_quota: int = Field(default=50_000, ge=1)
    test_quota: int = Field(default=2_000, ge=1)
    seed: int = Field(default=0)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    schemes: List[Scheme] = Field(default_factory=lambda: list(Scheme))
    categories: List[int] = Field(default_factory=lambda: [3, 2, 1])
    dump_bitstreams: bool = Field(default=False, description="Also write each residual stream in the bitstream dump format")
    output_dir: Path = Field(default_factory=default_output_dir)

    @field_validator('schemes')
    @classmethod
    def validate_schemes(cls, v):
        if not v:
            raise ValueError('At least one scheme is required')
        if Scheme.MEDIAN not in v:
            # every improvement figure is relative to the median
            v = [Scheme.MEDIAN] + list(v)
        return list(dict.fromkeys(v))

    @field_validator('categories')
    @classmethod
    def validate_categories(cls, v):
        if not v or any(c not in (1, 2, 3) for c in v):
            raise ValueError('Categories must be drawn from 1, 2, 3')
        return sorted(set(v), reverse=True)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path, 'r', encoding='utf-8') as file:
                document = json.load(file)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Cannot read config {path}: {e}") from e
        return cls.from_dict(document)

    @classmethod
    def from_dict(cls, document: dict) -> "ExperimentConfig":
        try:
            return cls.model_validate(document)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid experiment config: {e}") from e

    def to_document(self) -> dict:
        """JSON-ready dict; output_dir is left out so manifests do not depend on where a run lives"""
        return self.model_dump(mode='json', exclude={'output_dir'})
