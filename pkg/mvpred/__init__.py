"""
Motion-Vector Prediction Package

This package measures how well a block's motion vector can be predicted from
its causal neighbors:
- Motion fields: exhaustive SAD block matching over Y4M / raw YUV video
- Neighborhood: neighbor samples, median and best-neighbor PMVs, dataset split
- Networks: small tanh FCNNs trained to pick a neighbor or regress the MV
- Coding: residual entropy, canonical Huffman bits and signaling costs
- Pipeline: seeded end-to-end experiments with CSV/Markdown/HTML reports
"""

__version__ = "0.1.0"

from .pipeline import ExperimentPipeline, ReportBundle, run_pipeline
from .experiments import hidden_layer_sweep, high_motion_config, multi_dataset_report, synth_high_motion
from .predictors import (
    BestPredictor,
    ClassifierPredictor,
    MedianPredictor,
    PredictorFactory,
    RegressorPredictor,
)
from .synth import synth_generate

__all__ = [
    'ExperimentPipeline',
    'ReportBundle',
    'run_pipeline',
    'hidden_layer_sweep',
    'multi_dataset_report',
    'high_motion_config',
    'synth_high_motion',
    'MedianPredictor',
    'BestPredictor',
    'ClassifierPredictor',
    'RegressorPredictor',
    'PredictorFactory',
    'synth_generate',
]
