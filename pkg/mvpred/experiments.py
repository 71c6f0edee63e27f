"""
Multi-run experiments

- multi_dataset_report: run several dataset configs repeatedly and report
  mean ± sample standard deviation of every comparison metric
- hidden_layer_sweep: retrain the regression networks for 1 to 5 hidden
  layers and report the MSE gain over the median predictor
- high-motion preset: seeded many-sprite sequences and the fast-forward
  config that goes with them
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from .config import ExperimentConfig, default_output_dir
from .data_models import ComparisonRow, Coordinate, Scheme
from .errors import ConfigurationError, StatisticError
from .neighborhood import split_dataset
from .pipeline import ExperimentPipeline, evaluate, run_pipeline, train_networks
from .reporting import AggregateCell, AggregateRow, aggregate_rows, write_aggregate_csv, write_report
from .synth import SynthKind, SynthParams, synth_generate

logger = logging.getLogger(__name__)

DEFAULT_REPEATS = 5


# Static textured background under many small sprites with independent
# velocities. At stride 2 their vectors reach ±32, and sprite edges give
# neighbors that disagree with each other.
HIGH_MOTION_SCENE = SynthParams(width=352, height=288, frames=21, pan_velocity=(0, 0), objects=160,
                                object_size=(8, 24), object_speed=16, noise_sigma=0.0)
HIGH_MOTION_CLIPS = 12
HIGH_MOTION_DOCUMENT = {
    # blocks over uncovered background match nowhere and stay above 48 per pel
    'motion': {'block_size': 8, 'search_range': 32, 'stride': 2, 'sad_threshold_per_pel': 48.0},
    'train_quota': 50_000,
    'test_quota': 2_000,
    'training': {
        'patience': 50,
        'min_delta': 1e-4,
        'classifier_max_epochs': 1000,
        'regressor_max_epochs': 1000,
        'optimizer': {'learning_rate': 0.01},
    },
}


def synth_high_motion(video_dir: Path, clips: int = HIGH_MOTION_CLIPS, seed: int = 0,
                      progress: bool = False) -> List[Path]:
    """Write the preset's multi-object sequences; clip i uses seed * 1000 + i"""
    video_dir = Path(video_dir)
    video_dir.mkdir(parents=True, exist_ok=True)
    return [
        synth_generate(SynthKind.MULTI_OBJECT, HIGH_MOTION_SCENE, seed * 1000 + index,
                       video_dir / f'high_motion_{index:02d}.y4m', progress)
        for index in range(clips)
    ]


def high_motion_config(inputs: Sequence[Path], seed: int = 0, output_dir: Optional[Path] = None,
                       **overrides) -> ExperimentConfig:
    """Experiment config of the high-motion preset.

    Top-level keys in ``overrides`` replace the preset's, nested ones are merged
    one level deep (``motion={'workers': 4}`` keeps the rest of the motion block).
    """
    document = {key: dict(value) if isinstance(value, dict) else value
                for key, value in HIGH_MOTION_DOCUMENT.items()}
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(document.get(key), dict):
            document[key].update(value)
        else:
            document[key] = value
    document['inputs'] = [{'path': str(path)} for path in inputs]
    document['seed'] = seed
    if output_dir is not None:
        document['output_dir'] = str(output_dir)
    return ExperimentConfig.from_dict(document)


class AggregateReport(BaseModel):
    observations: int
    rows: List[AggregateRow]
    artifacts: List[Path] = []


class SweepRow(BaseModel):
    """MSE gain of the regressor over the median at one network depth"""
    hidden_layers: int
    coordinate: Coordinate
    observations: int
    improvement: AggregateCell


def _cell(values: Sequence[float]) -> AggregateCell:
    array = np.asarray(values, dtype=np.float64)
    std = float(array.std(ddof=1)) if len(array) > 1 else 0.0
    return AggregateCell(mean=float(array.mean()), std=std)


def _aggregate_tables(rows: Sequence[AggregateRow]) -> Tuple[List[Scheme], List[Tuple[int, list]]]:
    """Scheme columns and, per category, the (coordinate, cells) lines of the aggregate table"""
    schemes = [s for s in Scheme if any(row.scheme is s for row in rows)]
    lookup = {(row.scheme, row.category, row.coordinate): row for row in rows}
    tables = []
    for category in sorted({row.category for row in rows}, reverse=True):
        lines = []
        for coordinate in Coordinate:
            cells = []
            for scheme in schemes:
                row = lookup.get((scheme, category, coordinate))
                cells.extend(row.metrics[m] if row else None for m in ('mse', 'entropy', 'bits'))
            lines.append((coordinate, cells))
        tables.append((category, lines))
    return schemes, tables


def multi_dataset_report(configs: Sequence[ExperimentConfig], repeats: int = DEFAULT_REPEATS,
                         output_dir: Optional[Path] = None) -> AggregateReport:
    """Run every config ``repeats`` times (seeds seed, seed+1, ...) and aggregate the comparison rows"""
    if len(configs) < 2:
        raise ConfigurationError(f"A multi-dataset report needs at least two dataset configs, got {len(configs)}")
    if repeats < 1:
        raise ConfigurationError(f"repeats must be at least 1, got {repeats}")
    output_dir = Path(output_dir) if output_dir is not None else default_output_dir() / 'aggregate'
    output_dir.mkdir(parents=True, exist_ok=True)

    runs: List[List[ComparisonRow]] = []
    for index, config in enumerate(configs):
        for r in range(repeats):
            run_config = config.model_copy(update={
                'seed': config.seed + r,
                'output_dir': output_dir / f'dataset{index}' / f'run{r}',
            })
            bundle = run_pipeline(run_config)
            if bundle.status != 'ok':
                logger.warning(f"Dataset {index} run {r} produced no samples; left out of the aggregate")
                continue
            runs.append(bundle.rows)

    if not runs:
        raise StatisticError("No run produced samples to aggregate")
    rows = aggregate_rows(runs)
    schemes, tables = _aggregate_tables(rows)

    csv_path = output_dir / 'aggregate.csv'
    write_aggregate_csv(csv_path, rows)
    artifacts = [csv_path, *write_report(
        output_dir, 'aggregate', 'aggregate.md.j2',
        title='Multi-dataset comparison', observations=len(runs),
        schemes=schemes, categories=tables, improvements=[],
    )]
    logger.info(f"Aggregated {len(runs)} runs over {len(configs)} datasets into {output_dir}")
    return AggregateReport(observations=len(runs), rows=rows, artifacts=artifacts)


def hidden_layer_sweep(configs: Sequence[ExperimentConfig], layers: Sequence[int] = (1, 2, 3, 4, 5),
                       repeats: int = DEFAULT_REPEATS, output_dir: Optional[Path] = None) -> List[SweepRow]:
    """Regression MSE gain over the median for each hidden-layer count.

    Motion estimation and extraction run once per config; every repeat draws a
    new split and initialization from seed + r.
    """
    if not configs:
        raise ConfigurationError("The sweep needs at least one dataset config")
    if any(not 1 <= depth <= 5 for depth in layers):
        raise ConfigurationError(f"Hidden layer counts must lie in 1..5, got {list(layers)}")
    output_dir = Path(output_dir) if output_dir is not None else default_output_dir() / 'sweep'
    output_dir.mkdir(parents=True, exist_ok=True)

    gains: Dict[Tuple[int, Coordinate], List[float]] = {}
    for index, config in enumerate(configs):
        pipeline = ExperimentPipeline(config.model_copy(update={'output_dir': output_dir / f'dataset{index}'}))
        pipeline.output_dir.mkdir(parents=True, exist_ok=True)
        samples, _ = pipeline.extract(pipeline.estimate())
        if not samples:
            logger.warning(f"Dataset {index} has no samples; skipped")
            continue
        for r in range(repeats):
            seed = config.seed + r
            train, test = split_dataset(samples, config.train_quota, config.test_quota, seed)
            for depth in layers:
                network = config.network.model_copy(update={'regressor_hidden_layers': depth})
                networks = train_networks(train, [Scheme.REGRESSOR], [3], network, config.training, seed)
                result = evaluate(test, [Scheme.MEDIAN, Scheme.REGRESSOR], [3], networks)
                for row in result.rows:
                    gain = row.improvement.get('mse')
                    if row.scheme is Scheme.REGRESSOR and gain is not None:
                        gains.setdefault((depth, row.coordinate), []).append(gain)
                logger.info(f"Dataset {index}, repeat {r}: {depth} hidden layer(s) evaluated")

    if not gains:
        raise StatisticError("The sweep produced no regression results")
    rows = [
        SweepRow(hidden_layers=depth, coordinate=coordinate, observations=len(values), improvement=_cell(values))
        for (depth, coordinate), values in sorted(gains.items(), key=lambda item: (item[0][0], item[0][1].value))
    ]

    with open(output_dir / 'sweep.csv', 'w', newline='', encoding='utf-8') as file:
        writer = csv.writer(file)
        writer.writerow(['hidden_layers', 'coordinate', 'observations', 'mse_gain_mean', 'mse_gain_std'])
        for row in rows:
            writer.writerow([row.hidden_layers, row.coordinate.value, row.observations,
                             repr(row.improvement.mean), repr(row.improvement.std)])
    write_report(
        output_dir, 'sweep', 'aggregate.md.j2',
        title='Hidden-layer sweep', observations=max(row.observations for row in rows),
        schemes=[], categories=[],
        improvements=[
            {'label': f'{row.hidden_layers} hidden layer(s)', 'coordinate': row.coordinate, 'cell': row.improvement}
            for row in rows
        ],
    )
    return rows
