"""Tests for multi-dataset aggregation, the hidden-layer sweep and the high-motion preset"""

import pytest

from .config import ExperimentConfig
from .data_models import Coordinate, Scheme
from .errors import ConfigurationError
from .experiments import (
    HIGH_MOTION_DOCUMENT,
    HIGH_MOTION_SCENE,
    hidden_layer_sweep,
    high_motion_config,
    multi_dataset_report,
    synth_high_motion,
)
from .neighborhood import best_pmv, filter_category, median_pmv
from .pipeline import ExperimentPipeline
from .synth import SynthKind, SynthParams, synth_generate


def _videos(tmp_path, tag, seeds=(1, 2)):
    params = SynthParams(width=64, height=64, frames=6, pan_velocity=(2, 1), objects=2, object_size=(8, 16))
    return [synth_generate(SynthKind.MULTI_OBJECT, params, seed, tmp_path / f'{tag}{seed}.y4m') for seed in seeds]


def _config(videos, **overrides) -> ExperimentConfig:
    document = {
        'inputs': [{'path': str(v)} for v in videos],
        'motion': {'block_size': 8, 'search_range': 3},
        'test_quota': 100,
        'schemes': ['median', 'best'],
        'seed': 3,
    }
    document.update(overrides)
    return ExperimentConfig.from_dict(document)


def test_identical_datasets_have_no_spread(tmp_path):
    config = _config(_videos(tmp_path, 'v'))
    report = multi_dataset_report([config, config], repeats=1, output_dir=tmp_path / 'agg')

    assert report.observations == 2
    for row in report.rows:
        assert row.observations == 2
        assert all(cell.std == 0.0 for cell in row.metrics.values())
    assert (tmp_path / 'agg' / 'aggregate.csv').exists()
    text = (tmp_path / 'agg' / 'aggregate.md').read_text()
    assert '## Category 3' in text
    assert '± 0.000' in text


def test_repeats_use_consecutive_seeds(tmp_path):
    first = _config(_videos(tmp_path, 'v'))
    second = _config(_videos(tmp_path, 'w', seeds=(3, 4)))
    multi_dataset_report([first, second], repeats=2, output_dir=tmp_path / 'agg')
    for dataset in ('dataset0', 'dataset1'):
        for r in range(2):
            assert (tmp_path / 'agg' / dataset / f'run{r}' / 'manifest.json').exists()
    manifest = (tmp_path / 'agg' / 'dataset0' / 'run1' / 'manifest.json').read_text()
    assert '"seed": 4' in manifest


def test_aggregate_needs_two_datasets(tmp_path):
    with pytest.raises(ConfigurationError):
        multi_dataset_report([_config(_videos(tmp_path, 'v'))], repeats=1, output_dir=tmp_path / 'agg')


def test_sweep_rejects_deep_networks(tmp_path):
    with pytest.raises(ConfigurationError):
        hidden_layer_sweep([_config(_videos(tmp_path, 'v'))], layers=(1, 6), repeats=1, output_dir=tmp_path)


@pytest.mark.slow
def test_hidden_layer_sweep(tmp_path):
    config = _config(_videos(tmp_path, 'v', seeds=(1, 2, 3)), schemes=['median', 'regressor'],
                     training={'regressor_max_epochs': 20})
    rows = hidden_layer_sweep([config], layers=(1, 2), repeats=2, output_dir=tmp_path / 'sweep')

    assert [(row.hidden_layers, row.coordinate) for row in rows] == [
        (1, Coordinate.X), (1, Coordinate.Y), (2, Coordinate.X), (2, Coordinate.Y),
    ]
    assert all(row.observations <= 2 for row in rows)
    assert (tmp_path / 'sweep' / 'sweep.csv').exists()
    assert 'MSE gain' in (tmp_path / 'sweep' / 'sweep.md').read_text()


@pytest.mark.slow
def test_aggregate_of_every_scheme(tmp_path):
    schemes = [s.value for s in Scheme]
    training = {'classifier_max_epochs': 40, 'regressor_max_epochs': 40}
    configs = [
        _config(_videos(tmp_path, 'v'), schemes=schemes, training=training),
        _config(_videos(tmp_path, 'w', seeds=(5, 6)), schemes=schemes, training=training),
    ]
    report = multi_dataset_report(configs, repeats=2, output_dir=tmp_path / 'agg')
    medians = [row for row in report.rows if row.scheme is Scheme.MEDIAN and row.category == 3]
    bests = [row for row in report.rows if row.scheme is Scheme.BEST and row.category == 3]
    for median, best in zip(sorted(medians, key=lambda r: r.coordinate.value),
                            sorted(bests, key=lambda r: r.coordinate.value)):
        assert best.metrics['mse'].mean <= median.metrics['mse'].mean


def test_high_motion_config_merges_overrides(tmp_path):
    config = high_motion_config([tmp_path / 'a.y4m', tmp_path / 'b.y4m'], seed=7, output_dir=tmp_path / 'run',
                                motion={'workers': 3}, schemes=['median', 'regressor'])
    assert config.seed == 7
    assert [spec.resolved_source_id for spec in config.inputs] == ['a', 'b']
    assert (config.motion.block_size, config.motion.stride, config.motion.search_range) == (8, 2, 32)
    assert config.motion.workers == 3
    assert config.schemes == [Scheme.MEDIAN, Scheme.REGRESSOR]
    assert config.training.optimizer.learning_rate == 0.01
    assert config.network.regressor_hidden_layers == 1
    assert 'workers' not in HIGH_MOTION_DOCUMENT['motion']


def test_high_motion_scene_moves_fast():
    # stride 2 doubles the per-frame speed
    assert 2 * HIGH_MOTION_SCENE.object_speed <= high_motion_config([]).motion.search_range
    assert HIGH_MOTION_SCENE.pan_velocity == (0, 0)


def test_high_motion_neighbors_disagree(tmp_path):
    """One field of the preset scene: fast vectors, and many blocks whose best neighbor is not the median"""
    scene = HIGH_MOTION_SCENE.model_copy(update={'frames': 3})
    clip = synth_generate(SynthKind.MULTI_OBJECT, scene, 5, tmp_path / 'clip.y4m')
    pipeline = ExperimentPipeline(high_motion_config([clip], output_dir=tmp_path / 'run'))
    samples, statistics = pipeline.extract(pipeline.estimate())

    assert statistics[-1].std_dx >= 15
    assert statistics[-1].std_dy >= 15
    triples = filter_category(samples, 3)
    assert len(triples) > 100
    off_median = 0
    for sample in triples:
        median = median_pmv(sample)
        _, sel_x, sel_y = best_pmv(sample, median)
        off_median += (sel_x != median.arg_x) + (sel_y != median.arg_y)
    assert off_median / (2 * len(triples)) > 0.1


@pytest.fixture(scope='module')
def high_motion_clips(tmp_path_factory):
    return synth_high_motion(tmp_path_factory.mktemp('high_motion'))


@pytest.mark.slow
def test_high_motion_replication(high_motion_clips, tmp_path):
    """Fast independent sprites: best-neighbor coding, regression and classification all beat their baselines"""
    pipeline = ExperimentPipeline(high_motion_config(high_motion_clips, output_dir=tmp_path / 'run',
                                                     motion={'workers': 4}))
    bundle = pipeline.run()
    assert bundle.status == 'ok'
    assert pipeline.stats['train_samples'] >= 20_000
    assert pipeline.stats['test_samples'] >= 2_000

    overall = next(entry for entry in bundle.statistics if entry.source == 'all')
    assert overall.std_dx >= 15
    assert overall.std_dy >= 15

    totals = {row.scheme: row for row in bundle.summary if row.category == 3}
    assert totals[Scheme.BEST].bits_flat < totals[Scheme.MEDIAN].bits

    for coordinate in Coordinate:
        assert bundle.row(Scheme.REGRESSOR, 3, coordinate).improvement['mse'] >= 0.10

    assert [entry.coordinate for entry in bundle.classifier] == [Coordinate.X, Coordinate.Y]
    for entry in bundle.classifier:
        assert entry.val_accuracy > entry.majority_frequency


@pytest.mark.slow
def test_one_hidden_layer_is_enough(high_motion_clips, tmp_path):
    config = high_motion_config(high_motion_clips, motion={'workers': 4}, schemes=['median', 'regressor'])
    rows = hidden_layer_sweep([config], layers=(1, 2), repeats=2, output_dir=tmp_path / 'sweep')

    shallow = [row for row in rows if row.hidden_layers == 1]
    assert [row.coordinate for row in shallow] == [Coordinate.X, Coordinate.Y]
    for row in shallow:
        assert row.observations == 2
        assert row.improvement.mean >= 0.10
