"""
Command-line interface

    mvpred synth     write a synthetic Y4M sequence
    mvpred estimate  motion fields of one video as CSV
    mvpred extract   neighbor dataset and source-disjoint train/test split
    mvpred train     classifier or regressor networks
    mvpred evaluate  predictions, comparison tables and report for a test set
    mvpred report    full pipeline from a config, or the multi-dataset aggregate
    mvpred sweep     hidden-layer sweep of the regression networks

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from .config import ExperimentConfig, TrainingConfig, default_output_dir, load_environment, setup_logging
from .data_models import Scheme
from .errors import ConfigurationError, DataError, MvpredError
from .experiments import DEFAULT_REPEATS, hidden_layer_sweep, multi_dataset_report
from .fcnn import load_model, save_model
from .motion_field import classify_blocks, estimate_sequence, read_fields_csv, write_fields_csv
from .neighborhood import (
    extract_samples,
    filter_category,
    fit_normalization,
    mv_statistics,
    read_dataset_csv,
    split_dataset,
    write_dataset_csv,
)
from .optimizers import OptimizerKind
from .pipeline import (
    TrainedNetworks,
    classifier_summary,
    evaluate,
    run_pipeline,
    train_classifiers,
    train_regressors,
    write_evaluation,
)
from .reporting import write_statistics_csv
from .synth import SynthKind, SynthParams, synth_generate
from .training import write_history_csv
from .video_io import open_video

logger = logging.getLogger(__name__)


def _set(document: dict, dotted: str, value):
    """Set a nested config key when the flag was given"""
    if value is None:
        return
    *parents, leaf = dotted.split('.')
    for key in parents:
        document = document.setdefault(key, {})
    document[leaf] = value


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config from --config (if any) with the command-line flags layered on top"""
    config = ExperimentConfig.from_json(args.config) if getattr(args, 'config', None) else ExperimentConfig()
    document = config.model_dump(mode='json')
    overrides = {
        'seed': 'seed',
        'block_size': 'motion.block_size',
        'search_range': 'motion.search_range',
        'stride': 'motion.stride',
        'sad_threshold': 'motion.sad_threshold_per_pel',
        'workers': 'motion.workers',
        'train_quota': 'train_quota',
        'test_quota': 'test_quota',
        'hidden_layers': 'network.hidden_layers',
        'regressor_hidden_layers': 'network.regressor_hidden_layers',
        'hidden_width': 'network.hidden_width',
        'optimizer': 'training.optimizer.kind',
        'learning_rate': 'training.optimizer.learning_rate',
        'patience': 'training.patience',
        'min_delta': 'training.min_delta',
        'output_dir': 'output_dir',
    }
    for flag, dotted in overrides.items():
        value = getattr(args, flag, None)
        _set(document, dotted, str(value) if isinstance(value, Path) else value)
    return ExperimentConfig.from_dict(document)


def _add_motion_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--block-size', dest='block_size', type=int, choices=(4, 8, 16))
    parser.add_argument('--search-range', dest='search_range', type=int,
                        help='±pels (default 16, or 48 when stride > 1)')
    parser.add_argument('--stride', type=int, help='Frame stride; > 1 gives the fast-forward regime')
    parser.add_argument('--sad-threshold', dest='sad_threshold', type=float,
                        help='SAD per pel above which a block is non motion-compensated')
    parser.add_argument('--workers', type=int, help='Frame pairs searched in parallel')


def _add_network_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--hidden-layers', dest='hidden_layers', type=int, help='Classifier depth (default 5)')
    parser.add_argument('--regressor-hidden-layers', dest='regressor_hidden_layers', type=int,
                        help='Regressor depth (default 1)')
    parser.add_argument('--hidden-width', dest='hidden_width', type=int)
    parser.add_argument('--optimizer', choices=[k.value for k in OptimizerKind])
    parser.add_argument('--learning-rate', dest='learning_rate', type=float)
    parser.add_argument('--patience', type=int)
    parser.add_argument('--min-delta', dest='min_delta', type=float)


def cmd_synth(args: argparse.Namespace):
    try:
        params = SynthParams(
            width=args.width,
            height=args.height,
            frames=args.frames,
            pan_velocity=tuple(args.pan),
            objects=args.objects,
            object_speed=args.object_speed,
            texture_strength=args.texture,
            noise_sigma=args.noise,
        )
    except ValidationError as e:
        raise ConfigurationError(f"Invalid synthesis parameters: {e}") from e
    synth_generate(args.kind, params, args.seed, args.output, progress=True)


def cmd_estimate(args: argparse.Namespace):
    config = build_config(args)
    motion = config.motion
    with open_video(args.input, args.format, args.width, args.height) as frames:
        fields = estimate_sequence(frames, stride=motion.stride, block_size=motion.block_size,
                                   search_range=motion.resolved_search_range, workers=motion.workers,
                                   progress=True)
    fields = [classify_blocks(f, motion.sad_threshold_per_pel) for f in fields]
    rows = write_fields_csv(args.output, fields)
    logger.info(f"Wrote {len(fields)} fields ({rows} blocks) to {args.output}")


def cmd_extract(args: argparse.Namespace):
    output_dir = Path(args.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    samples, statistics = [], []
    for path in args.fields:
        source_id = Path(path).stem
        source_samples = extract_samples(read_fields_csv(path, args.block_size), source_id)
        if source_samples:
            statistics.append(mv_statistics(source_samples, source_id))
        samples.extend(source_samples)

    write_dataset_csv(output_dir / 'dataset.csv', samples)
    if not samples:
        logger.warning("No samples extracted")
        return
    statistics.append(mv_statistics(samples, 'all'))
    write_statistics_csv(output_dir / 'statistics.csv', statistics)
    train, test = split_dataset(samples, args.train_quota, args.test_quota, args.seed)
    write_dataset_csv(output_dir / 'train.csv', train)
    write_dataset_csv(output_dir / 'test.csv', test)


def cmd_train(args: argparse.Namespace):
    config = build_config(args)
    samples = read_dataset_csv(args.train)
    if not samples:
        raise ConfigurationError(f"{args.train} holds no training samples")
    training = config.training
    if args.max_epochs is not None:
        field = 'classifier_max_epochs' if args.scheme == Scheme.CLASSIFIER.value else 'regressor_max_epochs'
        try:
            training = TrainingConfig.model_validate({**training.model_dump(), field: args.max_epochs})
        except ValidationError as e:
            raise ConfigurationError(f"Invalid --max-epochs: {e}") from e

    norm = fit_normalization(samples)
    if args.scheme == Scheme.CLASSIFIER.value:
        models, histories = train_classifiers(samples, norm, config.network, training, args.seed)
        stem = 'classifier'
    else:
        models, histories = train_regressors(samples, args.category, norm, config.network, training, args.seed)
        stem = f'regressor_c{args.category}'
    if models is None:
        raise ConfigurationError(f"No samples of the category the {args.scheme} needs")

    output_dir = Path(args.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    for suffix, model in zip(('x', 'y'), models):
        save_model(model, output_dir / f'{stem}_{suffix}.json')
    for name, history in histories.items():
        write_history_csv(output_dir / f'{name}_history.csv', history)
    logger.info(f"Saved {stem} networks to {output_dir}")


def cmd_evaluate(args: argparse.Namespace):
    test = read_dataset_csv(args.test)
    networks = TrainedNetworks()
    if args.classifier:
        networks.classifier = (load_model(args.classifier[0]), load_model(args.classifier[1]))
    if args.regressor:
        networks.regressors[3] = (load_model(args.regressor[0]), load_model(args.regressor[1]))
    if args.regressor_c2:
        networks.regressors[2] = (load_model(args.regressor_c2[0]), load_model(args.regressor_c2[1]))

    schemes = [Scheme(s) for s in args.schemes]
    if Scheme.MEDIAN not in schemes:
        schemes.insert(0, Scheme.MEDIAN)
    categories = sorted(set(args.categories), reverse=True)
    result = evaluate(test, schemes, categories, networks)
    settings = {
        'Test set': str(args.test),
        'Schemes': ', '.join(s.value for s in schemes),
    }
    sample_counts = {category: (None, len(filter_category(test, category))) for category in categories}
    write_evaluation(Path(args.output_dir), result, settings, sample_counts,
                     classifier_summary(networks, test), dump_bitstreams=args.dump_bitstreams)
    logger.info(f"Evaluation written to {args.output_dir}")


def cmd_report(args: argparse.Namespace):
    if len(args.config) == 1:
        config = build_config(argparse.Namespace(**{**vars(args), 'config': args.config[0]}))
        bundle = run_pipeline(config, progress=True)
        logger.info(f"Report status '{bundle.status}' in {bundle.output_dir}")
        return
    configs = [ExperimentConfig.from_json(path) for path in args.config]
    multi_dataset_report(configs, args.repeats, args.output_dir)


def cmd_sweep(args: argparse.Namespace):
    configs = [ExperimentConfig.from_json(path) for path in args.config]
    rows = hidden_layer_sweep(configs, args.layers, args.repeats, args.output_dir)
    for row in rows:
        logger.info(f"{row.hidden_layers} hidden layer(s), {row.coordinate.value}: "
                    f"MSE gain {row.improvement.formatted()}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='mvpred', description='Motion-vector prediction lab')
    parser.add_argument('--log-level', dest='log_level', help='Overrides MVPRED_LOG_LEVEL')
    commands = parser.add_subparsers(dest='command', required=True)

    synth = commands.add_parser('synth', help='Write a synthetic Y4M sequence')
    synth.add_argument('--kind', required=True, choices=[k.value for k in SynthKind])
    synth.add_argument('--output', required=True, type=Path)
    synth.add_argument('--seed', type=int, default=0)
    synth.add_argument('--width', type=int, default=176)
    synth.add_argument('--height', type=int, default=144)
    synth.add_argument('--frames', type=int, default=30)
    synth.add_argument('--pan', type=int, nargs=2, default=(2, 0), metavar=('VX', 'VY'))
    synth.add_argument('--objects', type=int, default=4)
    synth.add_argument('--object-speed', dest='object_speed', type=int, default=6)
    synth.add_argument('--texture', type=float, default=1.0, help='0 gives a flat background')
    synth.add_argument('--noise', type=float, default=None, help='Per-frame noise sigma')
    synth.set_defaults(handler=cmd_synth)

    estimate = commands.add_parser('estimate', help='Motion fields of one video')
    estimate.add_argument('--input', required=True, type=Path)
    estimate.add_argument('--format', choices=('y4m', 'yuv'), default='y4m')
    estimate.add_argument('--width', type=int)
    estimate.add_argument('--height', type=int)
    estimate.add_argument('--output', required=True, type=Path, help='Fields CSV')
    estimate.add_argument('--config', type=Path)
    _add_motion_flags(estimate)
    estimate.set_defaults(handler=cmd_estimate)

    extract = commands.add_parser('extract', help='Neighbor dataset and train/test split')
    extract.add_argument('--fields', required=True, nargs='+', type=Path, help='Fields CSVs, one per source')
    extract.add_argument('--seed', required=True, type=int)
    extract.add_argument('--block-size', dest='block_size', type=int, default=16, choices=(4, 8, 16))
    extract.add_argument('--train-quota', dest='train_quota', type=int, default=50_000)
    extract.add_argument('--test-quota', dest='test_quota', type=int, default=2_000)
    extract.add_argument('--output-dir', dest='output_dir', type=Path, default=default_output_dir())
    extract.set_defaults(handler=cmd_extract)

    train = commands.add_parser('train', help='Train classifier or regressor networks')
    train.add_argument('--train', required=True, type=Path, help='Training dataset CSV')
    train.add_argument('--scheme', required=True, choices=(Scheme.CLASSIFIER.value, Scheme.REGRESSOR.value))
    train.add_argument('--category', type=int, default=3, choices=(2, 3), help='Regressor neighbor category')
    train.add_argument('--seed', required=True, type=int)
    train.add_argument('--max-epochs', dest='max_epochs', type=int)
    train.add_argument('--config', type=Path)
    train.add_argument('--output-dir', dest='output_dir', type=Path, default=default_output_dir() / 'models')
    _add_network_flags(train)
    train.set_defaults(handler=cmd_train)

    evaluate_parser = commands.add_parser('evaluate', help='Compare schemes on a test set')
    evaluate_parser.add_argument('--test', required=True, type=Path, help='Test dataset CSV')
    evaluate_parser.add_argument('--schemes', nargs='+', default=[s.value for s in Scheme],
                                 choices=[s.value for s in Scheme])
    evaluate_parser.add_argument('--categories', nargs='+', type=int, default=[3, 2, 1], choices=(1, 2, 3))
    evaluate_parser.add_argument('--classifier', nargs=2, type=Path, metavar=('X', 'Y'))
    evaluate_parser.add_argument('--regressor', nargs=2, type=Path, metavar=('X', 'Y'))
    evaluate_parser.add_argument('--regressor-c2', dest='regressor_c2', nargs=2, type=Path, metavar=('X', 'Y'))
    evaluate_parser.add_argument('--dump-bitstreams', dest='dump_bitstreams', action='store_true')
    evaluate_parser.add_argument('--output-dir', dest='output_dir', type=Path, default=default_output_dir())
    evaluate_parser.set_defaults(handler=cmd_evaluate)

    report = commands.add_parser('report', help='Run the pipeline, or aggregate several datasets')
    report.add_argument('--config', required=True, nargs='+', type=Path)
    report.add_argument('--repeats', type=int, default=DEFAULT_REPEATS)
    report.add_argument('--seed', type=int)
    report.add_argument('--output-dir', dest='output_dir', type=Path)
    report.set_defaults(handler=cmd_report)

    sweep = commands.add_parser('sweep', help='Hidden-layer sweep of the regression networks')
    sweep.add_argument('--config', required=True, nargs='+', type=Path)
    sweep.add_argument('--layers', nargs='+', type=int, default=[1, 2, 3, 4, 5])
    sweep.add_argument('--repeats', type=int, default=DEFAULT_REPEATS)
    sweep.add_argument('--output-dir', dest='output_dir', type=Path)
    sweep.set_defaults(handler=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_environment()
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level)
    try:
        args.handler(args)
    except MvpredError as e:
        logger.error(str(e))
        return e.exit_code
    except OSError as e:
        logger.error(str(e))
        return DataError.exit_code
    return 0


if __name__ == '__main__':
    sys.exit(main())
