"""
Experiment pipeline

Runs estimate -> classify -> extract -> split -> train -> predict -> metrics
for one ExperimentConfig and writes every artifact, the reports and a
manifest with content hashes to the output directory.
"""

import hashlib
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .config import ExperimentConfig, NetworkConfig, TrainingConfig, default_log_dir
from .data_models import (
    ComparisonRow,
    Coordinate,
    EpochRecord,
    MotionStatistics,
    MVField,
    NeighborSample,
    NormalizationConstants,
    Prediction,
    Scheme,
)
from .entropy_coding import SymbolHistogram, build_huffman, encode_stream, write_bitstream
from .errors import ConfigurationError, DataError, MvpredError, StageError
from .fcnn import FcnnModel, Head, save_model
from .motion_field import classify_blocks, estimate_sequence, write_fields_csv
from .neighborhood import (
    class_label,
    extract_samples,
    filter_category,
    fit_normalization,
    median_pmv,
    mv_statistics,
    normalize_sample,
    regression_input,
    regression_target,
    split_dataset,
    write_dataset_csv,
)
from .predictors import BasePredictor, PredictorFactory, write_predictions_csv
from .reporting import (
    ClassifierSummary,
    SummaryRow,
    apply_improvements,
    scheme_rows,
    summary_rows,
    write_comparison_csv,
    write_histograms_csv,
    write_report,
    write_statistics_csv,
    write_summary_csv,
)
from .training import accuracy, fit_network, write_history_csv
from .video_io import open_video

logger = logging.getLogger(__name__)

# Neighbor categories each scheme is defined for
SCHEME_CATEGORIES = {
    Scheme.MEDIAN: (3, 2, 1),
    Scheme.BEST: (3,),
    Scheme.CLASSIFIER: (3,),
    Scheme.REGRESSOR: (3, 2),
}

# Offsets from the run seed for each trained network
NETWORK_SEED_OFFSETS = {
    ('classifier', 3, Coordinate.X): 0,
    ('classifier', 3, Coordinate.Y): 1,
    ('regressor', 3, Coordinate.X): 2,
    ('regressor', 3, Coordinate.Y): 3,
    ('regressor', 2, Coordinate.X): 4,
    ('regressor', 2, Coordinate.Y): 5,
}

HistogramKey = Tuple[Scheme, int, Coordinate]


@contextmanager
def stage(name: str, artifact: Optional[Union[str, Path]] = None) -> Iterator[None]:
    """Re-raise anything escaping a stage as a StageError naming the stage and artifact"""
    try:
        yield
    except StageError:
        raise
    except MvpredError as e:
        logger.error(f"Stage '{name}' failed: {e}")
        raise StageError(name, str(artifact) if artifact else None, e) from e
    except OSError as e:
        logger.error(f"Stage '{name}' failed: {e}")
        raise StageError(name, str(artifact) if artifact else None, DataError(str(e))) from e


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as file:
        for chunk in iter(lambda: file.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(output_dir: Path, config: ExperimentConfig, artifacts: Sequence[Path]) -> Path:
    """manifest.json: config, seed, package version and the SHA-256 of each artifact"""
    manifest = {
        'version': __version__,
        'seed': config.seed,
        'config': config.to_document(),
        'artifacts': {
            path.relative_to(output_dir).as_posix(): file_sha256(path)
            for path in sorted(artifacts)
        },
    }
    path = output_dir / 'manifest.json'
    with open(path, 'w', encoding='utf-8') as file:
        json.dump(manifest, file, indent=2, sort_keys=True)
        file.write('\n')
    return path


def network_seed(seed: int, scheme: str, category: int, coordinate: Coordinate) -> int:
    return seed + NETWORK_SEED_OFFSETS[(scheme, category, coordinate)]


@dataclass
class TrainedNetworks:
    """x/y network pairs available to the evaluation stage"""
    classifier: Optional[Tuple[FcnnModel, FcnnModel]] = None
    regressors: Dict[int, Tuple[FcnnModel, FcnnModel]] = field(default_factory=dict)
    histories: Dict[str, List[EpochRecord]] = field(default_factory=dict)

    def predictor(self, scheme: Scheme, category: int) -> Optional[BasePredictor]:
        """Predictor for ``scheme`` on ``category`` samples, or None when it does not apply or was not trained"""
        scheme = Scheme(scheme)
        if category not in SCHEME_CATEGORIES[scheme]:
            return None
        if scheme in (Scheme.MEDIAN, Scheme.BEST):
            return PredictorFactory.create_predictor(scheme)
        models = self.classifier if scheme is Scheme.CLASSIFIER else self.regressors.get(category)
        if models is None:
            return None
        return PredictorFactory.create_predictor(scheme, {'x': models[0], 'y': models[1]}, category)

    def named_models(self) -> Dict[str, FcnnModel]:
        """File stem -> model"""
        named = {}
        if self.classifier:
            named['classifier_x'], named['classifier_y'] = self.classifier
        for category, (model_x, model_y) in sorted(self.regressors.items(), reverse=True):
            named[f'regressor_c{category}_x'] = model_x
            named[f'regressor_c{category}_y'] = model_y
        return named


def classifier_inputs(samples: Sequence[NeighborSample], norm: NormalizationConstants) -> Tuple[np.ndarray, np.ndarray]:
    """(inputs, labels) with one (label_x, label_y) row per three-neighbor sample"""
    inputs, labels = [], []
    for sample in samples:
        median = median_pmv(sample)
        inputs.append(normalize_sample(sample, norm, median))
        labels.append(class_label(sample, median))
    return np.asarray(inputs, dtype=np.float64), np.asarray(labels, dtype=np.int64)


def regression_inputs(samples: Sequence[NeighborSample], norm: NormalizationConstants) -> Tuple[np.ndarray, np.ndarray]:
    """(inputs, targets) with one (target_x, target_y) row per sample"""
    inputs = [regression_input(sample, norm) for sample in samples]
    targets = [
        (regression_target(sample, norm, Coordinate.X), regression_target(sample, norm, Coordinate.Y))
        for sample in samples
    ]
    return np.asarray(inputs, dtype=np.float64), np.asarray(targets, dtype=np.float64)


def train_classifiers(samples: Sequence[NeighborSample], norm: NormalizationConstants, network: NetworkConfig,
                      training: TrainingConfig, seed: int,
                      max_epochs: Optional[int] = None) -> Tuple[Optional[Tuple[FcnnModel, FcnnModel]], Dict[str, List[EpochRecord]]]:
    subset = filter_category(samples, 3)
    if not subset:
        logger.warning("No three-neighbor training samples; classifier not trained")
        return None, {}
    inputs, labels = classifier_inputs(subset, norm)
    models, histories = [], {}
    for column, coordinate in enumerate((Coordinate.X, Coordinate.Y)):
        model, history = fit_network(Head.SOFTMAX3, inputs, labels[:, column], network.hidden_sizes, norm,
                                     training, network_seed(seed, 'classifier', 3, coordinate), max_epochs)
        models.append(model)
        histories[f'classifier_{coordinate.value}'] = history
    return (models[0], models[1]), histories


def train_regressors(samples: Sequence[NeighborSample], category: int, norm: NormalizationConstants,
                     network: NetworkConfig, training: TrainingConfig, seed: int,
                     max_epochs: Optional[int] = None) -> Tuple[Optional[Tuple[FcnnModel, FcnnModel]], Dict[str, List[EpochRecord]]]:
    if category not in (2, 3):
        raise ConfigurationError(f"Regressors exist for categories 2 and 3, not {category}")
    subset = filter_category(samples, category)
    if not subset:
        logger.warning(f"No category-{category} training samples; regressor not trained")
        return None, {}
    inputs, targets = regression_inputs(subset, norm)
    models, histories = [], {}
    for column, coordinate in enumerate((Coordinate.X, Coordinate.Y)):
        model, history = fit_network(Head.SCALAR, inputs, targets[:, column], network.regressor_hidden_sizes,
                                     norm, training, network_seed(seed, 'regressor', category, coordinate), max_epochs)
        models.append(model)
        histories[f'regressor_c{category}_{coordinate.value}'] = history
    return (models[0], models[1]), histories


def train_networks(train: Sequence[NeighborSample], schemes: Sequence[Scheme], categories: Sequence[int],
                   network: NetworkConfig, training: TrainingConfig, seed: int) -> TrainedNetworks:
    """Train every network the configured schemes and categories need"""
    networks = TrainedNetworks()
    if not any(s in (Scheme.CLASSIFIER, Scheme.REGRESSOR) for s in schemes):
        return networks
    norm = fit_normalization(train)
    logger.info(f"Normalization constants: max |dx| {norm.max_abs_x}, max |dy| {norm.max_abs_y}")

    if Scheme.CLASSIFIER in schemes and 3 in categories:
        networks.classifier, histories = train_classifiers(train, norm, network, training, seed)
        networks.histories.update(histories)
    if Scheme.REGRESSOR in schemes:
        for category in (3, 2):
            if category not in categories:
                continue
            models, histories = train_regressors(train, category, norm, network, training, seed)
            if models:
                networks.regressors[category] = models
            networks.histories.update(histories)
    return networks


@dataclass
class EvaluationResult:
    rows: List[ComparisonRow] = field(default_factory=list)
    histograms: Dict[HistogramKey, SymbolHistogram] = field(default_factory=dict)
    residuals: Dict[HistogramKey, List[int]] = field(default_factory=dict)
    predictions: List[Tuple[Scheme, NeighborSample, Prediction]] = field(default_factory=list)

    @property
    def summary(self) -> List[SummaryRow]:
        return summary_rows(self.rows)


def evaluate(test: Sequence[NeighborSample], schemes: Sequence[Scheme], categories: Sequence[int],
             networks: TrainedNetworks) -> EvaluationResult:
    """Predict every test sample with every applicable scheme and compute the comparison rows"""
    result = EvaluationResult()
    for category in categories:
        subset = filter_category(test, category)
        if not subset:
            logger.warning(f"No category-{category} test samples")
            continue
        for scheme in schemes:
            predictor = networks.predictor(scheme, category)
            if predictor is None:
                continue
            predictions = predictor.predict_all(subset)
            result.predictions.extend((scheme, sample, p) for sample, p in zip(subset, predictions))
            for row, hist in scheme_rows(scheme, category, subset, predictions):
                key = (scheme, category, row.coordinate)
                result.rows.append(row)
                result.histograms[key] = hist
                column = 0 if row.coordinate is Coordinate.X else 1
                result.residuals[key] = [p.residual[column] for p in predictions]
            logger.info(f"Evaluated {scheme.value} on {len(subset)} category-{category} samples")
    result.rows = apply_improvements(result.rows)
    return result


def classifier_summary(networks: TrainedNetworks, test: Sequence[NeighborSample]) -> List[ClassifierSummary]:
    """Test accuracy of each classifier next to the majority-class frequency of its labels"""
    if networks.classifier is None:
        return []
    subset = filter_category(test, 3)
    if not subset:
        return []
    summaries = []
    for column, (coordinate, model) in enumerate(zip((Coordinate.X, Coordinate.Y), networks.classifier)):
        inputs, labels = classifier_inputs(subset, model.norm)
        history = networks.histories.get(f'classifier_{coordinate.value}', [])
        best = min(history, key=lambda record: record.val_loss) if history else None
        summaries.append(ClassifierSummary(
            coordinate=coordinate,
            val_accuracy=best.val_accuracy if best else None,
            test_accuracy=accuracy(model, inputs, labels[:, column]),
            majority_frequency=float(np.bincount(labels[:, column], minlength=3).max() / len(labels)),
            epochs_run=model.meta.epochs_run,
        ))
    return summaries


def write_bitstreams(directory: Path, result: EvaluationResult) -> List[Path]:
    """Huffman-coded residual stream per scheme/category/coordinate in the bitstream dump format"""
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for (scheme, category, coordinate), hist in result.histograms.items():
        bits = encode_stream(result.residuals[(scheme, category, coordinate)], build_huffman(hist))
        path = directory / f'{scheme.value}_c{category}_{coordinate.value}.bin'
        write_bitstream(path, bits)
        paths.append(path)
    return paths


def write_evaluation(output_dir: Path, result: EvaluationResult, settings: Dict[str, str],
                     sample_counts: Dict[int, Tuple[Optional[int], int]], classifier: Sequence[ClassifierSummary] = (),
                     statistics: Sequence[MotionStatistics] = (), status: str = 'ok',
                     dump_bitstreams: bool = False) -> List[Path]:
    """Write predictions, tables, histograms and the Markdown/HTML report; returns the paths written"""
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    if result.predictions:
        path = output_dir / 'predictions.csv'
        write_predictions_csv(path, result.predictions)
        paths.append(path)

    path = output_dir / 'comparison.csv'
    write_comparison_csv(path, result.rows)
    paths.append(path)

    summary = result.summary
    path = output_dir / 'summary.csv'
    write_summary_csv(path, summary)
    paths.append(path)

    path = output_dir / 'histograms.csv'
    write_histograms_csv(path, result.histograms)
    paths.append(path)

    if dump_bitstreams:
        paths.extend(write_bitstreams(output_dir / 'bitstreams', result))

    categories = [
        {
            'category': category,
            'train': train_count,
            'test': test_count,
            'rows': [row for row in result.rows if row.category == category],
        }
        for category, (train_count, test_count) in sorted(sample_counts.items(), reverse=True)
    ]
    paths.extend(write_report(
        output_dir, 'report', 'report.md.j2',
        settings=settings,
        status=status,
        categories=categories,
        summary=summary,
        classifier=list(classifier),
        statistics=list(statistics),
    ))
    return paths


@dataclass
class ReportBundle:
    """Outcome of one pipeline run"""
    status: str
    output_dir: Path
    rows: List[ComparisonRow] = field(default_factory=list)
    summary: List[SummaryRow] = field(default_factory=list)
    classifier: List[ClassifierSummary] = field(default_factory=list)
    statistics: List[MotionStatistics] = field(default_factory=list)
    histograms: Dict[HistogramKey, SymbolHistogram] = field(default_factory=dict)
    artifacts: List[Path] = field(default_factory=list)

    def row(self, scheme: Scheme, category: int, coordinate: Coordinate) -> Optional[ComparisonRow]:
        for row in self.rows:
            if row.scheme is Scheme(scheme) and row.category == category and row.coordinate is Coordinate(coordinate):
                return row
        return None


class ExperimentPipeline:
    """Runs one configured experiment end to end"""

    def __init__(self, config: ExperimentConfig, progress: bool = False):
        self.config = config
        self.progress = progress
        self.output_dir = Path(config.output_dir)
        self.artifacts: List[Path] = []
        self.stats = {
            "inputs": len(config.inputs),
            "fields": 0,
            "samples": 0,
            "train_samples": 0,
            "test_samples": 0,
            "networks_trained": 0,
            "status": None,
            "start_time": None,
            "end_time": None,
        }

    def settings(self) -> Dict[str, str]:
        """Run facts shown at the top of the report"""
        motion, network = self.config.motion, self.config.network
        return {
            'Seed': str(self.config.seed),
            'Inputs': ', '.join(spec.resolved_source_id for spec in self.config.inputs),
            'Block size': str(motion.block_size),
            'Search range': f'±{motion.resolved_search_range}',
            'Stride': str(motion.stride),
            'SAD threshold per pel': str(motion.sad_threshold_per_pel),
            'Quotas (train/test)': f'{self.config.train_quota}/{self.config.test_quota}',
            'Classifier hidden layers': f'{network.hidden_layers} x {network.hidden_width}',
            'Regressor hidden layers': f'{network.regressor_hidden_layers} x {network.hidden_width}',
            'Optimizer': self.config.training.optimizer.kind.value,
            'Schemes': ', '.join(s.value for s in self.config.schemes),
        }

    def estimate(self) -> Dict[str, List[MVField]]:
        """Motion fields per source, classified into MC and non-MC blocks"""
        motion = self.config.motion
        fields_dir = self.output_dir / 'fields'
        fields_dir.mkdir(parents=True, exist_ok=True)

        source_ids = [spec.resolved_source_id for spec in self.config.inputs]
        if len(set(source_ids)) != len(source_ids):
            raise StageError('estimate', None, ConfigurationError(f"Duplicate source ids: {source_ids}"))

        fields_by_source = {}
        for spec in self.config.inputs:
            source_id = spec.resolved_source_id
            with stage('estimate', spec.path):
                with open_video(spec.path, spec.format.value, spec.width, spec.height) as frames:
                    fields = estimate_sequence(frames, stride=motion.stride, block_size=motion.block_size,
                                               search_range=motion.resolved_search_range,
                                               workers=motion.workers, progress=self.progress)
            path = fields_dir / f'{source_id}.csv'
            with stage('classify', path):
                fields = [classify_blocks(f, motion.sad_threshold_per_pel) for f in fields]
                write_fields_csv(path, fields)
            self.artifacts.append(path)
            fields_by_source[source_id] = fields
            self.stats["fields"] += len(fields)
        return fields_by_source

    def extract(self, fields_by_source: Dict[str, List[MVField]]) -> Tuple[List[NeighborSample], List[MotionStatistics]]:
        samples, statistics = [], []
        path = self.output_dir / 'dataset.csv'
        with stage('extract', path):
            for source_id, fields in fields_by_source.items():
                source_samples = extract_samples(fields, source_id)
                if source_samples:
                    statistics.append(mv_statistics(source_samples, source_id))
                samples.extend(source_samples)
            write_dataset_csv(path, samples)
        self.artifacts.append(path)
        if samples:
            statistics.append(mv_statistics(samples, 'all'))
            stats_path = self.output_dir / 'statistics.csv'
            write_statistics_csv(stats_path, statistics)
            self.artifacts.append(stats_path)
        self.stats["samples"] = len(samples)
        return samples, statistics

    def split(self, samples: List[NeighborSample]) -> Tuple[List[NeighborSample], List[NeighborSample]]:
        with stage('split', self.output_dir / 'train.csv'):
            train, test = split_dataset(samples, self.config.train_quota, self.config.test_quota, self.config.seed)
            for name, subset in (('train', train), ('test', test)):
                path = self.output_dir / f'{name}.csv'
                write_dataset_csv(path, subset)
                self.artifacts.append(path)
        self.stats["train_samples"], self.stats["test_samples"] = len(train), len(test)
        return train, test

    def train(self, train: List[NeighborSample]) -> TrainedNetworks:
        models_dir = self.output_dir / 'models'
        with stage('train', models_dir):
            networks = train_networks(train, self.config.schemes, self.config.categories,
                                      self.config.network, self.config.training, self.config.seed)
            named = networks.named_models()
            if named:
                models_dir.mkdir(parents=True, exist_ok=True)
            for name, model in named.items():
                path = models_dir / f'{name}.json'
                save_model(model, path)
                self.artifacts.append(path)
            for name, history in networks.histories.items():
                path = models_dir / f'{name}_history.csv'
                write_history_csv(path, history)
                self.artifacts.append(path)
        self.stats["networks_trained"] = len(named)
        return networks

    def _finish(self, status: str, **report) -> ReportBundle:
        self.artifacts.append(write_manifest(self.output_dir, self.config, self.artifacts))
        self.stats["status"] = status
        self.stats["end_time"] = datetime.now()
        duration = (self.stats["end_time"] - self.stats["start_time"]).total_seconds()
        logger.info(f"Pipeline finished with status '{status}' in {duration:.2f} seconds")
        logger.info(f"Samples: {self.stats['samples']} (train {self.stats['train_samples']}, "
                    f"test {self.stats['test_samples']}); networks trained: {self.stats['networks_trained']}")
        self.save_summary()
        return ReportBundle(status=status, output_dir=self.output_dir, artifacts=list(self.artifacts), **report)

    def save_summary(self):
        """Run statistics go to the log directory, keeping the output directory reproducible"""
        log_dir = default_log_dir()
        summary_file = log_dir / f"run_summary_{datetime.now().strftime('%Y%m%d_%H%M%S')}.json"
        try:
            log_dir.mkdir(parents=True, exist_ok=True)
            with open(summary_file, 'w', encoding='utf-8') as file:
                json.dump(self.stats, file, indent=2, default=str)
        except OSError as e:
            logger.error(f"Error saving run summary: {str(e)}")

    def run(self) -> ReportBundle:
        self.stats["start_time"] = datetime.now()
        self.artifacts = []
        if not self.config.inputs:
            raise ConfigurationError("The experiment config lists no inputs")
        self.output_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Running experiment with seed {self.config.seed} into {self.output_dir}")

        fields_by_source = self.estimate()
        samples, statistics = self.extract(fields_by_source)
        if not samples:
            logger.warning("No samples extracted; nothing to evaluate")
            with stage('report', self.output_dir / 'report.md'):
                self.artifacts.extend(write_report(
                    self.output_dir, 'report', 'report.md.j2', settings=self.settings(), status='no_samples',
                    categories=[], summary=[], classifier=[], statistics=[],
                ))
            return self._finish('no_samples')

        train, test = self.split(samples)
        networks = self.train(train)

        with stage('predict', self.output_dir / 'predictions.csv'):
            result = evaluate(test, self.config.schemes, self.config.categories, networks)
            classifier = classifier_summary(networks, test)

        sample_counts = {
            category: (len(filter_category(train, category)), len(filter_category(test, category)))
            for category in self.config.categories
        }
        with stage('metrics', self.output_dir / 'report.md'):
            self.artifacts.extend(write_evaluation(
                self.output_dir, result, self.settings(), sample_counts, classifier, statistics,
                dump_bitstreams=self.config.dump_bitstreams,
            ))
        return self._finish('ok', rows=result.rows, summary=result.summary, classifier=classifier,
                            statistics=statistics, histograms=result.histograms)


def run_pipeline(config: ExperimentConfig, progress: bool = False) -> ReportBundle:
    return ExperimentPipeline(config, progress=progress).run()
