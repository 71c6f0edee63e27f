"""
PMV predictors

Four ways of predicting a block's MV from its causal neighbors:
- median: component-wise median (the baseline)
- best: per-coordinate closest neighbor, with a MEDIAN/LOWER/HIGHER signal
- classifier: softmax networks choosing a neighbor per coordinate, no signaling
- regressor: scalar networks estimating each coordinate directly
"""

import csv
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .data_models import MedianResult, MotionVector, NeighborSample, Prediction, Scheme, Signal
from .errors import CategoryError, ConfigurationError, FormatError
from .fcnn import FcnnModel, Head, forward
from .neighborhood import NORM_SCALE, best_pmv, median_pmv, normalize_sample, regression_input

logger = logging.getLogger(__name__)

PREDICTION_CSV_HEADER = ['scheme', 'source', 'gtx', 'gty', 'pmvx', 'pmvy', 'dx', 'dy', 'sigx', 'sigy']


def _check_heads(head: Head, *models: FcnnModel):
    for model in models:
        if model.head is not head:
            raise ConfigurationError(f"Expected a {head.value} network, got {model.head.value}")


def _side(selected: int, median: int) -> Signal:
    if selected == median:
        return Signal.MEDIAN
    return Signal.LOWER if selected < median else Signal.HIGHER


def predict_median(sample: NeighborSample) -> Prediction:
    pmv = median_pmv(sample).pmv
    return Prediction(pmv=pmv, residual=pmv - sample.gt)


def predict_best(sample: NeighborSample) -> Prediction:
    """Best-neighbor PMV plus the per-coordinate signal a decoder needs to find it"""
    if sample.category != 3:
        raise CategoryError(f"Best PMV needs three neighbors, got {sample.category}")
    median = median_pmv(sample)
    pmv, _, _ = best_pmv(sample, median)
    return Prediction(
        pmv=pmv,
        residual=pmv - sample.gt,
        signal_x=_side(pmv.dx, median.pmv.dx),
        signal_y=_side(pmv.dy, median.pmv.dy),
    )


def _reconstruct_component(values: Sequence[int], signal: Signal) -> int:
    ordered = sorted(values)
    signal = Signal(signal)
    if signal is Signal.MEDIAN:
        return ordered[1]
    if signal is Signal.LOWER:
        return ordered[0]
    if signal is Signal.HIGHER:
        return ordered[2]
    raise ValueError("Best-PMV reconstruction needs a MEDIAN, LOWER or HIGHER signal")


def reconstruct_best(neighbors: Sequence[MotionVector], signal_x: Signal, signal_y: Signal) -> MotionVector:
    """Decoder side of the best-PMV scheme: recover the PMV from the three neighbors and the signals.

    Below the median there is only the smallest value, above it only the largest.
    """
    if len(neighbors) != 3:
        raise CategoryError(f"Best-PMV reconstruction needs three neighbors, got {len(neighbors)}")
    return MotionVector(
        _reconstruct_component([mv.dx for mv in neighbors], signal_x),
        _reconstruct_component([mv.dy for mv in neighbors], signal_y),
    )


def predict_classifier(sample: NeighborSample, model_x: FcnnModel, model_y: FcnnModel,
                       median: Optional[MedianResult] = None) -> Prediction:
    """Neighbor picked by the argmax of each coordinate's classifier"""
    _check_heads(Head.SOFTMAX3, model_x, model_y)
    if sample.category != 3:
        raise CategoryError(f"Classifier needs three neighbors, got {sample.category}")
    median = median or median_pmv(sample)
    vectors = sample.vectors
    probs_x, _ = forward(model_x, normalize_sample(sample, model_x.norm, median))
    probs_y, _ = forward(model_y, normalize_sample(sample, model_y.norm, median))
    pmv = MotionVector(vectors[int(np.argmax(probs_x))].dx, vectors[int(np.argmax(probs_y))].dy)
    return Prediction(pmv=pmv, residual=pmv - sample.gt)


def round_half_away(value: float) -> int:
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


def denormalize(output: float, bound: int) -> float:
    return output * bound / NORM_SCALE


def predict_regressor(sample: NeighborSample, model_x: FcnnModel, model_y: FcnnModel) -> Prediction:
    """Rounded, clamped regression estimate; ``raw`` keeps the unrounded values"""
    _check_heads(Head.SCALAR, model_x, model_y)
    if sample.category == 1:
        raise CategoryError("Regression is undefined for one-neighbor blocks; use the median")
    if sample.category not in (2, 3):
        raise CategoryError(f"Regression needs two or three neighbors, got {sample.category}")

    bound_x, bound_y = model_x.norm.max_abs_x, model_y.norm.max_abs_y
    out_x, _ = forward(model_x, regression_input(sample, model_x.norm))
    out_y, _ = forward(model_y, regression_input(sample, model_y.norm))
    raw_x = denormalize(float(out_x[0]), bound_x)
    raw_y = denormalize(float(out_y[0]), bound_y)
    pmv = MotionVector(
        min(max(round_half_away(raw_x), -bound_x), bound_x),
        min(max(round_half_away(raw_y), -bound_y), bound_y),
    )
    return Prediction(pmv=pmv, residual=pmv - sample.gt, raw=(raw_x, raw_y))


class BasePredictor(ABC):
    """Base class for all PMV schemes"""

    scheme: Scheme
    categories: Tuple[int, ...] = (3,)

    def supports(self, sample: NeighborSample) -> bool:
        return sample.category in self.categories

    @abstractmethod
    def predict(self, sample: NeighborSample) -> Prediction:
        """Predict the sample's MV"""
        pass

    def predict_all(self, samples: Iterable[NeighborSample]) -> List[Prediction]:
        return [self.predict(sample) for sample in samples]


class MedianPredictor(BasePredictor):
    scheme = Scheme.MEDIAN
    categories = (3, 2, 1)

    def predict(self, sample: NeighborSample) -> Prediction:
        return predict_median(sample)


class BestPredictor(BasePredictor):
    scheme = Scheme.BEST

    def predict(self, sample: NeighborSample) -> Prediction:
        return predict_best(sample)


class ClassifierPredictor(BasePredictor):
    scheme = Scheme.CLASSIFIER

    def __init__(self, model_x: FcnnModel, model_y: FcnnModel):
        _check_heads(Head.SOFTMAX3, model_x, model_y)
        self.model_x = model_x
        self.model_y = model_y

    def predict(self, sample: NeighborSample) -> Prediction:
        return predict_classifier(sample, self.model_x, self.model_y)


class RegressorPredictor(BasePredictor):
    """Regression networks trained for one neighbor category"""
    scheme = Scheme.REGRESSOR

    def __init__(self, model_x: FcnnModel, model_y: FcnnModel, category: int = 3):
        _check_heads(Head.SCALAR, model_x, model_y)
        if category not in (2, 3):
            raise ConfigurationError(f"Regressors exist for categories 2 and 3, not {category}")
        self.model_x = model_x
        self.model_y = model_y
        self.categories = (category,)

    def predict(self, sample: NeighborSample) -> Prediction:
        return predict_regressor(sample, self.model_x, self.model_y)


class PredictorFactory:
    """Factory class for creating predictors"""

    @staticmethod
    def create_predictor(scheme: Scheme, models: Optional[Dict[str, FcnnModel]] = None,
                         category: int = 3) -> BasePredictor:
        """Create a predictor; network schemes take their models from ``models['x']`` and ``models['y']``"""
        scheme = Scheme(scheme)
        models = models or {}
        if scheme is Scheme.MEDIAN:
            return MedianPredictor()
        elif scheme is Scheme.BEST:
            return BestPredictor()
        if 'x' not in models or 'y' not in models:
            raise ConfigurationError(f"The {scheme.value} scheme needs trained x and y networks")
        if scheme is Scheme.CLASSIFIER:
            return ClassifierPredictor(models['x'], models['y'])
        return RegressorPredictor(models['x'], models['y'], category)


@dataclass(frozen=True)
class PredictionRow:
    """One line of a prediction dump"""
    scheme: Scheme
    source: str
    gt: MotionVector
    pmv: MotionVector
    residual: Tuple[int, int]
    signal_x: Signal
    signal_y: Signal


def write_predictions_csv(path: Union[str, Path],
                          entries: Iterable[Tuple[Scheme, NeighborSample, Prediction]]) -> int:
    count = 0
    with open(path, 'w', newline='', encoding='utf-8') as file:
        writer = csv.writer(file)
        writer.writerow(PREDICTION_CSV_HEADER)
        for scheme, sample, prediction in entries:
            writer.writerow([
                Scheme(scheme).value, sample.source_id,
                sample.gt.dx, sample.gt.dy,
                prediction.pmv.dx, prediction.pmv.dy,
                prediction.residual[0], prediction.residual[1],
                prediction.signal_x.value, prediction.signal_y.value,
            ])
            count += 1
    return count


def read_predictions_csv(path: Union[str, Path]) -> List[PredictionRow]:
    rows = []
    with open(path, 'r', newline='', encoding='utf-8') as file:
        reader = csv.DictReader(file)
        if reader.fieldnames != PREDICTION_CSV_HEADER:
            raise FormatError(f"{path}: expected header {','.join(PREDICTION_CSV_HEADER)}", key='header')
        for line_number, row in enumerate(reader, start=2):
            try:
                rows.append(PredictionRow(
                    scheme=Scheme(row['scheme']),
                    source=row['source'],
                    gt=MotionVector(int(row['gtx']), int(row['gty'])),
                    pmv=MotionVector(int(row['pmvx']), int(row['pmvy'])),
                    residual=(int(row['dx']), int(row['dy'])),
                    signal_x=Signal(row['sigx']),
                    signal_y=Signal(row['sigy']),
                ))
            except (TypeError, ValueError) as e:
                raise FormatError(f"{path}: bad prediction at line {line_number}: {e}") from None
    return rows
