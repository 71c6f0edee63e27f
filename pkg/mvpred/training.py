"""
Network training

Full-batch gradient descent with a seeded validation hold-out, patience-based
early stopping and restoration of the best-validation parameters.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import TrainingConfig
from .data_models import EpochRecord, NormalizationConstants
from .errors import ConfigurationError
from .fcnn import FcnnModel, Head, HEAD_LOSS, LossKind, forward, init_model, layer_chain, loss_and_grad
from .optimizers import apply_step, create_state

logger = logging.getLogger(__name__)


def validation_split(count: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """(train indices, validation indices); with nothing held out both are the full set"""
    order = np.random.default_rng(seed).permutation(count)
    n_val = int(count * fraction)
    if fraction > 0 and count >= 2:
        n_val = min(max(n_val, 1), count - 1)
    if n_val == 0:
        return order, order
    return order[n_val:], order[:n_val]


def accuracy(model: FcnnModel, inputs: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of argmax predictions equal to the labels (argmax ties go to the lowest index)"""
    probs, _ = forward(model, inputs)
    return float(np.mean(np.argmax(probs, axis=1) == np.asarray(labels)))


def train(model: FcnnModel, inputs: np.ndarray, targets: np.ndarray, config: TrainingConfig,
          seed: int, max_epochs: int, loss: Optional[LossKind] = None) -> Tuple[FcnnModel, List[EpochRecord]]:
    """Train ``model`` on the whole (inputs, targets) set and return the best model with its history.

    One optimizer step per epoch over the full training batch; validation loss
    is measured after the step. Training stops after ``max_epochs`` or once the
    validation loss has gone ``patience`` epochs without improving on the
    reference best by more than ``min_delta``.
    """
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets)
    if x.ndim != 2 or len(x) == 0:
        raise ConfigurationError("Training needs a non-empty (samples, features) input matrix")
    if len(y) != len(x):
        raise ConfigurationError(f"{len(x)} inputs but {len(y)} targets")
    if max_epochs < 1:
        raise ConfigurationError(f"max_epochs must be at least 1, got {max_epochs}")
    loss = LossKind(loss) if loss is not None else HEAD_LOSS[model.head]

    train_idx, val_idx = validation_split(len(x), config.validation_fraction, seed)
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    opt = config.optimizer
    state = create_state(opt.kind, model.parameters(), learning_rate=opt.learning_rate, rho=opt.rho,
                         beta=opt.beta, beta1=opt.beta1, beta2=opt.beta2, epsilon=opt.epsilon)

    history: List[EpochRecord] = []
    best_val = math.inf
    best_params = [p.copy() for p in model.parameters()]
    reference = math.inf
    wait = 0

    for epoch in range(1, max_epochs + 1):
        train_loss, grads = loss_and_grad(model, x_train, y_train, loss)
        model = model.with_parameters(apply_step(state, model.parameters(), grads))

        val_loss, _ = loss_and_grad(model, x_val, y_val, loss)
        val_accuracy = accuracy(model, x_val, y_val) if model.head is Head.SOFTMAX3 else None
        history.append(EpochRecord(epoch=epoch, train_loss=train_loss, val_loss=val_loss,
                                   val_accuracy=val_accuracy))

        if val_loss < best_val:
            best_val = val_loss
            best_params = [p.copy() for p in model.parameters()]

        if reference - val_loss > config.min_delta:
            reference = val_loss
            wait = 0
        else:
            wait += 1
            if wait >= config.patience:
                logger.debug(f"Early stop at epoch {epoch}: no improvement over {reference:.6f} for {wait} epochs")
                break

    trained = model.with_parameters(best_params)
    trained.meta = trained.meta.model_copy(update={'epochs_run': len(history), 'final_val_loss': best_val})
    logger.info(f"Trained {trained.head.value} network for {len(history)} epochs, best val loss {best_val:.6f}")
    return trained, history


def fit_network(head: Head, inputs: np.ndarray, targets: np.ndarray, hidden_sizes: Sequence[int],
                norm: NormalizationConstants, config: TrainingConfig, seed: int,
                max_epochs: Optional[int] = None) -> Tuple[FcnnModel, List[EpochRecord]]:
    """Initialize a network for ``head`` from ``seed`` and train it"""
    head = Head(head)
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ConfigurationError("Training needs a non-empty (samples, features) input matrix")
    if max_epochs is None:
        max_epochs = config.classifier_max_epochs if head is Head.SOFTMAX3 else config.regressor_max_epochs
    model = init_model(layer_chain(x.shape[1], hidden_sizes, head), head, seed, norm)
    return train(model, x, targets, config, seed, max_epochs)


def write_history_csv(path: Union[str, Path], history: Iterable[EpochRecord]):
    with open(path, 'w', newline='', encoding='utf-8') as file:
        writer = csv.writer(file)
        writer.writerow(['epoch', 'train_loss', 'val_loss', 'val_accuracy'])
        for record in history:
            writer.writerow([
                record.epoch, repr(record.train_loss), repr(record.val_loss),
                '' if record.val_accuracy is None else repr(record.val_accuracy),
            ])
