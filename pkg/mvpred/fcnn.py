"""
Fully connected networks

Small tanh networks with a softmax-3 (classification) or scalar (regression)
head: seeded initialization, batched forward pass, analytic gradients of the
cross-entropy and Euclidean losses, and a versioned JSON model file.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .data_models import NormalizationConstants
from .errors import ConfigurationError, FormatError, ShapeError

logger = logging.getLogger(__name__)

MODEL_FILE_VERSION = 1


class Head(str, Enum):
    SOFTMAX3 = "softmax-3"
    SCALAR = "scalar"


class Activation(str, Enum):
    TANH = "tanh"
    LINEAR = "linear"


class LossKind(str, Enum):
    CROSS_ENTROPY = "cross_entropy"
    EUCLIDEAN = "euclidean"


HEAD_OUTPUTS = {Head.SOFTMAX3: 3, Head.SCALAR: 1}
HEAD_LOSS = {Head.SOFTMAX3: LossKind.CROSS_ENTROPY, Head.SCALAR: LossKind.EUCLIDEAN}


class TrainingMeta(BaseModel):
    seed: int = 0
    epochs_run: int = Field(default=0, ge=0)
    final_val_loss: Optional[float] = None


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray     # (out,)
    activation: Activation

    @property
    def in_features(self) -> int:
        return self.weights.shape[1]

    @property
    def out_features(self) -> int:
        return self.weights.shape[0]


@dataclass
class FcnnModel:
    layers: List[DenseLayer]
    head: Head
    norm: NormalizationConstants
    meta: TrainingMeta = field(default_factory=TrainingMeta)

    def __post_init__(self):
        if not self.layers:
            raise ConfigurationError("A network needs at least one layer")
        for k in range(1, len(self.layers)):
            if self.layers[k].in_features != self.layers[k - 1].out_features:
                raise ConfigurationError(
                    f"Layer {k} takes {self.layers[k].in_features} inputs but layer {k - 1} "
                    f"produces {self.layers[k - 1].out_features}"
                )
        expected = HEAD_OUTPUTS[Head(self.head)]
        if self.layers[-1].out_features != expected:
            raise ConfigurationError(
                f"{Head(self.head).value} head needs {expected} outputs, final layer has {self.layers[-1].out_features}"
            )

    @property
    def input_size(self) -> int:
        return self.layers[0].in_features

    @property
    def hidden_sizes(self) -> List[int]:
        return [layer.out_features for layer in self.layers[:-1]]

    def parameters(self) -> List[np.ndarray]:
        """[W1, b1, W2, b2, ...]"""
        params = []
        for layer in self.layers:
            params.extend((layer.weights, layer.bias))
        return params

    def with_parameters(self, params: Sequence[np.ndarray]) -> "FcnnModel":
        layers = [
            DenseLayer(weights=np.array(params[2 * k], dtype=np.float64),
                       bias=np.array(params[2 * k + 1], dtype=np.float64),
                       activation=layer.activation)
            for k, layer in enumerate(self.layers)
        ]
        return replace(self, layers=layers)


def init_model(layer_sizes: Sequence[int], head: Head, seed: int,
               norm: Optional[NormalizationConstants] = None) -> FcnnModel:
    """Glorot-uniform weights from a seeded generator, zero biases.

    ``layer_sizes`` is the full chain, e.g. [8, 8, 8, 8, 8, 8, 3] for five
    hidden layers of width 8 in front of a softmax-3 head. Hidden layers use
    tanh, the last layer is linear.
    """
    head = Head(head)
    if len(layer_sizes) < 2 or any(int(size) <= 0 for size in layer_sizes):
        raise ConfigurationError(f"Invalid layer chain {list(layer_sizes)}")
    if layer_sizes[-1] != HEAD_OUTPUTS[head]:
        raise ConfigurationError(f"{head.value} head needs {HEAD_OUTPUTS[head]} outputs, chain ends in {layer_sizes[-1]}")

    rng = np.random.default_rng(seed)
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        layers.append(DenseLayer(
            weights=rng.uniform(-limit, limit, size=(fan_out, fan_in)),
            bias=np.zeros(fan_out, dtype=np.float64),
            activation=Activation.LINEAR if k == len(layer_sizes) - 2 else Activation.TANH,
        ))
    return FcnnModel(layers=layers, head=head,
                     norm=norm or NormalizationConstants(max_abs_x=1, max_abs_y=1),
                     meta=TrainingMeta(seed=seed))


def layer_chain(input_size: int, hidden_sizes: Sequence[int], head: Head) -> List[int]:
    return [input_size, *hidden_sizes, HEAD_OUTPUTS[Head(head)]]


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


@dataclass
class ForwardCache:
    inputs: List[np.ndarray]  # input to each layer
    pre: List[np.ndarray]     # affine output of each layer
    post: List[np.ndarray]    # activation output of each layer


def forward(model: FcnnModel, inputs: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
    """Network output for one input vector or a (batch, features) matrix.

    softmax-3 heads return probabilities; scalar heads return the raw linear value.
    """
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != model.input_size:
        raise ShapeError(f"Network expects {model.input_size} inputs, got shape {x.shape}")

    cache = ForwardCache(inputs=[], pre=[], post=[])
    activation = batch
    for layer in model.layers:
        cache.inputs.append(activation)
        z = activation @ layer.weights.T + layer.bias
        activation = np.tanh(z) if layer.activation is Activation.TANH else z
        cache.pre.append(z)
        cache.post.append(activation)

    output = softmax(activation) if model.head is Head.SOFTMAX3 else activation
    return (output[0] if single else output), cache


def predict(model: FcnnModel, inputs: np.ndarray) -> np.ndarray:
    return forward(model, inputs)[0]


def loss_and_grad(model: FcnnModel, inputs: np.ndarray, targets: np.ndarray,
                  loss: LossKind) -> Tuple[float, List[np.ndarray]]:
    """Batch-mean loss and its exact gradient, ordered like ``model.parameters()``.

    cross_entropy pairs with softmax-3 heads and integer class targets;
    euclidean pairs with scalar heads and real targets (mean of squared error).
    """
    loss = LossKind(loss)
    if HEAD_LOSS[model.head] is not loss:
        raise ConfigurationError(f"{loss.value} loss does not match a {model.head.value} head")

    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    n = x.shape[0]
    if n == 0:
        raise ConfigurationError("Empty batch")
    _, cache = forward(model, x)
    logits = cache.post[-1]

    if loss is LossKind.CROSS_ENTROPY:
        labels = np.asarray(targets, dtype=np.int64).reshape(n)
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        value = float(-log_probs[np.arange(n), labels].mean())
        delta = np.exp(log_probs)
        delta[np.arange(n), labels] -= 1.0
        delta /= n
    else:
        y = np.asarray(targets, dtype=np.float64).reshape(n, 1)
        error = logits - y
        value = float(np.mean(error ** 2))
        delta = 2.0 * error / n

    grads: List[np.ndarray] = [None] * (2 * len(model.layers))
    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        if layer.activation is Activation.TANH:
            delta = delta * (1.0 - cache.post[k] ** 2)
        grads[2 * k] = delta.T @ cache.inputs[k]
        grads[2 * k + 1] = delta.sum(axis=0)
        delta = delta @ layer.weights
    return value, grads


class LayerDocument(BaseModel):
    rows: int = Field(..., gt=0)
    cols: int = Field(..., gt=0)
    w: List[float]
    b: List[float]

    @model_validator(mode='after')
    def validate_lengths(self):
        if len(self.w) != self.rows * self.cols:
            raise ValueError(f'w holds {len(self.w)} values, expected {self.rows * self.cols}')
        if len(self.b) != self.rows:
            raise ValueError(f'b holds {len(self.b)} values, expected {self.rows}')
        return self


class ModelDocument(BaseModel):
    """On-disk schema of a model file"""
    version: int
    head: Head
    activations: List[Activation]
    layers: List[LayerDocument]
    norm: NormalizationConstants
    meta: TrainingMeta

    @field_validator('version')
    @classmethod
    def validate_version(cls, v):
        if v != MODEL_FILE_VERSION:
            raise ValueError(f'Unsupported model file version {v}')
        return v

    @model_validator(mode='after')
    def validate_activations(self):
        if len(self.activations) != len(self.layers):
            raise ValueError('One activation per layer is required')
        return self


def model_to_document(model: FcnnModel) -> dict:
    final_loss = model.meta.final_val_loss
    if final_loss is not None and not math.isfinite(final_loss):
        final_loss = None
    return {
        'version': MODEL_FILE_VERSION,
        'head': model.head.value,
        'activations': [layer.activation.value for layer in model.layers],
        'layers': [
            {
                'rows': layer.out_features,
                'cols': layer.in_features,
                'w': [float(v) for v in layer.weights.ravel()],
                'b': [float(v) for v in layer.bias],
            }
            for layer in model.layers
        ],
        'norm': {'max_abs_x': model.norm.max_abs_x, 'max_abs_y': model.norm.max_abs_y},
        'meta': {
            'seed': model.meta.seed,
            'epochs_run': model.meta.epochs_run,
            'final_val_loss': final_loss,
        },
    }


def save_model(model: FcnnModel, path: Union[str, Path]):
    """Write the model as JSON; floats use the shortest repr that reproduces each double exactly"""
    with open(path, 'w', encoding='utf-8') as file:
        json.dump(model_to_document(model), file, indent=2)
        file.write('\n')


def model_from_document(document: dict) -> FcnnModel:
    try:
        parsed = ModelDocument.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        key = '.'.join(str(part) for part in first['loc']) or None
        raise FormatError(f"Invalid model file: {first['msg']}", key=key) from None

    layers = [
        DenseLayer(
            weights=np.asarray(layer.w, dtype=np.float64).reshape(layer.rows, layer.cols),
            bias=np.asarray(layer.b, dtype=np.float64),
            activation=activation,
        )
        for layer, activation in zip(parsed.layers, parsed.activations)
    ]
    try:
        return FcnnModel(layers=layers, head=parsed.head, norm=parsed.norm, meta=parsed.meta)
    except ConfigurationError as e:
        raise FormatError(f"Invalid model file: {e}", key='layers') from None


def load_model(path: Union[str, Path]) -> FcnnModel:
    try:
        with open(path, 'r', encoding='utf-8') as file:
            document = json.load(file)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: not a complete JSON document: {e.msg}", offset=e.pos) from None
    if not isinstance(document, dict):
        raise FormatError(f"{path}: model file must be a JSON object")
    return model_from_document(document)
