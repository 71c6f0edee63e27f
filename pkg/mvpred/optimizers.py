"""
Gradient-descent optimizers

Momentum, RMSprop and Adam over a list of parameter arrays. RMSprop and Adam
keep epsilon inside the square root: w -= lr * g / sqrt(m2 + eps).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Sequence

import numpy as np

from .errors import ConfigurationError


class OptimizerKind(str, Enum):
    MOMENTUM = "momentum"
    RMSPROP = "rmsprop"
    ADAM = "adam"


@dataclass
class OptimizerState:
    """Accumulators and step counter; m1/m2 mirror the parameter shapes"""
    kind: OptimizerKind
    m1: List[np.ndarray]
    m2: List[np.ndarray]
    t: int = 0
    learning_rate: float = 0.001
    rho: float = 0.9
    beta: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def create_state(kind: OptimizerKind, params: Sequence[np.ndarray], learning_rate: float = 0.001,
                 rho: float = 0.9, beta: float = 0.9, beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = 1e-8) -> OptimizerState:
    kind = OptimizerKind(kind)
    zeros = [np.zeros_like(p, dtype=np.float64) for p in params]
    return OptimizerState(
        kind=kind,
        m1=zeros,
        m2=[z.copy() for z in zeros] if kind is not OptimizerKind.MOMENTUM else [],
        learning_rate=learning_rate,
        rho=rho,
        beta=beta,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def _check(state: OptimizerState, kind: OptimizerKind, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]):
    if state.kind is not kind:
        raise ConfigurationError(f"{kind.value} step applied to a {state.kind.value} state")
    if len(params) != len(grads) or len(params) != len(state.m1):
        raise ConfigurationError("Parameters, gradients and accumulators must have the same length")


def momentum_step(state: OptimizerState, params: Sequence[np.ndarray],
                  grads: Sequence[np.ndarray]) -> List[np.ndarray]:
    """v = rho * v + g;  w = w - lr * v"""
    _check(state, OptimizerKind.MOMENTUM, params, grads)
    state.t += 1
    updated = []
    for i, (w, g) in enumerate(zip(params, grads)):
        state.m1[i] = state.rho * state.m1[i] + g
        updated.append(w - state.learning_rate * state.m1[i])
    return updated


def rmsprop_step(state: OptimizerState, params: Sequence[np.ndarray],
                 grads: Sequence[np.ndarray]) -> List[np.ndarray]:
    """m2 = beta * m2 + (1 - beta) * g^2;  w = w - lr * g / sqrt(m2 + eps)"""
    _check(state, OptimizerKind.RMSPROP, params, grads)
    state.t += 1
    updated = []
    for i, (w, g) in enumerate(zip(params, grads)):
        state.m2[i] = state.beta * state.m2[i] + (1.0 - state.beta) * g ** 2
        updated.append(w - state.learning_rate * g / np.sqrt(state.m2[i] + state.epsilon))
    return updated


def adam_step(state: OptimizerState, params: Sequence[np.ndarray],
              grads: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Bias-corrected first and second moments;  w = w - lr * m1_hat / sqrt(m2_hat + eps)"""
    _check(state, OptimizerKind.ADAM, params, grads)
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    updated = []
    for i, (w, g) in enumerate(zip(params, grads)):
        state.m1[i] = state.beta1 * state.m1[i] + (1.0 - state.beta1) * g
        state.m2[i] = state.beta2 * state.m2[i] + (1.0 - state.beta2) * g ** 2
        m1_hat = state.m1[i] / correction1
        m2_hat = state.m2[i] / correction2
        updated.append(w - state.learning_rate * m1_hat / np.sqrt(m2_hat + state.epsilon))
    return updated


OPTIMIZER_STEPS: Dict[OptimizerKind, Callable] = {
    OptimizerKind.MOMENTUM: momentum_step,
    OptimizerKind.RMSPROP: rmsprop_step,
    OptimizerKind.ADAM: adam_step,
}


def apply_step(state: OptimizerState, params: Sequence[np.ndarray],
               grads: Sequence[np.ndarray]) -> List[np.ndarray]:
    return OPTIMIZER_STEPS[state.kind](state, params, grads)
