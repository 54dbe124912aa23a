from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from src.constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from src.core.tensor import Tensor
from src.exception import TensorShapeError


@dataclass
class AdamState:
    """First/second moments per parameter, the step counter and the hyperparameters."""
    lr: float
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def create(cls, params: Sequence[Tensor], lr: float) -> "AdamState":
        return cls(lr=lr, m=[np.zeros(p.shape) for p in params], v=[np.zeros(p.shape) for p in params])


def adam_step(params: Sequence[Tensor], state: AdamState) -> None:
    """Bias-corrected Adam update; gradients are cleared afterwards. Missing grads count as zero."""
    if len(params) != len(state.m):
        raise TensorShapeError(f"{len(params)} parameters but optimizer state holds {len(state.m)}")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for i, p in enumerate(params):
        if state.m[i].shape != p.shape:
            raise TensorShapeError(f"parameter {i}: shape {p.shape} != moment shape {state.m[i].shape}")
        g = np.zeros(p.shape) if p.grad is None else p.grad
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.data = p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        p.grad = None
