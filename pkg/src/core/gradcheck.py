from __future__ import annotations

from typing import Callable

import numpy as np

from src.constants import GRADCHECK_STEP
from src.core.tensor import Tape, Tensor, backward
from src.exception import NumericError, TensorShapeError


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = GRADCHECK_STEP) -> float:
    """
    Compares the taped gradient of a scalar function with central differences.

    :param f: scalar-valued, deterministic function of ``x`` (it may close over other tensors).
    :param x: grad-enabled leaf; its data is perturbed in place and restored.
    :return: max over components of |numeric - analytic| / max(1, |analytic|).
    """
    if not x.requires_grad:
        raise TensorShapeError("finite_diff_check needs a grad-enabled tensor")
    saved_grad = x.grad
    x.grad = None
    with Tape() as tape:
        out = f(x)
    if out.data.size != 1:
        raise TensorShapeError(f"checked function must be scalar, got shape {out.shape}")
    backward(out, tape)
    analytic = np.zeros(x.shape) if x.grad is None else x.grad.copy()
    x.grad = saved_grad

    if f(x).item() != out.item():
        raise NumericError("checked function is not deterministic")

    worst = 0.0
    for idx in np.ndindex(*x.shape):
        original = x.data[idx]
        x.data[idx] = original + h
        f_plus = f(x).item()
        x.data[idx] = original - h
        f_minus = f(x).item()
        x.data[idx] = original
        numeric = (f_plus - f_minus) / (2.0 * h)
        worst = max(worst, abs(numeric - analytic[idx]) / max(1.0, abs(analytic[idx])))
    return worst
