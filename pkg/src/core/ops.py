"""
Differentiable tensor ops. Every op accepts leading batch axes; matmul additionally lets a 2-D right
operand be shared across those axes. There is no other broadcasting.
"""

from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np
from scipy.special import erf

from src.constants import MASK_VALUE
from src.core.tensor import Tensor, make_output
from src.exception import NumericError, TensorShapeError

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise TensorShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _reduce_to(grad: np.ndarray, shape) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return make_output(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    return make_output(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    return make_output(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def scale(x: Tensor, c: float) -> Tensor:
    return make_output(x.data * c, (x,), lambda g: (g * c,), "scale")


def add_constant(x: Tensor, c: np.ndarray) -> Tensor:
    """Adds a non-trainable array (masks); ``c`` must broadcast to ``x``."""
    c = np.asarray(c, dtype=np.float64)
    if np.broadcast_shapes(x.shape, c.shape) != x.shape:
        raise TensorShapeError(f"add_constant: {c.shape} does not broadcast to {x.shape}")
    return make_output(x.data + c, (x,), lambda g: (g,), "add_constant")


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Row-vector bias: ``b`` has shape (n,) and is added to every row of ``x[..., n]``."""
    if b.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise TensorShapeError(f"add_bias: bias {b.shape} does not match rows of {x.shape}")
    n = b.shape[0]
    return make_output(x.data + b.data, (x, b), lambda g: (g, g.reshape(-1, n).sum(axis=0)), "add_bias")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise TensorShapeError(f"matmul needs at least 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise TensorShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise TensorShapeError(f"matmul: batch axes differ, {a.shape} @ {b.shape}")

    def vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _reduce_to(ga, a.shape), _reduce_to(gb, b.shape)

    return make_output(a.data @ b.data, (a, b), vjp, "matmul")


def transpose(x: Tensor) -> Tensor:
    return make_output(np.swapaxes(x.data, -1, -2), (x,), lambda g: (np.swapaxes(g, -1, -2),), "transpose")


def split_heads(x: Tensor, heads: int) -> Tensor:
    """[..., n, d] -> [..., heads, n, d // heads]"""
    *lead, n, d = x.shape
    if d % heads:
        raise TensorShapeError(f"dimension {d} is not divisible by {heads} heads")
    dh = d // heads
    out = np.swapaxes(x.data.reshape(*lead, n, heads, dh), -2, -3)

    def vjp(g):
        return (np.swapaxes(g, -2, -3).reshape(*lead, n, d),)

    return make_output(np.ascontiguousarray(out), (x,), vjp, "split_heads")


def merge_heads(x: Tensor) -> Tensor:
    """[..., heads, n, dh] -> [..., n, heads * dh]"""
    *lead, heads, n, dh = x.shape
    out = np.swapaxes(x.data, -2, -3).reshape(*lead, n, heads * dh)

    def vjp(g):
        return (np.swapaxes(g.reshape(*lead, n, heads, dh), -2, -3),)

    return make_output(out, (x,), vjp, "merge_heads")


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = tuple(tensors)
    if not tensors:
        raise TensorShapeError("concat of an empty list")
    sizes = [t.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    cuts = np.cumsum(sizes)[:-1]
    return make_output(out, tensors, lambda g: tuple(np.split(g, cuts, axis=axis)), "concat")


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    return concat(tensors, axis=-2)


def take_rows(x: Tensor, index: Union[int, Sequence[int], np.ndarray]) -> Tensor:
    """Gathers along axis 0 (embedding lookup, row selection). An int index drops the axis."""
    idx = index if isinstance(index, (int, np.integer)) else np.asarray(index, dtype=np.int64)

    def vjp(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return (full,)

    return make_output(np.array(x.data[idx]), (x,), vjp, "take_rows")


def gather_elements(x: Tensor, rows: Sequence[int], cols: Sequence[int]) -> Tensor:
    """x[rows[i], cols[i]] for a 2-D x, as a vector."""
    r = np.asarray(rows, dtype=np.int64)
    c = np.asarray(cols, dtype=np.int64)

    def vjp(g):
        full = np.zeros_like(x.data)
        np.add.at(full, (r, c), g)
        return (full,)

    return make_output(x.data[r, c], (x,), vjp, "gather_elements")


def expand_batch(x: Tensor, n: int) -> Tensor:
    """Stacks ``n`` copies of ``x`` along a new leading axis."""
    out = np.broadcast_to(x.data, (n,) + x.shape).copy()
    return make_output(out, (x,), lambda g: (g.sum(axis=0),), "expand_batch")


def sum_all(x: Tensor) -> Tensor:
    return make_output(np.asarray(x.data.sum()), (x,), lambda g: (np.full(x.shape, float(g)),), "sum")


def mean(x: Tensor, axis: int) -> Tensor:
    size = x.shape[axis]
    if size == 0:
        raise TensorShapeError(f"mean over an empty axis of {x.shape}")

    def vjp(g):
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape) / size,)

    return make_output(x.data.mean(axis=axis), (x,), vjp, "mean")


def _softmax(data: np.ndarray) -> np.ndarray:
    shifted = data - data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis with per-row max subtraction."""
    if not np.all(np.isfinite(x.data)):
        raise NumericError("softmax input contains NaN or Inf")
    y = _softmax(x.data)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return make_output(y, (x,), vjp, "softmax")


def softmax_rows(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise TensorShapeError(f"softmax_rows expects a matrix, got {x.shape}")
    return softmax(x)


def log_softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    y = shifted - lse
    p = np.exp(y)

    def vjp(g):
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return make_output(y, (x,), vjp, "log_softmax")


def gelu(x: Tensor) -> Tensor:
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data ** 2)
    return make_output(x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),), "gelu")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise TensorShapeError(f"layer_norm: gain/bias must be ({d},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    sigma = np.sqrt(x.data.var(axis=-1, keepdims=True) + eps)
    xhat = (x.data - mu) / sigma

    def vjp(g):
        gx_hat = g * gain.data
        gx = (gx_hat - gx_hat.mean(axis=-1, keepdims=True)
              - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)) / sigma
        return gx, (g * xhat).reshape(-1, d).sum(axis=0), g.reshape(-1, d).sum(axis=0)

    return make_output(xhat * gain.data + bias.data, (x, gain, bias), vjp, "layer_norm")


def l2_normalize_rows(x: Tensor) -> Tensor:
    norms = np.linalg.norm(x.data, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise NumericError("zero vector: cosine similarity is undefined")
    y = x.data / norms

    def vjp(g):
        return ((g - y * (g * y).sum(axis=-1, keepdims=True)) / norms,)

    return make_output(y, (x,), vjp, "l2_normalize_rows")


def cross_entropy_logits(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean over rows of -log softmax(logits)[target]."""
    if logits.ndim != 2:
        raise TensorShapeError(f"cross_entropy_logits expects [n, V] logits, got {logits.shape}")
    t = np.asarray(targets, dtype=np.int64)
    n, vocab = logits.shape
    if t.shape != (n,):
        raise TensorShapeError(f"{t.shape[0] if t.ndim else 0} targets for {n} rows")
    if n == 0:
        raise TensorShapeError("cross entropy over zero rows")
    if np.any(t < 0) or np.any(t >= vocab):
        raise TensorShapeError(f"target index out of range [0, {vocab})")
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    rows = np.arange(n)
    loss = -log_probs[rows, t].mean()

    def vjp(g):
        grad = np.exp(log_probs)
        grad[rows, t] -= 1.0
        return (grad * (float(g) / n),)

    return make_output(np.asarray(loss), (logits,), vjp, "cross_entropy")


def causal_mask(n: int) -> np.ndarray:
    """Additive mask: 0 where key j <= query i, MASK_VALUE on the strictly upper triangle."""
    return np.triu(np.full((n, n), MASK_VALUE), k=1)
