"""Parameter containers and the multi-head attention block shared by the aligner and the decoder."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core import ops
from src.core.tensor import Module, Tensor
from src.exception import TensorShapeError


def uniform_init(rng: np.random.Generator, shape, fan_in: int, name: Optional[str] = None) -> Tensor:
    """uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), grad-enabled."""
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


@dataclass
class Linear(Module):
    weight: Tensor
    bias: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, d_in: int, d_out: int) -> "Linear":
        return cls(weight=uniform_init(rng, (d_in, d_out), d_in), bias=uniform_init(rng, (d_out,), d_in))

    @property
    def d_in(self) -> int:
        return self.weight.shape[0]

    @property
    def d_out(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x: Tensor) -> Tensor:
        return ops.add_bias(ops.matmul(x, self.weight), self.bias)


@dataclass
class LayerNorm(Module):
    gain: Tensor
    bias: Tensor

    @classmethod
    def init(cls, d: int) -> "LayerNorm":
        return cls(gain=Tensor(np.ones(d), requires_grad=True), bias=Tensor(np.zeros(d), requires_grad=True))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gain, self.bias)


@dataclass
class AttentionParams(Module):
    """W_q, W_k, W_v and the output map W_o of one multi-head attention layer."""
    w_q: Linear
    w_k: Linear
    w_v: Linear
    w_o: Linear

    @classmethod
    def init(cls, rng: np.random.Generator, d: int) -> "AttentionParams":
        return cls(*(Linear.init(rng, d, d) for _ in range(4)))

    @property
    def d(self) -> int:
        return self.w_q.d_in


def multi_head_attention(params: AttentionParams, query: Tensor, key_value: Tensor, heads: int,
                         mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Scaled dot-product attention per head (scale 1/sqrt(d/heads)), heads concatenated, then W_o.
    No positional encoding: the output is invariant to joint permutations of the key/value rows.

    :param query: [..., a, d]
    :param key_value: [..., b, d]; keys and values are projections of the same rows.
    :param mask: optional additive array broadcasting to [..., heads, a, b].
    :return: [..., a, d]
    """
    return attention(query, key_value, key_value, params, heads, mask)


def attention(q: Tensor, k: Tensor, v: Tensor, params: AttentionParams, heads: int,
              mask: Optional[np.ndarray] = None) -> Tensor:
    """Attention with separate key and value inputs; the layer behind ``multi_head_attention``."""
    d = params.d
    if q.shape[-1] != d or k.shape[-1] != d:
        raise TensorShapeError(f"attention dims: query {q.shape}, keys {k.shape}, model d={d}")
    if k.shape != v.shape:
        raise TensorShapeError(f"keys {k.shape} and values {v.shape} must have the same shape")
    if d % heads:
        raise TensorShapeError(f"d={d} is not divisible by heads={heads}")
    if k.shape[-2] == 0:
        raise TensorShapeError("attention over an empty key/value sequence")

    qh = ops.split_heads(params.w_q(q), heads)
    kh = ops.split_heads(params.w_k(k), heads)
    vh = ops.split_heads(params.w_v(v), heads)
    scores = ops.scale(ops.matmul(qh, ops.transpose(kh)), 1.0 / math.sqrt(d // heads))
    if mask is not None:
        scores = ops.add_constant(scores, mask)
    return params.w_o(ops.merge_heads(ops.matmul(ops.softmax(scores), vh)))
