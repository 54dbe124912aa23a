"""
The frozen language model stand-in: a small pre-norm causal transformer over word tokens with sinusoidal
positions and an output head tied to the embedding table.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.core import ops
from src.core.nn import AttentionParams, LayerNorm, Linear, multi_head_attention, uniform_init
from src.core.tensor import Module, Tensor
from src.entity.config_entity import DecoderConfig
from src.exception import TensorShapeError
from src.instruct.vocab import Vocabulary


def sinusoidal_positions(length: int, d: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


@dataclass
class DecoderBlock(Module):
    ln_attn: LayerNorm
    attn: AttentionParams
    ln_ffn: LayerNorm
    ffn_in: Linear
    ffn_out: Linear

    @classmethod
    def init(cls, rng: np.random.Generator, d: int, ffn_mult: int) -> "DecoderBlock":
        return cls(ln_attn=LayerNorm.init(d), attn=AttentionParams.init(rng, d), ln_ffn=LayerNorm.init(d),
                   ffn_in=Linear.init(rng, d, d * ffn_mult), ffn_out=Linear.init(rng, d * ffn_mult, d))


@dataclass
class FrozenDecoder(Module):
    embed: Tensor
    blocks: List[DecoderBlock]
    ln_final: LayerNorm
    n_heads: int = 1
    max_positions: int = 1024
    vocab: Optional[Vocabulary] = field(default=None, repr=False)

    @classmethod
    def init(cls, cfg: DecoderConfig, vocab: Vocabulary) -> "FrozenDecoder":
        rng = np.random.default_rng(cfg.seed)
        return cls(
            embed=uniform_init(rng, (len(vocab), cfg.d_dec), cfg.d_dec, name="embed"),
            blocks=[DecoderBlock.init(rng, cfg.d_dec, cfg.ffn_mult) for _ in range(cfg.n_layers)],
            ln_final=LayerNorm.init(cfg.d_dec),
            n_heads=cfg.n_heads,
            max_positions=cfg.max_positions,
            vocab=vocab,
        )

    @property
    def d_dec(self) -> int:
        return self.embed.shape[1]

    @property
    def is_frozen(self) -> bool:
        return not any(p.requires_grad for p in self.parameters())

    def embed_tokens(self, ids) -> Tensor:
        return ops.take_rows(self.embed, list(ids))

    def logits(self, x: Tensor) -> Tensor:
        """[L, d_dec] input embeddings -> [L, V] next-token logits."""
        length = x.shape[0]
        if x.ndim != 2 or x.shape[1] != self.d_dec:
            raise TensorShapeError(f"decoder input must be [L, {self.d_dec}], got {x.shape}")
        if length == 0 or length > self.max_positions:
            raise TensorShapeError(f"decoder input length {length} outside [1, {self.max_positions}]")
        mask = ops.causal_mask(length)
        h = ops.add_constant(x, sinusoidal_positions(length, self.d_dec))
        for block in self.blocks:
            normed = block.ln_attn(h)
            h = ops.add(h, multi_head_attention(block.attn, normed, normed, self.n_heads, mask=mask))
            h = ops.add(h, block.ffn_out(ops.gelu(block.ffn_in(block.ln_ffn(h)))))
        return ops.matmul(self.ln_final(h), ops.transpose(self.embed))
