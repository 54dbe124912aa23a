"""
Structure-aware multimodal aligner.

Per layer, the text and image token sequences each pass one self-attention block whose weights are shared
by both modalities; then a fixed set of query rows cross-attends over the concatenated image and text
tokens. Layer 1 reads the learnable query bank, later layers read the previous layer's fused queries.
The node summary is ``pool_head(mean of fused rows)``.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from src.core import ops
from src.core.nn import AttentionParams, Linear, multi_head_attention, uniform_init
from src.core.tensor import Module, Tensor
from src.entity.config_entity import AlignerConfig
from src.entity.graph import MultimodalGraph
from src.exception import DanglingNodeError, TensorShapeError


@dataclass
class AlignerLayer(Module):
    shared_attn: AttentionParams
    cross_attn: AttentionParams


@dataclass
class AlignerParams(Module):
    txt_in_proj: Linear
    img_in_proj: Linear
    layers: List[AlignerLayer]
    query_bank: Tensor
    pool_head: Linear
    n_heads: int = 1

    @classmethod
    def init(cls, cfg: AlignerConfig, d_t: int, d_i: int, rng: Optional[np.random.Generator] = None) -> "AlignerParams":
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        return cls(
            txt_in_proj=Linear.init(rng, d_t, cfg.d),
            img_in_proj=Linear.init(rng, d_i, cfg.d),
            layers=[AlignerLayer(AttentionParams.init(rng, cfg.d), AttentionParams.init(rng, cfg.d))
                    for _ in range(cfg.n_layers)],
            query_bank=uniform_init(rng, (cfg.n_q, cfg.d), cfg.d, name="query_bank"),
            pool_head=Linear.init(rng, cfg.d, cfg.d),
            n_heads=cfg.n_heads,
        )

    @property
    def d(self) -> int:
        return self.query_bank.shape[1]

    @property
    def n_q(self) -> int:
        return self.query_bank.shape[0]


@dataclass
class NodeEmbedding:
    fused: Tensor   # [n_q, d]
    pooled: Tensor  # [d]


@dataclass
class BatchEmbedding:
    fused: Tensor   # [B, n_q, d]
    pooled: Tensor  # [B, d]


def share_attn_layer(layer: AlignerLayer, seq: Tensor, heads: int) -> Tensor:
    """Self-attention with the layer's modality-shared weights."""
    if seq.shape[-2] == 0:
        raise TensorShapeError("share_attn_layer over an empty sequence")
    return multi_head_attention(layer.shared_attn, seq, seq, heads)


def cross_fuse_layer(layer: AlignerLayer, queries: Tensor, img_seq: Optional[Tensor], txt_seq: Optional[Tensor],
                     heads: int) -> Tensor:
    """Queries attend over concat(img, txt); empty or missing modalities drop out of the key/value rows."""
    parts = [s for s in (img_seq, txt_seq) if s is not None and s.shape[-2] > 0]
    if not parts:
        raise TensorShapeError("cross_fuse_layer needs at least one nonempty modality")
    kv = parts[0] if len(parts) == 1 else ops.concat_rows(parts)
    return multi_head_attention(layer.cross_attn, queries, kv, heads)


def pool(params: AlignerParams, fused: Tensor) -> Tensor:
    return params.pool_head(ops.mean(fused, axis=-2))


def encode_features(params: AlignerParams, txt: np.ndarray, img: np.ndarray) -> BatchEmbedding:
    """
    Encodes a batch of nodes given their raw feature sequences.

    :param txt: [B, n_t, d_t]
    :param img: [B, n_v, d_i]
    """
    if txt.ndim != 3 or img.ndim != 3 or txt.shape[0] != img.shape[0]:
        raise TensorShapeError(f"feature batches must be [B, n, dim], got {txt.shape} and {img.shape}")
    if txt.shape[2] != params.txt_in_proj.d_in or img.shape[2] != params.img_in_proj.d_in:
        raise TensorShapeError(f"feature dims ({txt.shape[2]}, {img.shape[2]}) do not match aligner input dims "
                               f"({params.txt_in_proj.d_in}, {params.img_in_proj.d_in})")
    batch = txt.shape[0]
    heads = params.n_heads
    txt_seq = params.txt_in_proj(Tensor(txt)) if txt.shape[1] else None
    img_seq = params.img_in_proj(Tensor(img)) if img.shape[1] else None
    if txt_seq is None and img_seq is None:
        raise TensorShapeError("node has neither text tokens nor image patches")

    queries = ops.expand_batch(params.query_bank, batch)
    for layer in params.layers:
        if txt_seq is not None:
            txt_seq = share_attn_layer(layer, txt_seq, heads)
        if img_seq is not None:
            img_seq = share_attn_layer(layer, img_seq, heads)
        queries = cross_fuse_layer(layer, queries, img_seq, txt_seq, heads)
    return BatchEmbedding(fused=queries, pooled=pool(params, queries))


def _check_nodes(g: MultimodalGraph, nodes: Sequence[int]) -> np.ndarray:
    idx = np.asarray(nodes, dtype=np.int64).reshape(-1)
    if len(idx) and (idx.min() < 0 or idx.max() >= g.num_nodes):
        raise DanglingNodeError(f"node ids outside [0, {g.num_nodes})")
    return idx


def encode_nodes(params: AlignerParams, g: MultimodalGraph, nodes: Sequence[int]) -> BatchEmbedding:
    idx = _check_nodes(g, nodes)
    return encode_features(params, g.txt_features[idx], g.img_features[idx])


def encode_node(params: AlignerParams, g: MultimodalGraph, v: int) -> NodeEmbedding:
    batch = encode_nodes(params, g, [v])
    return NodeEmbedding(fused=ops.take_rows(batch.fused, 0), pooled=ops.take_rows(batch.pooled, 0))


def image_tokens(params: AlignerParams, g: MultimodalGraph, v: int) -> np.ndarray:
    """Image patches of ``v`` mapped into the aligner width, [n_v, d] (no gradient)."""
    _check_nodes(g, [v])
    if g.n_v == 0:
        return np.zeros((0, params.d))
    return params.img_in_proj(Tensor(g.img_features[v])).numpy()
