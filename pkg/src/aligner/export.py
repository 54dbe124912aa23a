from dataclasses import dataclass

import numpy as np

from src.aligner.model import AlignerParams, encode_node, image_tokens
from src.core.checkpoint import load_checkpoint, save_checkpoint
from src.entity.graph import MultimodalGraph
from src.exception import InvariantViolationError, TensorShapeError
from src.logger import log


@dataclass(frozen=True, eq=False)
class GraphEmbeddings:
    """Frozen aligner outputs of one graph, rows in node-id order."""
    pooled: np.ndarray     # [N, d]
    fused: np.ndarray      # [N, n_q, d]
    image: np.ndarray      # [N, d], mean of the in-projected image patches
    image_seq: np.ndarray  # [N, n_v, d]

    @property
    def num_nodes(self) -> int:
        return self.pooled.shape[0]

    @property
    def d(self) -> int:
        return self.pooled.shape[1]

    @property
    def n_q(self) -> int:
        return self.fused.shape[1]

    def as_dict(self):
        return {"pooled": self.pooled, "fused": self.fused, "image": self.image, "image_seq": self.image_seq}


def export_embeddings(params: AlignerParams, g: MultimodalGraph) -> GraphEmbeddings:
    """Encodes every node one at a time, so row v equals ``encode_node(params, g, v)`` exactly."""
    if (g.d_t, g.d_i) != (params.txt_in_proj.d_in, params.img_in_proj.d_in):
        raise TensorShapeError(f"graph dims ({g.d_t}, {g.d_i}) do not match aligner input dims "
                               f"({params.txt_in_proj.d_in}, {params.img_in_proj.d_in})")
    n, d = g.num_nodes, params.d
    pooled = np.zeros((n, d))
    fused = np.zeros((n, params.n_q, d))
    image = np.zeros((n, d))
    image_seq = np.zeros((n, g.n_v, d))
    for v in range(n):
        emb = encode_node(params, g, v)
        pooled[v] = emb.pooled.data
        fused[v] = emb.fused.data
        patches = image_tokens(params, g, v)
        image_seq[v] = patches
        if len(patches):
            image[v] = patches.mean(axis=0)
    log.info(f"Exported embeddings of {g.name!r}: pooled {pooled.shape}, fused {fused.shape}")
    return GraphEmbeddings(pooled=pooled, fused=fused, image=image, image_seq=image_seq)


def save_embeddings(file_path: str, emb: GraphEmbeddings) -> None:
    save_checkpoint(file_path, emb.as_dict())


def load_embeddings(file_path: str) -> GraphEmbeddings:
    blobs = load_checkpoint(file_path)
    missing = {"pooled", "fused", "image", "image_seq"} - set(blobs)
    if missing:
        raise InvariantViolationError(f"{file_path}: embedding file lacks {sorted(missing)}")
    return GraphEmbeddings(pooled=blobs["pooled"], fused=blobs["fused"], image=blobs["image"],
                           image_seq=blobs["image_seq"])
