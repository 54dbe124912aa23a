from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.aligner.loss import info_nce
from src.aligner.model import AlignerParams, encode_nodes
from src.constants import TRAIN
from src.core.optim import AdamState, adam_step
from src.core.tensor import Tape, backward
from src.entity.config_entity import AlignerConfig
from src.entity.graph import MultimodalGraph
from src.exception import InvariantViolationError, TensorShapeError
from src.graph.store import sample_neighbors
from src.logger import log


@dataclass(frozen=True)
class LossRecord:
    step: int
    epoch: int
    graph: str
    batch_members: int
    loss: float


@dataclass
class PretrainResult:
    params: AlignerParams
    history: List[LossRecord] = field(default_factory=list)

    @property
    def losses(self) -> List[float]:
        return [r.loss for r in self.history]


def anchor_pool(g: MultimodalGraph) -> np.ndarray:
    """Train-split nodes with at least one neighbor; isolated nodes are never anchors."""
    train = np.flatnonzero(g.splits == TRAIN)
    return train[np.diff(g.offsets)[train] > 0]


def _batch_members(anchors: Sequence[int], positives: Sequence[Sequence[int]]) -> Tuple[List[int], List[int], List[List[int]]]:
    """Unique batch nodes (anchors first) and the row indices of anchors and their positives."""
    index: Dict[int, int] = {}
    for v in list(anchors) + [u for pos in positives for u in pos]:
        index.setdefault(int(v), len(index))
    return list(index), [index[int(a)] for a in anchors], [[index[int(u)] for u in pos] for pos in positives]


def _epoch_batches(g: MultimodalGraph, pool: np.ndarray, cfg: AlignerConfig, rng: np.random.Generator):
    order = rng.permutation(pool)
    batches = []
    for start in range(0, len(order), cfg.batch_size):
        anchors = order[start:start + cfg.batch_size].tolist()
        positives = [sample_neighbors(g, a, cfg.neighbors_per_anchor, rng) for a in anchors]
        batches.append((anchors, positives))
    return batches


def pretrain(graphs: Sequence[MultimodalGraph], cfg: AlignerConfig) -> PretrainResult:
    """
    Contrastive pretraining over one or more graphs. Every epoch each graph's non-isolated train anchors are
    shuffled into single-graph batches which are interleaved round-robin across graphs. Each anchor's
    positives are up to ``neighbors_per_anchor`` sampled 1-hop neighbors; all other batch members serve as
    negatives. Deterministic given ``cfg.seed``: each graph draws from its own seeded stream.
    """
    if not graphs:
        raise InvariantViolationError("pretrain needs at least one graph")
    d_t, d_i = graphs[0].d_t, graphs[0].d_i
    for g in graphs:
        if (g.d_t, g.d_i) != (d_t, d_i):
            raise TensorShapeError(f"graph {g.name!r} has feature dims ({g.d_t}, {g.d_i}), expected ({d_t}, {d_i})")
    pools = [anchor_pool(g) for g in graphs]
    for g, pool in zip(graphs, pools):
        if len(pool) == 0:
            raise InvariantViolationError(f"graph {g.name!r} has no non-isolated train node to anchor on")

    params = AlignerParams.init(cfg, d_t, d_i)
    trainable = params.parameters()
    state = AdamState.create(trainable, cfg.lr)
    streams = [np.random.default_rng([cfg.seed, i]) for i in range(len(graphs))]
    result = PretrainResult(params=params)
    log.info(f"Aligner pretraining on {len(graphs)} graph(s), anchors per graph {[len(p) for p in pools]}, "
             f"{len(trainable)} parameter tensors")

    step = 0
    for epoch in range(cfg.epochs):
        per_graph = [_epoch_batches(g, pool, cfg, rng) for g, pool, rng in zip(graphs, pools, streams)]
        schedule = []
        for round_ in range(max(len(batches) for batches in per_graph)):
            schedule.extend((gi, batches[round_]) for gi, batches in enumerate(per_graph) if round_ < len(batches))
        epoch_losses = []
        for gi, (anchors, positives) in schedule:
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
            nodes, anchor_rows, positive_rows = _batch_members(anchors, positives)
            if len(nodes) < 2:
                continue
            with Tape() as tape:
                pooled = encode_nodes(params, graphs[gi], nodes).pooled
                loss = info_nce(pooled, anchor_rows, positive_rows, cfg.tau)
            backward(loss, tape)
            adam_step(trainable, state)
            result.history.append(LossRecord(step, epoch, graphs[gi].name, len(nodes), loss.item()))
            epoch_losses.append(loss.item())
            step += 1
        if epoch_losses:
            log.info(f"Aligner epoch {epoch}: {len(epoch_losses)} steps, mean loss {np.mean(epoch_losses):.6f}")
        if cfg.max_steps is not None and step >= cfg.max_steps:
            break
    return result
