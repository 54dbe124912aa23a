from typing import Sequence

import numpy as np

from src.constants import MASK_VALUE
from src.core import ops
from src.core.tensor import Tensor
from src.exception import InvariantViolationError, TensorShapeError


def info_nce(z: Tensor, anchor_rows: Sequence[int], positive_rows: Sequence[Sequence[int]], tau: float) -> Tensor:
    """
    Neighbor-contrastive loss over the rows of ``z`` [M, d].

    For anchor row i and each of its positive rows u the term is
    -log( exp(cos(z_i, z_u) / tau) / sum_{k != i} exp(cos(z_i, z_k) / tau) ); every row of ``z`` except the
    anchor itself is in the denominator. The result is the sum of terms divided by the positive count.
    """
    if tau <= 0.0:
        raise InvariantViolationError(f"tau must be > 0, got {tau}")
    if z.ndim != 2 or z.shape[0] < 2:
        raise TensorShapeError(f"contrastive loss needs at least two embedding rows, got {z.shape}")
    if len(anchor_rows) != len(positive_rows):
        raise TensorShapeError(f"{len(anchor_rows)} anchors but {len(positive_rows)} positive lists")
    m = z.shape[0]
    rows, cols = [], []
    for i, (a, pos) in enumerate(zip(anchor_rows, positive_rows)):
        if len(pos) == 0:
            raise InvariantViolationError(f"anchor row {a} has no positives; isolated anchors must be filtered")
        for u in pos:
            if u == a or not 0 <= u < m:
                raise InvariantViolationError(f"positive row {u} invalid for anchor row {a}")
            rows.append(i)
            cols.append(u)

    zn = ops.l2_normalize_rows(z)
    sims = ops.scale(ops.matmul(ops.take_rows(zn, list(anchor_rows)), ops.transpose(zn)), 1.0 / tau)
    self_mask = np.zeros((len(anchor_rows), m))
    self_mask[np.arange(len(anchor_rows)), np.asarray(anchor_rows, dtype=np.int64)] = MASK_VALUE
    log_probs = ops.log_softmax(ops.add_constant(sims, self_mask))
    picked = ops.gather_elements(log_probs, rows, cols)
    return ops.scale(ops.sum_all(picked), -1.0 / len(rows))


def contrastive_loss(pooled_anchors: Tensor, positives: Sequence[Tensor], tau: float) -> Tensor:
    """
    :param pooled_anchors: [B, d], B >= 2.
    :param positives: one [p_i, d] tensor of positive embeddings per anchor, p_i >= 1.
    The batch members are the anchors followed by all positives, each a distinct row.
    """
    b = pooled_anchors.shape[0]
    if b < 2:
        raise TensorShapeError(f"contrastive loss needs B >= 2 anchors, got {b}")
    if len(positives) != b:
        raise TensorShapeError(f"{b} anchors but {len(positives)} positive sets")
    rows = [pooled_anchors]
    positive_rows = []
    offset = b
    for p in positives:
        count = p.shape[0] if p.ndim == 2 else 0
        if count == 0:
            raise InvariantViolationError("anchor with zero positives")
        rows.append(p)
        positive_rows.append(list(range(offset, offset + count)))
        offset += count
    return info_nce(ops.concat(rows, axis=0), list(range(b)), positive_rows, tau)
