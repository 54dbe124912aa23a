"""
Turning a PromptSequence into decoder input rows.

Text words become vocabulary embeddings. A graph slot becomes the n_q projected fused rows of each node it
references (2 * n_q for an edge). An image slot becomes one projected image vector (the mean over the
referenced nodes), or with ``image_tokens="sequence"`` the projected patch rows of every referenced node.
Answer words and the end token come last; only those positions are scored.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from src.aligner.export import GraphEmbeddings
from src.constants import GRAPH_TOKEN, IMAGE_TOKEN
from src.core import ops
from src.core.tensor import Tensor
from src.entity.prompt import PromptSegment, PromptSequence, SegmentKind
from src.exception import PromptError, TensorShapeError
from src.instruct.decoder import FrozenDecoder
from src.instruct.projector import ProjectorParams, project
from src.instruct.vocab import Vocabulary, tokenize

IMAGE_MODES = ("pooled", "sequence")


@dataclass
class AssembledInput:
    """Decoder input rows plus the positions whose next-token prediction is scored."""
    rows: Tensor
    target_positions: List[int]
    target_ids: List[int]
    prompt_length: int

    @property
    def length(self) -> int:
        return self.rows.shape[0]

    def loss_mask(self) -> np.ndarray:
        mask = np.zeros(self.length, dtype=np.int64)
        mask[self.target_positions] = 1
        return mask


def answer_ids(answer: str, vocab: Vocabulary) -> List[int]:
    return vocab.encode(tokenize(answer)) + [vocab.eos_id]


def slot_width(segment: PromptSegment, n_q: int, image_tokens: str = "pooled", n_v: int = 1) -> int:
    """Number of decoder rows a slot occupies."""
    refs = len(segment.node_refs())
    if segment.kind is SegmentKind.GRAPH_SLOT:
        return n_q * refs
    if segment.kind is SegmentKind.IMAGE_SLOT:
        return 1 if image_tokens == "pooled" else n_v * refs
    return 0


def _finish(parts: List[Tensor], prompt_len: int, answer: str, vocab: Vocabulary, dec: FrozenDecoder,
            with_answer: bool) -> AssembledInput:
    positions: List[int] = []
    targets: List[int] = []
    if with_answer:
        if not answer:
            raise PromptError("prompt has no answer to score")
        targets = answer_ids(answer, vocab)
        if len(targets) < 2:
            raise PromptError(f"answer {answer!r} has no words")
        # the end token is a target only; it is never fed back
        parts.append(dec.embed_tokens(targets[:-1]))
        positions = [prompt_len - 1 + j for j in range(len(targets))]
    rows = parts[0] if len(parts) == 1 else ops.concat_rows(parts)
    return AssembledInput(rows=rows, target_positions=positions, target_ids=targets, prompt_length=prompt_len)


def assemble_decoder_input(prompt: PromptSequence, pp: ProjectorParams, emb: GraphEmbeddings, dec: FrozenDecoder,
                           image_tokens: str = "pooled", with_answer: bool = True) -> AssembledInput:
    """Slots are filled with projected aligner outputs of the prompt's graph."""
    if image_tokens not in IMAGE_MODES:
        raise PromptError(f"unknown image_tokens mode {image_tokens!r}")
    if pp.d_in != emb.d or pp.d_out != dec.d_dec:
        raise TensorShapeError(f"projector {pp.d_in}->{pp.d_out} does not connect embeddings of width {emb.d} "
                               f"to a decoder of width {dec.d_dec}")
    vocab = dec.vocab
    parts: List[Tensor] = []
    length = 0
    for seg in prompt.segments:
        if seg.kind is SegmentKind.TEXT:
            ids = vocab.encode(tokenize(seg.payload))
            if not ids:
                continue
            part = dec.embed_tokens(ids)
        else:
            refs = seg.node_refs()
            if max(refs) >= emb.num_nodes:
                raise PromptError(f"slot references node {max(refs)} but embeddings cover {emb.num_nodes} nodes")
            if seg.kind is SegmentKind.GRAPH_SLOT:
                source = np.concatenate([emb.fused[v] for v in refs], axis=0)
            elif image_tokens == "pooled":
                source = np.mean([emb.image[v] for v in refs], axis=0, keepdims=True)
            else:
                source = np.concatenate([emb.image_seq[v] for v in refs], axis=0)
            if source.shape[0] == 0:
                continue
            part = project(pp, Tensor(source))
        parts.append(part)
        length += part.shape[0]
    if not parts:
        raise PromptError("prompt produced no decoder input")
    return _finish(parts, length, prompt.answer, vocab, dec, with_answer)


def token_layout(prompt: PromptSequence, vocab: Vocabulary, n_q: int, image_tokens: str = "pooled", n_v: int = 1,
                 slot_fill: Optional[Callable[[PromptSegment, int], Optional[List[str]]]] = None) -> List[int]:
    """
    The prompt as vocabulary ids with every slot replaced by its placeholder token repeated to the slot's
    width. ``slot_fill`` may return words to use instead (cycled to the same width).
    """
    ids: List[int] = []
    for seg in prompt.segments:
        if seg.kind is SegmentKind.TEXT:
            ids.extend(vocab.encode(tokenize(seg.payload)))
            continue
        width = slot_width(seg, n_q, image_tokens, n_v)
        words = slot_fill(seg, width) if slot_fill is not None else None
        if not words:
            words = [IMAGE_TOKEN if seg.kind is SegmentKind.IMAGE_SLOT else GRAPH_TOKEN]
        fill = vocab.encode(words)
        ids.extend(fill[i % len(fill)] for i in range(width))
    return ids


def assemble_token_input(prompt: PromptSequence, dec: FrozenDecoder, n_q: int, image_tokens: str = "pooled",
                         n_v: int = 1, slot_fill=None, with_answer: bool = True,
                         score_prompt: bool = False) -> AssembledInput:
    """
    Decoder input made only of vocabulary embeddings (decoder pretraining and diagnostics). With
    ``score_prompt`` every prompt position also predicts the next prompt token.
    """
    ids = token_layout(prompt, dec.vocab, n_q, image_tokens, n_v, slot_fill)
    if not ids:
        raise PromptError("prompt produced no decoder input")
    item = _finish([dec.embed_tokens(ids)], len(ids), prompt.answer, dec.vocab, dec, with_answer)
    if score_prompt:
        item.target_positions = list(range(len(ids) - 1)) + item.target_positions
        item.target_ids = ids[1:] + item.target_ids
    return item


def instruction_loss(dec: FrozenDecoder, batch: Sequence[AssembledInput]) -> Tensor:
    """Mean next-token cross entropy over every scored position of the batch."""
    picked = []
    targets: List[int] = []
    for item in batch:
        if not item.target_positions:
            raise PromptError("instruction loss needs at least one answer target")
        logits = dec.logits(item.rows)
        picked.append(ops.take_rows(logits, item.target_positions))
        targets.extend(item.target_ids)
    if not picked:
        raise PromptError("instruction loss over an empty batch")
    stacked = picked[0] if len(picked) == 1 else ops.concat(picked, axis=0)
    return ops.cross_entropy_logits(stacked, targets)
