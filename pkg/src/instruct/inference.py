from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from sklearn.metrics import accuracy_score

from src.aligner.export import GraphEmbeddings
from src.core import ops
from src.entity.prompt import PromptSequence
from src.exception import InvariantViolationError
from src.instruct.assembly import assemble_decoder_input
from src.instruct.decoder import FrozenDecoder
from src.instruct.projector import ProjectorParams


def normalize_answer(text: str) -> str:
    return " ".join(text.split())


def predict(dec: FrozenDecoder, pp: ProjectorParams, prompt: PromptSequence, emb: GraphEmbeddings,
            max_len: int = 4, image_tokens: str = "pooled") -> str:
    """
    Greedy decoding from the assembled prompt (its gold answer, if any, is not shown). Stops at the end token,
    after ``max_len`` words, or when the decoder's position limit is reached.
    """
    if max_len < 1:
        raise InvariantViolationError(f"max_len must be >= 1, got {max_len}")
    vocab = dec.vocab
    rows = assemble_decoder_input(prompt, pp, emb, dec, image_tokens, with_answer=False).rows
    words: List[str] = []
    while len(words) < max_len:
        logits = dec.logits(rows)
        next_id = int(np.argmax(logits.data[-1]))
        if next_id == vocab.eos_id:
            break
        words.append(vocab.tokens[next_id])
        if rows.shape[0] >= dec.max_positions:
            break
        rows = ops.concat_rows([rows, dec.embed_tokens([next_id])])
    return normalize_answer(" ".join(words))


def evaluate_accuracy(predictions: Sequence[str], truths: Sequence[str]) -> float:
    """Exact-match fraction after whitespace normalization."""
    if len(predictions) != len(truths):
        raise InvariantViolationError(f"{len(predictions)} predictions for {len(truths)} truths")
    if not truths:
        raise InvariantViolationError("accuracy over zero examples")
    return float(accuracy_score([normalize_answer(t) for t in truths], [normalize_answer(p) for p in predictions]))


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    graph: str
    task: str
    mode: str
    prediction: str
    truth: str
    correct: bool

    def to_record(self) -> Dict[str, Any]:
        return asdict(self)


def _anchor_id(anchor) -> str:
    return f"{anchor[0]}-{anchor[1]}" if isinstance(anchor, tuple) else str(anchor)


def evaluate_prompts(dec: FrozenDecoder, pp: ProjectorParams, prompts: Sequence[PromptSequence], emb: GraphEmbeddings,
                     graph_name: str, max_len: int = 4, image_tokens: str = "pooled") -> Tuple[List[PredictionRecord], float]:
    """Predicts every answered prompt in order and scores it against its gold answer."""
    records = []
    for prompt in prompts:
        prediction = predict(dec, pp, prompt, emb, max_len, image_tokens)
        truth = normalize_answer(prompt.answer)
        records.append(PredictionRecord(
            id=f"{graph_name}/{prompt.task.value}/{_anchor_id(prompt.anchor)}", graph=graph_name,
            task=prompt.task.value, mode=prompt.mode.value, prediction=prediction, truth=truth,
            correct=prediction == truth,
        ))
    accuracy = evaluate_accuracy([r.prediction for r in records], [r.truth for r in records])
    return records, accuracy
