"""
Two training loops of the instruction stage: pretraining the stand-in decoder on answered prompts (after which
it is frozen for good), and tuning the projector against that frozen decoder.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.aligner.export import GraphEmbeddings
from src.aligner.model import AlignerParams
from src.core.checkpoint import state_checksum
from src.core.optim import AdamState, adam_step
from src.core.tensor import Tape, backward
from src.entity.config_entity import DecoderConfig, TuneConfig
from src.entity.demonstration import Anchor, DemonstrationSet, Task
from src.entity.graph import MultimodalGraph
from src.entity.prompt import PromptMode, PromptSegment, PromptSequence, SegmentKind
from src.exception import FrozenParameterError, InvariantViolationError, PromptError
from src.instruct.assembly import assemble_decoder_input, assemble_token_input, instruction_loss
from src.instruct.decoder import FrozenDecoder
from src.instruct.projector import ProjectorParams
from src.instruct.prompts import build_task_prompts
from src.instruct.vocab import Vocabulary, tokenize
from src.logger import log

DemoIndex = Mapping[Task, Mapping[Anchor, DemonstrationSet]]

REGIMES = {
    (False, False): "Single Focus",
    (False, True): "Data Generalization",
    (True, False): "Task Generalization",
    (True, True): "Data & Task Generalization",
}


def training_regime(num_tasks: int, num_graphs: int) -> str:
    if num_tasks < 1 or num_graphs < 1:
        raise InvariantViolationError("a training regime needs at least one task and one graph")
    return REGIMES[(num_tasks > 1, num_graphs > 1)]


@dataclass(frozen=True)
class StepRecord:
    step: int
    epoch: int
    stream: str
    batch_size: int
    loss: float


@dataclass
class DecoderPretrainResult:
    decoder: FrozenDecoder
    history: List[StepRecord] = field(default_factory=list)

    def epoch_means(self) -> List[float]:
        epochs = sorted({r.epoch for r in self.history})
        return [float(np.mean([r.loss for r in self.history if r.epoch == e])) for e in epochs]


@dataclass
class TuneResult:
    projector: ProjectorParams
    regime: str
    history: List[StepRecord] = field(default_factory=list)
    decoder_checksum: str = ""
    aligner_checksum: str = ""

    @property
    def losses(self) -> List[float]:
        return [r.loss for r in self.history]


def _slot_hints(hints: Optional[Mapping[int, str]], rng: np.random.Generator, rate: float):
    """
    Slot filler for decoder pretraining: with probability ``rate`` a slot whose nodes all carry a hint is
    filled with their label words instead of the placeholder token. Image slots over two nodes stay opaque.
    """
    def fill(seg: PromptSegment, width: int) -> Optional[List[str]]:
        if not hints or rng.random() >= rate:
            return None
        refs = seg.node_refs()
        if any(v not in hints for v in refs):
            return None
        if seg.kind is SegmentKind.IMAGE_SLOT and len(refs) > 1:
            return None
        per_node = max(width // len(refs), 1)
        words: List[str] = []
        for v in refs:
            label = tokenize(hints[v])
            words.extend(label[i % len(label)] for i in range(per_node))
        return words

    return fill


def pretrain_decoder(corpus: Sequence[PromptSequence], cfg: DecoderConfig, label_names: Sequence[str] = (),
                     hint_labels: Optional[Sequence[Mapping[int, str]]] = None, image_tokens: str = "pooled",
                     n_v: int = 1) -> DecoderPretrainResult:
    """
    Next-token training of a fresh decoder on answered prompts, slots rendered as placeholder tokens
    ``cfg.slot_width`` wide per graph node. ``hint_labels[i]`` maps node ids of prompt i to label names used
    for slot hints. The decoder is frozen before it is returned.
    """
    if not corpus:
        raise InvariantViolationError("decoder pretraining needs a nonempty corpus")
    if hint_labels is not None and len(hint_labels) != len(corpus):
        raise InvariantViolationError(f"{len(hint_labels)} hint maps for {len(corpus)} prompts")
    if any(not p.answer for p in corpus):
        raise PromptError("every decoder pretraining prompt needs a gold answer")

    texts = [s.payload for p in corpus for s in p.segments if not s.is_slot] + [p.answer for p in corpus]
    vocab = Vocabulary.build(texts, label_names)
    dec = FrozenDecoder.init(cfg, vocab)
    trainable = dec.parameters()
    state = AdamState.create(trainable, cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    result = DecoderPretrainResult(decoder=dec)
    log.info(f"Decoder pretraining: {len(corpus)} prompts, vocabulary {len(vocab)}, d_dec {cfg.d_dec}, "
             f"{cfg.epochs} epochs")

    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(corpus))
        for start in range(0, len(order), cfg.batch_size):
            members = order[start:start + cfg.batch_size]
            with Tape() as tape:
                batch = [
                    assemble_token_input(
                        corpus[i], dec, cfg.slot_width, image_tokens, n_v,
                        slot_fill=_slot_hints(hint_labels[i] if hint_labels else None, rng, cfg.slot_hint_rate),
                        score_prompt=cfg.loss_on == "all",
                    )
                    for i in members
                ]
                loss = instruction_loss(dec, batch)
            backward(loss, tape)
            adam_step(trainable, state)
            result.history.append(StepRecord(step, epoch, "decoder", len(members), loss.item()))
            step += 1
        log.info(f"Decoder epoch {epoch}: mean loss {result.epoch_means()[-1]:.6f}")

    dec.freeze()
    return result


def _streams(tasks: Sequence[Task], graphs: Sequence[MultimodalGraph], demos: Sequence[DemoIndex], mode: PromptMode,
             split: str) -> List[Tuple[str, int, List[PromptSequence]]]:
    streams = []
    for gi, g in enumerate(graphs):
        for task in tasks:
            prompts = build_task_prompts(g, task, split, demos[gi].get(task, {}) if demos else None, mode)
            if prompts:
                streams.append((f"{g.name}/{task.value}", gi, prompts))
            else:
                log.info(f"No {task.value} {split} anchors in {g.name!r}; stream skipped")
    return streams


def tune_projector(tasks: Sequence[Task], graphs: Sequence[MultimodalGraph], demos: Sequence[DemoIndex],
                   embeddings: Sequence[GraphEmbeddings], decoder: FrozenDecoder, cfg: TuneConfig,
                   aligner_params: Optional[AlignerParams] = None, split: str = "train") -> TuneResult:
    """
    Adam over the projector only. Every (graph, task) pair is a stream of answered prompts shuffled per epoch;
    single-stream batches are interleaved round-robin. The decoder must already be frozen; decoder and aligner
    parameters are checksummed before and after and any change raises FrozenParameterError.
    With ``cfg.epochs == 0`` the freshly initialized projector is returned.
    """
    try:
        tasks = [Task(t) for t in dict.fromkeys(tasks)]
    except ValueError as e:
        raise InvariantViolationError(str(e)) from e
    if not graphs or not tasks:
        raise InvariantViolationError("projector tuning needs at least one graph and one task")
    if len(embeddings) != len(graphs) or (demos and len(demos) != len(graphs)):
        raise InvariantViolationError("graphs, embeddings and demonstrations must align one to one")
    if not decoder.is_frozen:
        raise FrozenParameterError("the decoder must be frozen before projector tuning")
    if aligner_params is not None and any(p.requires_grad for p in aligner_params.parameters()):
        raise FrozenParameterError("the aligner must be frozen before projector tuning")
    for g, emb in zip(graphs, embeddings):
        if emb.num_nodes != g.num_nodes or emb.d != embeddings[0].d:
            raise InvariantViolationError(f"embeddings of {g.name!r} do not match the graph or each other")

    regime = training_regime(len(tasks), len(graphs))
    decoder_sum = state_checksum(decoder.state_dict())
    aligner_sum = state_checksum(aligner_params.state_dict()) if aligner_params is not None else ""

    projector = ProjectorParams.init(embeddings[0].d, decoder.d_dec, np.random.default_rng(cfg.seed))
    trainable = projector.parameters()
    state = AdamState.create(trainable, cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    streams = _streams(tasks, graphs, demos, PromptMode(cfg.mode), split)
    if not streams and cfg.epochs > 0:
        raise InvariantViolationError(f"no {split} prompts to tune on")
    result = TuneResult(projector=projector, regime=regime, decoder_checksum=decoder_sum, aligner_checksum=aligner_sum)
    log.info(f"Projector tuning [{regime}]: streams {[(name, len(p)) for name, _, p in streams]}, "
             f"mode {cfg.mode}, image tokens {cfg.image_tokens}")

    step = 0
    for epoch in range(cfg.epochs):
        per_stream = []
        for name, gi, prompts in streams:
            order = rng.permutation(len(prompts))
            per_stream.append([(name, gi, [prompts[i] for i in order[s:s + cfg.batch_size]])
                               for s in range(0, len(order), cfg.batch_size)])
        schedule = []
        for round_ in range(max(len(b) for b in per_stream)):
            schedule.extend(batches[round_] for batches in per_stream if round_ < len(batches))

        epoch_losses = []
        for name, gi, batch in schedule:
            with Tape() as tape:
                items = [assemble_decoder_input(p, projector, embeddings[gi], decoder, cfg.image_tokens) for p in batch]
                loss = instruction_loss(decoder, items)
            backward(loss, tape)
            decoder.assert_no_grad("decoder")
            if aligner_params is not None:
                aligner_params.assert_no_grad("aligner")
            adam_step(trainable, state)
            result.history.append(StepRecord(step, epoch, name, len(batch), loss.item()))
            epoch_losses.append(loss.item())
            step += 1
        log.info(f"Projector epoch {epoch}: {len(epoch_losses)} steps, mean loss {np.mean(epoch_losses):.6f}")

    if state_checksum(decoder.state_dict()) != decoder_sum:
        raise FrozenParameterError("decoder parameters changed during projector tuning")
    if aligner_params is not None and state_checksum(aligner_params.state_dict()) != aligner_sum:
        raise FrozenParameterError("aligner parameters changed during projector tuning")
    return result


def label_hints(g: MultimodalGraph, nodes: Sequence[int]) -> Dict[int, str]:
    """Label names of the given nodes that carry one."""
    return {int(v): g.label_of(int(v)) for v in nodes if g.label_of(int(v)) is not None}
