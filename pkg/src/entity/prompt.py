from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple, Union

from src.entity.demonstration import Anchor, Task


class SegmentKind(str, Enum):
    TEXT = "text"
    IMAGE_SLOT = "image_slot"
    GRAPH_SLOT = "graph_slot"


class PromptMode(str, Enum):
    WITH_DEMOS = "with_demos"
    NO_DEMOS = "no_demos"
    MLLM_BASELINE = "mllm_baseline"
    # demonstrations shown without their answers
    ZERO_SHOT = "zero_shot"


@dataclass(frozen=True)
class PromptSegment:
    kind: SegmentKind
    payload: Union[str, int, Tuple[int, int]]

    @property
    def is_slot(self) -> bool:
        return self.kind is not SegmentKind.TEXT

    def node_refs(self) -> Tuple[int, ...]:
        """Node ids a slot refers to: one for a node, both endpoints for an edge."""
        if not self.is_slot:
            return ()
        if isinstance(self.payload, tuple):
            return self.payload
        return (int(self.payload),)


@dataclass(frozen=True)
class PromptSequence:
    """Ordered text and embedding-slot segments plus the gold answer (empty at inference)."""
    task: Task
    anchor: Anchor
    segments: Tuple[PromptSegment, ...] = field(default_factory=tuple)
    answer: str = ""
    mode: PromptMode = PromptMode.WITH_DEMOS

    def slots(self, kind: SegmentKind) -> Tuple[PromptSegment, ...]:
        return tuple(s for s in self.segments if s.kind is kind)

    def without_answer(self) -> "PromptSequence":
        return PromptSequence(task=self.task, anchor=self.anchor, segments=self.segments, answer="", mode=self.mode)
