from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Tuple, Union

from src.exception import PromptError


class Task(str, Enum):
    NC = "nc"
    LP = "lp"


Anchor = Union[int, Tuple[int, int]]


@dataclass(frozen=True)
class Demonstration:
    """One in-context example: a node with its label (NC) or an edge with Yes/No (LP)."""
    ref: Anchor
    answer: str


@dataclass(frozen=True)
class DemonstrationSet:
    task: Task
    anchor: Anchor
    demos: Tuple[Demonstration, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "anchor", _as_ref(self.task, self.anchor))
        object.__setattr__(self, "demos", tuple(Demonstration(_as_ref(self.task, d.ref), d.answer) for d in self.demos))

    def __len__(self) -> int:
        return len(self.demos)

    def to_record(self) -> Dict[str, Any]:
        """JSON-lines row of the demonstrations file."""
        to_json = (lambda r: list(r)) if self.task is Task.LP else int
        return {
            "task": self.task.value,
            "anchor": to_json(self.anchor),
            "demos": [to_json(d.ref) for d in self.demos],
            "answers": [d.answer for d in self.demos],
        }

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "DemonstrationSet":
        task = Task(record["task"])
        if len(record["demos"]) != len(record["answers"]):
            raise PromptError(f"demonstration record has {len(record['demos'])} ids but {len(record['answers'])} answers")
        demos = tuple(Demonstration(_as_ref(task, ref), ans) for ref, ans in zip(record["demos"], record["answers"]))
        return cls(task=task, anchor=_as_ref(task, record["anchor"]), demos=demos)


def _as_ref(task: Task, ref) -> Anchor:
    if task is Task.NC:
        if isinstance(ref, (list, tuple)):
            raise PromptError(f"node classification reference must be a node id, got {ref!r}")
        return int(ref)
    if not isinstance(ref, (list, tuple)) or len(ref) != 2:
        raise PromptError(f"link prediction reference must be a node pair, got {ref!r}")
    return int(ref[0]), int(ref[1])
