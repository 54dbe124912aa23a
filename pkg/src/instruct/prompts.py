"""
Prompt construction. Templates are rendered with slot sentinels in place of the image and graph
placeholders; the rendered string is then cut into text and slot segments.
"""

import os
import re
from functools import lru_cache
from typing import List, Mapping, Optional, Tuple, Union

import numpy as np
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from src.constants import GRAPH_TOKEN, IMAGE_TOKEN, NO, SPLIT_NAMES, UNLABELED, YES
from src.entity.demonstration import Anchor, DemonstrationSet, Task
from src.entity.graph import MultimodalGraph
from src.entity.prompt import PromptMode, PromptSegment, PromptSequence, SegmentKind
from src.exception import DanglingNodeError, MissingArtifactError, PromptError

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "templates")
NC_TEMPLATE = "node_classification.j2"
LP_TEMPLATE = "link_prediction.j2"

_SENTINEL = "\x1e"
_SLOT_RE = re.compile(f"{_SENTINEL}(image|graph):([0-9,]+){_SENTINEL}")
_KIND = {"image": SegmentKind.IMAGE_SLOT, "graph": SegmentKind.GRAPH_SLOT}
_PLACEHOLDER = {SegmentKind.IMAGE_SLOT: IMAGE_TOKEN, SegmentKind.GRAPH_SLOT: GRAPH_TOKEN}


@lru_cache(maxsize=None)
def template_environment() -> Environment:
    return Environment(loader=FileSystemLoader(TEMPLATE_DIR), autoescape=False, keep_trailing_newline=True,
                       undefined=StrictUndefined)


def _slot(kind: str, ref: Union[int, Tuple[int, int]]) -> str:
    payload = f"{ref[0]},{ref[1]}" if isinstance(ref, tuple) else str(ref)
    return f"{_SENTINEL}{kind}:{payload}{_SENTINEL}"


def _parse_segments(rendered: str) -> Tuple[PromptSegment, ...]:
    segments = []
    cursor = 0
    for match in _SLOT_RE.finditer(rendered):
        if match.start() > cursor:
            segments.append(PromptSegment(SegmentKind.TEXT, rendered[cursor:match.start()]))
        ids = tuple(int(x) for x in match.group(2).split(","))
        payload = ids[0] if len(ids) == 1 else ids
        segments.append(PromptSegment(_KIND[match.group(1)], payload))
        cursor = match.end()
    if cursor < len(rendered):
        segments.append(PromptSegment(SegmentKind.TEXT, rendered[cursor:]))
    return tuple(segments)


def _check_node(g: MultimodalGraph, v: int) -> int:
    if not 0 <= int(v) < g.num_nodes:
        raise DanglingNodeError(f"prompt references node {v} outside [0, {g.num_nodes})")
    return int(v)


def _check_demos(demos: Optional[DemonstrationSet], task: Task, mode: PromptMode) -> Tuple:
    if demos is None:
        return ()
    if demos.task is not task:
        raise PromptError(f"{task.value} prompt given {demos.task.value} demonstrations")
    if mode in (PromptMode.NO_DEMOS, PromptMode.MLLM_BASELINE):
        return ()
    return demos.demos


def build_nc_prompt(g: MultimodalGraph, anchor: int, demos: Optional[DemonstrationSet] = None,
                    mode: PromptMode = PromptMode.WITH_DEMOS, with_answer: bool = True) -> PromptSequence:
    """Node-classification prompt; the answer is the anchor's label name (empty when unlabeled or not wanted)."""
    mode = PromptMode(mode)
    anchor = _check_node(g, anchor)
    rows = []
    for demo in _check_demos(demos, Task.NC, mode):
        v = _check_node(g, demo.ref)
        label = g.label_of(v)
        if label is None:
            raise PromptError(f"demonstration node {v} has no label")
        rows.append({"text": g.node_text[v], "image": _slot("image", v), "graph": _slot("graph", v), "answer": label})
    rendered = template_environment().get_template(NC_TEMPLATE).render(
        mode=mode.value, category=g.category, text=g.node_text[anchor], image=_slot("image", anchor),
        graph=_slot("graph", anchor), classes=list(g.label_names), demos=rows,
        show_answers=mode is not PromptMode.ZERO_SHOT,
    )
    answer = (g.label_of(anchor) or "") if with_answer else ""
    return PromptSequence(task=Task.NC, anchor=anchor, segments=_parse_segments(rendered), answer=answer, mode=mode)


def build_lp_prompt(g: MultimodalGraph, u: int, v: int, demos: Optional[DemonstrationSet] = None,
                    mode: PromptMode = PromptMode.WITH_DEMOS, answer: Optional[str] = None) -> PromptSequence:
    """
    Link-prediction prompt for the pair (u, v). The answer defaults to whether the edge exists;
    pass ``answer=""`` for an inference prompt.
    """
    mode = PromptMode(mode)
    u, v = _check_node(g, u), _check_node(g, v)
    if u == v:
        raise PromptError(f"link prediction pair needs two distinct nodes, got ({u}, {v})")
    rows = []
    for demo in _check_demos(demos, Task.LP, mode):
        a, b = (_check_node(g, x) for x in demo.ref)
        if demo.answer not in (YES, NO):
            raise PromptError(f"link prediction demonstration answer must be {YES} or {NO}, got {demo.answer!r}")
        rows.append({"text_a": g.node_text[a], "text_b": g.node_text[b], "image": _slot("image", (a, b)),
                     "graph": _slot("graph", (a, b)), "answer": demo.answer})
    rendered = template_environment().get_template(LP_TEMPLATE).render(
        mode=mode.value, category=g.category, text_a=g.node_text[u], text_b=g.node_text[v],
        image=_slot("image", (u, v)), graph=_slot("graph", (u, v)), demos=rows,
        show_answers=mode is not PromptMode.ZERO_SHOT,
    )
    if answer is None:
        answer = YES if g.has_edge(u, v) else NO
    return PromptSequence(task=Task.LP, anchor=(u, v), segments=_parse_segments(rendered), answer=answer, mode=mode)


def render_prompt_text(prompt: PromptSequence) -> str:
    """The prompt as plain text, slots shown as <image> / <graph>."""
    return "".join(_PLACEHOLDER[s.kind] if s.is_slot else s.payload for s in prompt.segments)


def task_anchors(g: MultimodalGraph, task: Task, split: str) -> List[Tuple[Anchor, str]]:
    """
    (anchor, gold answer) pairs of one split: labeled nodes for node classification, the split's positive
    then negative pairs for link prediction.
    """
    if split not in SPLIT_NAMES:
        raise PromptError(f"unknown split {split!r}")
    if Task(task) is Task.NC:
        nodes = np.flatnonzero((g.splits == SPLIT_NAMES.index(split)) & (g.labels != UNLABELED))
        return [(int(v), g.label_of(int(v))) for v in nodes]
    pairs = [((int(a), int(b)), YES) for a, b in g.split_edges(split, "pos")]
    return pairs + [((int(a), int(b)), NO) for a, b in g.split_edges(split, "neg")]


def build_task_prompts(g: MultimodalGraph, task: Task, split: str,
                       demo_index: Optional[Mapping[Anchor, DemonstrationSet]] = None,
                       mode: PromptMode = PromptMode.WITH_DEMOS) -> List[PromptSequence]:
    """Answered prompts for every anchor of a split, demonstrations looked up by anchor."""
    task, mode = Task(task), PromptMode(mode)
    needs_demos = mode in (PromptMode.WITH_DEMOS, PromptMode.ZERO_SHOT)
    prompts = []
    for anchor, answer in task_anchors(g, task, split):
        demos = None
        if needs_demos:
            demos = (demo_index or {}).get(anchor)
            if demos is None:
                raise MissingArtifactError(f"no demonstrations for {task.value} anchor {anchor} of {g.name!r}")
        if task is Task.NC:
            prompts.append(build_nc_prompt(g, anchor, demos, mode))
        else:
            prompts.append(build_lp_prompt(g, anchor[0], anchor[1], demos, mode, answer=answer))
    return prompts
