from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.constants import DEMO_DEFAULT_K, DEMO_DEFAULT_LP, NO, PPR_RANK_DECIMALS, YES
from src.demos.ppr import ppr_scores
from src.entity.config_entity import PPRConfig
from src.entity.demonstration import Anchor, Demonstration, DemonstrationSet, Task
from src.entity.graph import MultimodalGraph, pairs_to_set
from src.exception import DanglingNodeError, InvariantViolationError
from src.graph.store import khop_neighborhood, train_labeled_nodes
from src.utils.main_utils import read_jsonl, write_jsonl

Pair = Tuple[int, int]


def select_nc_demos(g: MultimodalGraph, anchor: int, k: int = DEMO_DEFAULT_K, cfg: PPRConfig = PPRConfig(),
                    scores: Optional[np.ndarray] = None) -> DemonstrationSet:
    """
    Top-k labeled train nodes (anchor excluded) by PPR score from the anchor; ties go to the smaller id.
    Scores are rounded before ranking so that ties survive floating-point noise.
    """
    if k < 1:
        raise InvariantViolationError(f"k must be >= 1, got {k}")
    pool = [int(v) for v in train_labeled_nodes(g) if int(v) != int(anchor)]
    if not pool:
        raise InvariantViolationError(f"graph {g.name!r} has no labeled train node to use as a demonstration")
    if scores is None:
        scores = ppr_scores(g, anchor, cfg)
    rounded = np.round(scores, PPR_RANK_DECIMALS)
    ranked = sorted(pool, key=lambda v: (-rounded[v], v))[:k]
    return DemonstrationSet(task=Task.NC, anchor=anchor,
                            demos=tuple(Demonstration(v, g.label_of(v)) for v in ranked))


def _canonical(a: int, b: int) -> Pair:
    return (a, b) if a < b else (b, a)


def lp_candidate_edges(g: MultimodalGraph, u: int, v: int, exclude: Set[Pair] = frozenset()) -> List[Pair]:
    """Edges touching a node within two hops of both u and v, minus (u, v) and ``exclude``; sorted."""
    shared = khop_neighborhood(g, u, 2) & khop_neighborhood(g, v, 2)
    skip = set(exclude) | {_canonical(u, v)}
    out = set()
    for a in shared:
        for b in g.neighbors[g.offsets[a]:g.offsets[a + 1]]:
            pair = _canonical(a, int(b))
            if pair not in skip:
                out.add(pair)
    return sorted(out)


def _incident_edges(g: MultimodalGraph, u: int, v: int, exclude: Set[Pair]) -> List[Pair]:
    skip = set(exclude) | {_canonical(u, v)}
    out = {_canonical(a, int(b)) for a in (u, v) for b in g.neighbors[g.offsets[a]:g.offsets[a + 1]]}
    return sorted(out - skip)


def _non_edges(g: MultimodalGraph, nodes: Iterable[int], exclude: Set[Pair]) -> List[Pair]:
    nodes = sorted(set(nodes))
    return [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]
            if (a, b) not in exclude and not g.has_edge(a, b)]


def select_lp_demos(g: MultimodalGraph, u: int, v: int, n_demos: int = DEMO_DEFAULT_LP,
                    rng: Optional[np.random.Generator] = None, negatives: bool = False,
                    exclude: Set[Pair] = frozenset()) -> DemonstrationSet:
    """
    Demonstration edges for the pair (u, v): up to ``n_demos`` edges sampled from the shared two-hop
    neighborhood, answered "Yes". Without shared candidates, edges incident to u or v are used instead, and
    with none of those the set is empty. With ``negatives``, as many non-edges between shared-neighborhood
    nodes (u and v themselves left out) are added, answered "No". ``exclude`` holds held-out pairs that must
    not be shown, as either answer.
    """
    if u == v:
        raise InvariantViolationError(f"link prediction pair needs two distinct nodes, got ({u}, {v})")
    for node in (u, v):
        if not 0 <= node < g.num_nodes:
            raise DanglingNodeError(f"node {node} outside [0, {g.num_nodes})")
    if n_demos < 1:
        raise InvariantViolationError(f"n_demos must be >= 1, got {n_demos}")
    rng = rng if rng is not None else np.random.default_rng(0)
    exclude = pairs_to_set(exclude) if exclude else set()

    candidates = lp_candidate_edges(g, u, v, exclude) or _incident_edges(g, u, v, exclude)
    picked: List[Pair] = []
    if candidates:
        idx = rng.choice(len(candidates), size=min(n_demos, len(candidates)), replace=False)
        picked = [candidates[i] for i in idx]
    demos = [Demonstration(p, YES) for p in picked]

    if negatives and picked:
        shared = khop_neighborhood(g, u, 2) & khop_neighborhood(g, v, 2)
        pool = _non_edges(g, shared - {u, v}, exclude)
        if pool:
            idx = rng.choice(len(pool), size=min(len(picked), len(pool)), replace=False)
            demos.extend(Demonstration(pool[i], NO) for i in idx)
    return DemonstrationSet(task=Task.LP, anchor=(u, v), demos=tuple(demos))


def build_demo_sets(g: MultimodalGraph, task: Task, anchors: Sequence, cfg: PPRConfig = PPRConfig(),
                    k: int = DEMO_DEFAULT_K, lp_demos: int = DEMO_DEFAULT_LP, negatives: bool = False,
                    exclude: Set[Pair] = frozenset(), seed: int = 0) -> List[DemonstrationSet]:
    """One demonstration set per anchor node (NC) or anchor pair (LP), in anchor order."""
    if Task(task) is Task.NC:
        return [select_nc_demos(g, int(a), k, cfg) for a in anchors]
    rng = np.random.default_rng(seed)
    return [select_lp_demos(g, int(a), int(b), lp_demos, rng, negatives, exclude) for a, b in anchors]


def save_demonstrations(file_path: str, sets: Iterable[DemonstrationSet]) -> int:
    return write_jsonl(file_path, (s.to_record() for s in sets))


def load_demonstrations(file_path: str) -> List[DemonstrationSet]:
    return [DemonstrationSet.from_record(r) for r in read_jsonl(file_path)]


def index_demonstrations(sets: Iterable[DemonstrationSet]) -> Dict[Anchor, DemonstrationSet]:
    """Demonstration sets keyed by anchor; a repeated anchor keeps its last set."""
    return {s.anchor: s for s in sets}
