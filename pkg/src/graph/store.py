"""Construction, validation and neighborhood queries over ``MultimodalGraph``."""

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Set

import numpy as np
import scipy.sparse as sp

from src.constants import SPLIT_NAMES, TRAIN, UNLABELED
from src.entity.graph import EDGE_KINDS, MultimodalGraph, pairs_to_set
from src.exception import (DanglingNodeError, FeatureShapeError, GraphInvariantError, SplitPartitionError,
                           InvariantViolationError)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


@dataclass
class ValidationReport:
    graph_name: str
    violations: List[Violation] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def add(self, kind: str, message: str) -> None:
        self.violations.append(Violation(kind, message))

    def kinds(self) -> Set[str]:
        return {v.kind for v in self.violations}

    def to_dict(self) -> dict:
        return {
            "graph": self.graph_name,
            "valid": self.is_valid,
            "violations": [{"kind": v.kind, "message": v.message} for v in self.violations],
        }


_ERROR_BY_KIND = {
    "feature_shape": FeatureShapeError,
    "neighbor_range": DanglingNodeError,
    "edge_split_range": DanglingNodeError,
    "split_partition": SplitPartitionError,
}


def _check_node(g: MultimodalGraph, v: int) -> int:
    if not 0 <= int(v) < g.num_nodes:
        raise DanglingNodeError(f"node id {v} out of range [0, {g.num_nodes})")
    return int(v)


def neighbors(g: MultimodalGraph, v: int) -> List[int]:
    v = _check_node(g, v)
    return g.neighbors[g.offsets[v]:g.offsets[v + 1]].tolist()


def sample_neighbors(g: MultimodalGraph, v: int, k: int, rng: np.random.Generator) -> List[int]:
    """min(k, degree) distinct 1-hop neighbors drawn without replacement; [] for an isolated node."""
    if k < 1:
        raise InvariantViolationError(f"sample_neighbors needs k >= 1, got {k}")
    nbrs = g.neighbors[g.offsets[_check_node(g, v)]:g.offsets[v + 1]]
    if len(nbrs) == 0:
        return []
    return rng.choice(nbrs, size=min(k, len(nbrs)), replace=False).tolist()


def khop_neighborhood(g: MultimodalGraph, v: int, h: int) -> Set[int]:
    """All nodes at distance 1..h from v, v excluded."""
    v = _check_node(g, v)
    if h < 1:
        raise InvariantViolationError(f"khop_neighborhood needs h >= 1, got {h}")
    seen = {v}
    frontier = deque([(v, 0)])
    while frontier:
        node, dist = frontier.popleft()
        if dist == h:
            continue
        for u in g.neighbors[g.offsets[node]:g.offsets[node + 1]]:
            u = int(u)
            if u not in seen:
                seen.add(u)
                frontier.append((u, dist + 1))
    seen.discard(v)
    return seen


def validate(g: MultimodalGraph) -> ValidationReport:
    """Lists every violated graph invariant; an empty report means the graph is valid."""
    report = ValidationReport(graph_name=g.name)
    n = g.num_nodes
    offsets, nbrs = g.offsets, g.neighbors

    structure_ok = True
    if offsets.shape != (n + 1,) or (n + 1 and offsets[0] != 0):
        report.add("offsets", f"offsets must have length {n + 1} and start at 0")
        structure_ok = False
    else:
        if np.any(np.diff(offsets) < 0):
            report.add("offsets", "offsets are not nondecreasing")
            structure_ok = False
        if offsets[-1] != len(nbrs):
            report.add("offsets", f"offsets[num_nodes]={offsets[-1]} but {len(nbrs)} neighbor entries")
            structure_ok = False
    bad = np.flatnonzero((nbrs < 0) | (nbrs >= n))
    if len(bad):
        report.add("neighbor_range", f"neighbor ids out of range: {sorted(set(nbrs[bad].tolist()))[:10]}")
        structure_ok = False

    if structure_ok:
        rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(offsets))
        same_row = rows[1:] == rows[:-1]
        unordered = np.flatnonzero(same_row & (nbrs[1:] <= nbrs[:-1]))
        for i in unordered[:10]:
            report.add("ordering", f"node {rows[i]}: neighbor ids not strictly ascending ({nbrs[i]}, {nbrs[i + 1]})")
        for i in np.flatnonzero(rows == nbrs)[:10]:
            report.add("self_loop", f"self-loop at node {rows[i]}")
        adj = sp.csr_matrix((np.ones(len(nbrs)), nbrs, offsets), shape=(n, n))
        asym = (adj != adj.T).tocoo()
        for i, j in list(zip(asym.row.tolist(), asym.col.tolist()))[:10]:
            if adj[i, j] and not adj[j, i]:
                report.add("symmetry", f"edge ({i}, {j}) present but ({j}, {i}) missing")

    for what, feats in (("txt_features", g.txt_features), ("img_features", g.img_features)):
        if feats.ndim != 3 or feats.shape[0] != n:
            report.add("feature_shape", f"{what} has shape {feats.shape}, expected ({n}, length, dim)")
    if g.txt_features.ndim == 3 and g.img_features.ndim == 3 and g.n_t == 0 and g.n_v == 0:
        report.add("feature_shape", "both modalities are empty")

    if g.labels.shape != (n,):
        report.add("label_range", f"labels has shape {g.labels.shape}, expected ({n},)")
    else:
        out = np.flatnonzero((g.labels != UNLABELED) & ((g.labels < 0) | (g.labels >= len(g.label_names))))
        for v in out[:10]:
            report.add("label_range", f"node {v}: label index {g.labels[v]} outside [0, {len(g.label_names)})")

    if g.splits.shape != (n,) or np.any((g.splits < 0) | (g.splits >= len(SPLIT_NAMES))):
        report.add("split_partition", "every node needs exactly one split in train/val/test")
    if len(g.node_text) != n:
        report.add("node_text", f"{len(g.node_text)} node texts for {n} nodes")

    existing = pairs_to_set(g.edge_pairs()) if structure_ok else set()
    for split, kinds in g.edge_splits.items():
        for kind, pairs in kinds.items():
            if len(pairs) and (pairs.min() < 0 or pairs.max() >= n):
                report.add("edge_split_range", f"{split}/{kind} edges reference node ids outside [0, {n})")
                continue
            if np.any(pairs[:, 0] == pairs[:, 1]):
                report.add("edge_split", f"{split}/{kind} contains a self pair")
            if kind == "neg" and structure_ok:
                present = pairs_to_set(pairs) & existing
                for pair in sorted(present)[:10]:
                    report.add("negative_edge", f"{split} negative edge {pair} exists in the adjacency")
    return report


def raise_on_violations(report: ValidationReport) -> None:
    if report.is_valid:
        return
    first = report.violations[0]
    error = _ERROR_BY_KIND.get(first.kind, GraphInvariantError)
    summary = "; ".join(f"[{v.kind}] {v.message}" for v in report.violations[:5])
    raise error(f"graph {report.graph_name!r} is invalid: {summary}")


def build_graph(num_nodes: int, edges: Sequence, txt_features: np.ndarray, img_features: np.ndarray,
                labels: Sequence[int], label_names: Sequence[str], splits: Sequence[int],
                node_text: Sequence[str] = (), edge_splits: Optional[Mapping[str, Mapping[str, np.ndarray]]] = None,
                name: str = "graph", category: str = "") -> MultimodalGraph:
    """
    Builds a checked graph from an undirected edge list. Edges are symmetrized and deduplicated;
    self-loops and ids outside the node range are errors.
    """
    pairs = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(pairs) and (pairs.min() < 0 or pairs.max() >= num_nodes):
        bad = pairs[(pairs < 0).any(axis=1) | (pairs >= num_nodes).any(axis=1)][0]
        raise DanglingNodeError(f"edge ({bad[0]}, {bad[1]}) references a node outside [0, {num_nodes})")
    loops = pairs[pairs[:, 0] == pairs[:, 1]]
    if len(loops):
        raise GraphInvariantError(f"self-loop at node {loops[0, 0]}")

    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(num_nodes, num_nodes)).tocsr()
    adj.sum_duplicates()
    adj.sort_indices()

    feats_t = np.asarray(txt_features, dtype=np.float64)
    feats_i = np.asarray(img_features, dtype=np.float64)
    for what, feats in (("txt_features", feats_t), ("img_features", feats_i)):
        if feats.ndim != 3 or feats.shape[0] != num_nodes:
            raise FeatureShapeError(f"{what} has shape {feats.shape}, expected ({num_nodes}, length, dim)")

    g = MultimodalGraph(
        num_nodes=num_nodes, offsets=adj.indptr, neighbors=adj.indices, txt_features=feats_t,
        img_features=feats_i, labels=labels, label_names=tuple(label_names), splits=splits,
        node_text=tuple(node_text), edge_splits={s: dict(k) for s, k in (edge_splits or {}).items()},
        name=name, category=category,
    )
    raise_on_violations(validate(g))
    return g


def train_labeled_nodes(g: MultimodalGraph) -> np.ndarray:
    return np.flatnonzero((g.splits == TRAIN) & (g.labels != UNLABELED))


def edge_split_sets(g: MultimodalGraph) -> Dict[str, Set]:
    """Undirected pair sets of every ``split/kind`` edge list."""
    return {f"{s}/{k}": pairs_to_set(g.edge_splits[s][k]) for s in g.edge_splits for k in EDGE_KINDS}


def held_out_pairs(g: MultimodalGraph) -> Set:
    """Every validation and test LP pair, positive or negative."""
    pairs: Set = set()
    for split in ("val", "test"):
        for kind in EDGE_KINDS:
            pairs |= pairs_to_set(g.split_edges(split, kind))
    return pairs


def training_view(g: MultimodalGraph) -> MultimodalGraph:
    """
    The graph that pretraining, embedding export and demonstration selection see: validation and test LP
    positives are removed from the adjacency. Edge split lists are kept unchanged, so evaluation still
    knows every held-out pair and its answer.
    """
    held_out = pairs_to_set(g.split_edges("val", "pos")) | pairs_to_set(g.split_edges("test", "pos"))
    if not held_out:
        return g
    kept = [pair for pair in g.edge_pairs().tolist() if tuple(pair) not in held_out]
    return build_graph(num_nodes=g.num_nodes, edges=np.asarray(kept, dtype=np.int64).reshape(-1, 2),
                       txt_features=g.txt_features, img_features=g.img_features, labels=g.labels,
                       label_names=g.label_names, splits=g.splits, node_text=g.node_text,
                       edge_splits=g.edge_splits, name=g.name, category=g.category)
