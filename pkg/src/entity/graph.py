from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from src.constants import SPLIT_NAMES, UNLABELED

EDGE_KINDS = ("pos", "neg")


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def empty_edge_splits() -> Dict[str, Dict[str, np.ndarray]]:
    return {s: {k: np.zeros((0, 2), dtype=np.int64) for k in EDGE_KINDS} for s in SPLIT_NAMES}


@dataclass(frozen=True, eq=False)
class MultimodalGraph:
    """
    Immutable multimodal graph: canonical CSR adjacency (both directions stored), per-node text-token and
    image-patch feature sequences, labels (UNLABELED for none), node splits and link-prediction edge splits.

    Construction does not check invariants so that broken graphs can be reported by ``validate``;
    use ``src.graph.store.build_graph`` or ``load_graph`` to get a checked graph.
    """
    num_nodes: int
    offsets: np.ndarray
    neighbors: np.ndarray
    txt_features: np.ndarray
    img_features: np.ndarray
    labels: np.ndarray
    label_names: Tuple[str, ...]
    splits: np.ndarray
    node_text: Tuple[str, ...] = ()
    edge_splits: Dict[str, Dict[str, np.ndarray]] = field(default_factory=empty_edge_splits)
    name: str = "graph"
    category: str = ""

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "offsets", _frozen(self.offsets, np.int64))
        set_(self, "neighbors", _frozen(self.neighbors, np.int64))
        set_(self, "txt_features", _frozen(self.txt_features, np.float64))
        set_(self, "img_features", _frozen(self.img_features, np.float64))
        set_(self, "labels", _frozen(self.labels, np.int64))
        set_(self, "splits", _frozen(self.splits, np.int64))
        set_(self, "label_names", tuple(self.label_names))
        texts = tuple(self.node_text) if self.node_text else tuple("" for _ in range(self.num_nodes))
        set_(self, "node_text", texts)
        edge_splits = empty_edge_splits()
        for split, kinds in (self.edge_splits or {}).items():
            for kind, pairs in kinds.items():
                edge_splits.setdefault(split, {})[kind] = _frozen(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), np.int64)
        set_(self, "edge_splits", edge_splits)

    @property
    def n_t(self) -> int:
        return self.txt_features.shape[1]

    @property
    def d_t(self) -> int:
        return self.txt_features.shape[2]

    @property
    def n_v(self) -> int:
        return self.img_features.shape[1]

    @property
    def d_i(self) -> int:
        return self.img_features.shape[2]

    @property
    def num_classes(self) -> int:
        return len(self.label_names)

    @property
    def num_edges(self) -> int:
        """Undirected edge count."""
        return int(len(self.neighbors) // 2)

    def degree(self, v: int) -> int:
        return int(self.offsets[v + 1] - self.offsets[v])

    def label_of(self, v: int) -> Optional[str]:
        index = int(self.labels[v])
        return None if index == UNLABELED else self.label_names[index]

    def nodes_in_split(self, split: int) -> np.ndarray:
        return np.flatnonzero(self.splits == split)

    def edge_pairs(self) -> np.ndarray:
        """Every undirected edge once, as rows (u, v) with u < v, in CSR order."""
        rows = np.repeat(np.arange(self.num_nodes, dtype=np.int64), np.diff(self.offsets))
        mask = rows < self.neighbors
        return np.stack([rows[mask], self.neighbors[mask]], axis=1)

    def adjacency_matrix(self) -> sp.csr_matrix:
        data = np.ones(len(self.neighbors), dtype=np.float64)
        return sp.csr_matrix((data, self.neighbors, self.offsets), shape=(self.num_nodes, self.num_nodes))

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors[self.offsets[u]:self.offsets[u + 1]]
        i = int(np.searchsorted(row, v))
        return i < len(row) and int(row[i]) == v

    def split_edges(self, split: str, kind: str = "pos") -> np.ndarray:
        return self.edge_splits[split][kind]


def pairs_to_set(pairs: Sequence) -> set:
    return {(min(int(a), int(b)), max(int(a), int(b))) for a, b in pairs}
