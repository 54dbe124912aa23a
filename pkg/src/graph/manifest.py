"""
On-disk graph manifest::

    graph.meta        key=value header (name, category, num_nodes, n_t, d_t, n_v, d_i, classes)
    nodes.jsonl       {"id", "label", "split", "text"} per node
    edges.tsv         u<TAB>v per undirected edge
    edge_splits.tsv   split<TAB>kind<TAB>u<TAB>v, kind in pos/neg
    txt.f32, img.f32  little-endian float32, node-major, row-major
"""

import json
import os
from typing import Dict, Tuple

import numpy as np
import pandas as pd

from src.constants import *
from src.entity.graph import EDGE_KINDS, MultimodalGraph
from src.exception import FeatureShapeError, GraphFormatError, GraphInvariantError, SplitPartitionError
from src.graph.store import build_graph
from src.logger import log
from src.utils.main_utils import require_file

_META_INT_KEYS = ("num_nodes", "n_t", "d_t", "n_v", "d_i")
_BLOB_DTYPE = "<f4"


def _read_meta(path: str) -> Dict[str, str]:
    meta = {}
    with open(require_file(path, "graph header"), "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if "=" not in line:
                raise GraphFormatError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    missing = [k for k in _META_INT_KEYS + ("classes",) if k not in meta]
    if missing:
        raise GraphFormatError(f"{path}: missing header keys {missing}")
    return meta


def _read_pairs(path: str, columns) -> pd.DataFrame:
    require_file(path, "edge list")
    if os.path.getsize(path) == 0:
        return pd.DataFrame({c: pd.Series(dtype="int64" if c in ("u", "v") else "object") for c in columns})
    frame = pd.read_csv(path, sep="\t", header=None, names=list(columns), comment="#")
    if frame[["u", "v"]].isna().any().any():
        raise GraphFormatError(f"{path}: malformed edge line")
    return frame.astype({"u": "int64", "v": "int64"})


def _read_blob(path: str, shape: Tuple[int, int, int]) -> np.ndarray:
    expected = int(np.prod(shape)) * 4
    actual = os.path.getsize(require_file(path, "feature blob"))
    if actual != expected:
        raise FeatureShapeError(f"{path}: {actual} bytes but header declares {shape} float32 = {expected} bytes")
    return np.fromfile(path, dtype=_BLOB_DTYPE).reshape(shape).astype(np.float64)


def load_graph(manifest_path: str) -> MultimodalGraph:
    """
    Loads a graph manifest directory (or its ``graph.meta`` file). Edges are symmetrized.

    Missing files raise MissingArtifactError; blob/header disagreement FeatureShapeError; edges to unknown
    nodes DanglingNodeError; node rows that do not partition into train/val/test SplitPartitionError.
    """
    directory = os.path.dirname(manifest_path) if os.path.isfile(manifest_path) else manifest_path
    meta = _read_meta(os.path.join(directory, GRAPH_META_FILE_NAME))
    n, n_t, d_t, n_v, d_i = (int(meta[k]) for k in _META_INT_KEYS)
    label_names = tuple(json.loads(meta["classes"]))
    label_index = {name: i for i, name in enumerate(label_names)}

    labels = np.full(n, UNLABELED, dtype=np.int64)
    splits = np.full(n, -1, dtype=np.int64)
    texts = [""] * n
    seen = np.zeros(n, dtype=bool)
    nodes_path = require_file(os.path.join(directory, GRAPH_NODES_FILE_NAME), "node file")
    with open(nodes_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            v = int(row["id"])
            if not 0 <= v < n:
                raise SplitPartitionError(f"{nodes_path}:{lineno}: node id {v} outside [0, {n})")
            if seen[v]:
                raise SplitPartitionError(f"{nodes_path}:{lineno}: node {v} listed twice")
            seen[v] = True
            if row.get("split") not in SPLIT_NAMES:
                raise SplitPartitionError(f"{nodes_path}:{lineno}: node {v} has split {row.get('split')!r}")
            splits[v] = SPLIT_NAMES.index(row["split"])
            label = row.get("label")
            if label is not None:
                if label not in label_index:
                    raise GraphInvariantError(f"{nodes_path}:{lineno}: label {label!r} not in classes")
                labels[v] = label_index[label]
            texts[v] = row.get("text") or ""
    if not seen.all():
        raise SplitPartitionError(f"{nodes_path}: {int((~seen).sum())} nodes have no row (first: {int(np.argmin(seen))})")

    edges = _read_pairs(os.path.join(directory, GRAPH_EDGES_FILE_NAME), ("u", "v"))
    edge_splits = {s: {k: np.zeros((0, 2), dtype=np.int64) for k in EDGE_KINDS} for s in SPLIT_NAMES}
    splits_path = os.path.join(directory, GRAPH_EDGE_SPLITS_FILE_NAME)
    if os.path.exists(splits_path):
        table = _read_pairs(splits_path, ("split", "kind", "u", "v"))
        for (split, kind), group in table.groupby(["split", "kind"], sort=False):
            if split not in SPLIT_NAMES or kind not in EDGE_KINDS:
                raise GraphFormatError(f"{splits_path}: unknown split/kind {split}/{kind}")
            edge_splits[split][kind] = group[["u", "v"]].to_numpy(dtype=np.int64)

    txt = _read_blob(os.path.join(directory, GRAPH_TXT_FILE_NAME), (n, n_t, d_t))
    img = _read_blob(os.path.join(directory, GRAPH_IMG_FILE_NAME), (n, n_v, d_i))

    g = build_graph(
        num_nodes=n, edges=edges[["u", "v"]].to_numpy(dtype=np.int64), txt_features=txt, img_features=img,
        labels=labels, label_names=label_names, splits=splits, node_text=texts, edge_splits=edge_splits,
        name=meta.get("name", os.path.basename(os.path.normpath(directory))), category=meta.get("category", ""),
    )
    log.info(f"Loaded graph {g.name!r}: {g.num_nodes} nodes, {g.num_edges} edges, {g.num_classes} classes")
    return g


def save_graph(g: MultimodalGraph, directory: str) -> str:
    """Writes ``g`` as a manifest directory; ``load_graph`` reproduces it bit-exactly for float32-exact features."""
    os.makedirs(directory, exist_ok=True)
    meta_lines = [
        f"name={g.name}",
        f"category={g.category}",
        f"num_nodes={g.num_nodes}",
        f"n_t={g.n_t}", f"d_t={g.d_t}", f"n_v={g.n_v}", f"d_i={g.d_i}",
        f"classes={json.dumps(list(g.label_names), ensure_ascii=False)}",
    ]
    with open(os.path.join(directory, GRAPH_META_FILE_NAME), "w", encoding="utf-8") as fh:
        fh.write("\n".join(meta_lines) + "\n")

    with open(os.path.join(directory, GRAPH_NODES_FILE_NAME), "w", encoding="utf-8") as fh:
        for v in range(g.num_nodes):
            row = {"id": v, "label": g.label_of(v), "split": SPLIT_NAMES[int(g.splits[v])], "text": g.node_text[v]}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    pd.DataFrame(g.edge_pairs(), columns=["u", "v"]).to_csv(
        os.path.join(directory, GRAPH_EDGES_FILE_NAME), sep="\t", header=False, index=False, lineterminator="\n")
    rows = [(split, kind, int(u), int(v)) for split in SPLIT_NAMES for kind in EDGE_KINDS
            for u, v in g.edge_splits[split][kind]]
    pd.DataFrame(rows, columns=["split", "kind", "u", "v"]).to_csv(
        os.path.join(directory, GRAPH_EDGE_SPLITS_FILE_NAME), sep="\t", header=False, index=False, lineterminator="\n")

    g.txt_features.astype(_BLOB_DTYPE).tofile(os.path.join(directory, GRAPH_TXT_FILE_NAME))
    g.img_features.astype(_BLOB_DTYPE).tofile(os.path.join(directory, GRAPH_IMG_FILE_NAME))
    log.info(f"Saved graph {g.name!r} to {directory}")
    return directory
