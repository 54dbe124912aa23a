import numpy as np

from src.constants import SYNTH_LABEL_WORDS, SYNTH_TEXT_LENGTH, SYNTH_TEXT_WORDS
from src.entity.config_entity import SynthConfig
from src.entity.graph import MultimodalGraph
from src.exception import ConfigError
from src.graph.store import build_graph
from src.logger import log

# Maximum draws spent looking for non-edges before accepting fewer negatives.
_NEGATIVE_DRAW_FACTOR = 50


def planted_classes(num_nodes: int, num_classes: int) -> np.ndarray:
    """Balanced contiguous class blocks: node v belongs to block v * C // N."""
    return (np.arange(num_nodes, dtype=np.int64) * num_classes) // num_nodes


def _class_prototypes(rng: np.random.Generator, num_classes: int, length: int, dim: int) -> np.ndarray:
    # rows have norm close to 1 whatever the dimension
    return rng.standard_normal((num_classes, length, dim)) / np.sqrt(dim)


def _modality_features(rng, prototypes, classes, signal, sigma):
    noise = rng.standard_normal((len(classes),) + prototypes.shape[1:])
    feats = signal * prototypes[classes] + sigma * noise
    # float32-exact so that manifests round-trip bit-exactly
    return feats.astype(np.float32).astype(np.float64)


def modality_keys(classes: np.ndarray, complementary: bool):
    """
    Prototype index of each node per modality. In complementary mode text keys on c // 2 and image on
    (c + 1) // 2: neither modality alone separates every class, the pair of keys does.
    """
    if not complementary:
        return classes, classes
    return classes // 2, (classes + 1) // 2


def _neighbor_majority(offsets, neighbors, planted, num_classes) -> np.ndarray:
    labels = planted.copy()
    for v in range(len(planted)):
        nbrs = neighbors[offsets[v]:offsets[v + 1]]
        if len(nbrs) == 0:
            continue
        counts = np.bincount(planted[nbrs], minlength=num_classes)
        winners = np.flatnonzero(counts == counts.max())
        if len(winners) == 1:
            labels[v] = winners[0]
    return labels


def _sample_non_edges(rng, num_nodes, existing: set, count: int) -> np.ndarray:
    found = []
    taken = set()
    for _ in range(count * _NEGATIVE_DRAW_FACTOR):
        if len(found) == count:
            break
        a, b = (int(x) for x in rng.integers(0, num_nodes, size=2))
        pair = (min(a, b), max(a, b))
        if a == b or pair in existing or pair in taken:
            continue
        taken.add(pair)
        found.append(pair)
    return np.asarray(found, dtype=np.int64).reshape(-1, 2)


def _split_sizes(total: int, train_frac: float, val_frac: float):
    n_train = int(round(train_frac * total))
    n_val = min(int(round(val_frac * total)), total - n_train)
    return n_train, n_val


def synth_graph(cfg: SynthConfig) -> MultimodalGraph:
    """
    Planted-partition multimodal graph. Edges inside a class block appear with probability ``p_in``, across
    blocks with ``p_out``. Each modality's tokens are ``signal * prototype[key] + noise_sigma * noise`` where the
    key is the planted class, or a coarsened class per modality when ``complementary`` is set.
    Identical configs give bit-identical graphs.
    """
    if cfg.num_classes > len(SYNTH_LABEL_WORDS):
        raise ConfigError(f"at most {len(SYNTH_LABEL_WORDS)} synthetic classes are supported")
    rng = np.random.default_rng(cfg.seed)
    proto_rng = np.random.default_rng(cfg.seed if cfg.prototype_seed is None else cfg.prototype_seed)
    n = cfg.num_nodes
    planted = planted_classes(n, cfg.num_classes)

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(planted[iu] == planted[ju], cfg.p_in, cfg.p_out)
    keep = rng.random(len(iu)) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1).astype(np.int64)

    txt_proto = _class_prototypes(proto_rng, cfg.num_classes, cfg.n_t, cfg.d_t)
    img_proto = _class_prototypes(proto_rng, cfg.num_classes, cfg.n_v, cfg.d_i)
    txt_keys, img_keys = modality_keys(planted, cfg.complementary)
    txt = _modality_features(rng, txt_proto, txt_keys, cfg.txt_signal, cfg.noise_sigma)
    img = _modality_features(rng, img_proto, img_keys, cfg.img_signal, cfg.noise_sigma)

    order = rng.permutation(n)
    n_train, n_val = _split_sizes(n, cfg.train_frac, cfg.val_frac)
    splits = np.full(n, 2, dtype=np.int64)
    splits[order[:n_train]] = 0
    splits[order[n_train:n_train + n_val]] = 1

    words = np.asarray(SYNTH_TEXT_WORDS)
    texts = [" ".join(words[rng.integers(0, len(words), size=SYNTH_TEXT_LENGTH)]) for _ in range(n)]

    existing = {(int(a), int(b)) for a, b in edges}
    count = min(len(edges), n) if cfg.lp_edge_count is None else min(cfg.lp_edge_count, len(edges))
    chosen = edges[np.sort(rng.choice(len(edges), size=count, replace=False))] if count else edges[:0]
    chosen = chosen[rng.permutation(len(chosen))]
    negatives = _sample_non_edges(rng, n, existing, count)
    lp_train, lp_val = _split_sizes(count, cfg.train_frac, cfg.val_frac)
    bounds = {"train": (0, lp_train), "val": (lp_train, lp_train + lp_val), "test": (lp_train + lp_val, count)}
    edge_splits = {s: {"pos": chosen[a:b], "neg": negatives[a:b]} for s, (a, b) in bounds.items()}

    # label rule needs the symmetrized adjacency, so build once with planted labels first
    g = build_graph(num_nodes=n, edges=edges, txt_features=txt, img_features=img, labels=planted,
                    label_names=SYNTH_LABEL_WORDS[:cfg.num_classes], splits=splits, node_text=texts,
                    edge_splits=edge_splits, name=cfg.name, category=cfg.category)
    if cfg.label_rule == "neighbor_majority":
        labels = _neighbor_majority(g.offsets, g.neighbors, planted, cfg.num_classes)
        g = build_graph(num_nodes=n, edges=edges, txt_features=txt, img_features=img, labels=labels,
                        label_names=g.label_names, splits=splits, node_text=texts, edge_splits=edge_splits,
                        name=cfg.name, category=cfg.category)
    log.info(f"Synthesized graph {cfg.name!r}: {n} nodes, {g.num_edges} edges, {cfg.num_classes} classes, "
             f"{count} LP positives, rule={cfg.label_rule}, complementary={cfg.complementary}")
    return g
