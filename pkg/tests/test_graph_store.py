import os

import numpy as np
import pytest

from src.constants import GRAPH_EDGES_FILE_NAME, GRAPH_IMG_FILE_NAME, GRAPH_NODES_FILE_NAME
from src.entity.config_entity import SynthConfig
from src.entity.graph import MultimodalGraph, pairs_to_set
from src.exception import (ConfigError, DanglingNodeError, FeatureShapeError, MissingArtifactError,
                           SplitPartitionError)
from src.graph.manifest import load_graph, save_graph
from src.graph.store import (held_out_pairs, khop_neighborhood, neighbors, sample_neighbors, training_view,
                             validate)
from src.graph.synth import synth_graph


def _same_graph(a: MultimodalGraph, b: MultimodalGraph) -> bool:
    arrays = ("offsets", "neighbors", "txt_features", "img_features", "labels", "splits")
    same = all(np.array_equal(getattr(a, k), getattr(b, k)) for k in arrays)
    same &= (a.num_nodes, a.label_names, a.node_text, a.name, a.category) == \
            (b.num_nodes, b.label_names, b.node_text, b.name, b.category)
    for split, kinds in a.edge_splits.items():
        for kind, pairs in kinds.items():
            same &= np.array_equal(pairs, b.edge_splits[split][kind])
    return bool(same)


def test_manifest_round_trip_is_bit_exact(tmp_path, toy_graph):
    loaded = load_graph(save_graph(toy_graph, str(tmp_path / "toy")))
    assert _same_graph(toy_graph, loaded)


def test_load_accepts_the_header_file_path(tmp_path, toy_graph):
    directory = save_graph(toy_graph, str(tmp_path / "toy"))
    assert load_graph(os.path.join(directory, "graph.meta")).num_nodes == 5


def test_large_manifest_without_edges(tmp_path, graph_factory):
    names = tuple(f"class_{i}" for i in range(19))
    g = graph_factory(16672, np.zeros((0, 2)), labels=np.arange(16672) % 19, label_names=names, n_t=1, n_v=1,
                      dim=1)
    loaded = load_graph(save_graph(g, str(tmp_path / "big")))
    assert loaded.num_nodes == 16672
    assert len(loaded.label_names) == 19
    assert loaded.num_edges == 0
    assert all(neighbors(loaded, v) == [] for v in (0, 100, 16671))


def test_single_edge_is_symmetrized(graph_factory):
    g = graph_factory(10, [(3, 9)])
    assert neighbors(g, 3) == [9]
    assert neighbors(g, 9) == [3]
    assert g.has_edge(9, 3)


def test_missing_file_is_reported(tmp_path, toy_graph):
    directory = save_graph(toy_graph, str(tmp_path / "toy"))
    os.remove(os.path.join(directory, GRAPH_NODES_FILE_NAME))
    with pytest.raises(MissingArtifactError):
        load_graph(directory)


def test_truncated_blob_is_a_shape_error(tmp_path, toy_graph):
    directory = save_graph(toy_graph, str(tmp_path / "toy"))
    path = os.path.join(directory, GRAPH_IMG_FILE_NAME)
    with open(path, "rb") as fh:
        raw = fh.read()
    with open(path, "wb") as fh:
        fh.write(raw[:-4])
    with pytest.raises(FeatureShapeError):
        load_graph(directory)


def test_dangling_edge_is_reported(tmp_path, toy_graph):
    directory = save_graph(toy_graph, str(tmp_path / "toy"))
    with open(os.path.join(directory, GRAPH_EDGES_FILE_NAME), "a", encoding="utf-8") as fh:
        fh.write("1\t7\n")
    with pytest.raises(DanglingNodeError):
        load_graph(directory)


def test_node_without_split_row_is_reported(tmp_path, toy_graph):
    directory = save_graph(toy_graph, str(tmp_path / "toy"))
    path = os.path.join(directory, GRAPH_NODES_FILE_NAME)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(lines[:-1])
    with pytest.raises(SplitPartitionError):
        load_graph(directory)


def test_synth_cliques_are_forced_by_probabilities():
    g = synth_graph(SynthConfig(num_nodes=4, num_classes=2, p_in=1.0, p_out=0.0, label_rule="planted"))
    assert g.edge_pairs().tolist() == [[0, 1], [2, 3]]
    assert g.labels.tolist() == [0, 0, 1, 1]


def test_synth_is_deterministic(tmp_path, small_synth_config):
    first = save_graph(synth_graph(small_synth_config), str(tmp_path / "a"))
    second = save_graph(synth_graph(small_synth_config), str(tmp_path / "b"))
    for name in sorted(os.listdir(first)):
        with open(os.path.join(first, name), "rb") as fa, open(os.path.join(second, name), "rb") as fb:
            assert fa.read() == fb.read(), name


def test_synth_without_cross_edges_keeps_components_pure():
    g = synth_graph(SynthConfig(num_nodes=40, num_classes=4, p_in=0.3, p_out=0.0, label_rule="planted", seed=9))
    for u, v in g.edge_pairs():
        assert g.labels[u] == g.labels[v]


def test_synth_lp_splits_hold_edges_and_non_edges(small_synth_config):
    g = synth_graph(small_synth_config)
    for split in ("train", "val", "test"):
        assert all(g.has_edge(int(u), int(v)) for u, v in g.split_edges(split, "pos"))
        assert not any(g.has_edge(int(u), int(v)) for u, v in g.split_edges(split, "neg"))


def test_training_view_hides_held_out_positives():
    g = synth_graph(SynthConfig(num_nodes=120, num_classes=3, p_in=0.1, p_out=0.005, seed=7))
    view = training_view(g)
    hidden = pairs_to_set(g.split_edges("val", "pos")) | pairs_to_set(g.split_edges("test", "pos"))
    assert hidden and all(g.has_edge(u, v) for u, v in hidden)
    assert not any(view.has_edge(u, v) for u, v in hidden)
    assert all(view.has_edge(int(u), int(v)) for u, v in g.split_edges("train", "pos"))
    assert view.num_edges == g.num_edges - len(hidden)
    assert pairs_to_set(view.edge_pairs()) == pairs_to_set(g.edge_pairs()) - hidden
    for split, kinds in g.edge_splits.items():
        for kind, pairs in kinds.items():
            assert np.array_equal(view.split_edges(split, kind), pairs)
    assert np.array_equal(view.labels, g.labels)


def test_training_view_of_toy_graph(toy_graph):
    view = training_view(toy_graph)
    assert not view.has_edge(2, 3)
    assert view.degree(3) == 0
    assert held_out_pairs(toy_graph) == {(2, 3), (1, 3)}
    assert training_view(view).edge_pairs().tolist() == view.edge_pairs().tolist()


def test_synth_config_rejects_bad_probabilities():
    with pytest.raises(ConfigError):
        SynthConfig(p_in=0.1, p_out=0.5)


@pytest.mark.parametrize("edges, v, expected", [
    ([(0, 1), (1, 2), (0, 2)], 0, [1, 2]),
    ([(0, 1)], 2, []),
    ([(0, 1), (1, 2)], 1, [0, 2]),
])
def test_neighbors(graph_factory, edges, v, expected):
    assert neighbors(graph_factory(3, edges), v) == expected


def test_neighbors_rejects_unknown_node(graph_factory):
    with pytest.raises(DanglingNodeError):
        neighbors(graph_factory(3, [(0, 1)]), 3)


def test_sample_neighbors(graph_factory):
    star = graph_factory(11, [(0, v) for v in range(1, 11)])
    rng = np.random.default_rng(0)
    picked = sample_neighbors(star, 0, 5, rng)
    assert len(picked) == 5 and len(set(picked)) == 5
    assert set(picked) <= set(neighbors(star, 0))

    small = graph_factory(5, [(0, 1), (0, 2), (0, 3)])
    assert sorted(sample_neighbors(small, 0, 5, rng)) == [1, 2, 3]
    assert sample_neighbors(small, 4, 5, rng) == []


def test_sample_neighbors_is_seeded(graph_factory):
    star = graph_factory(11, [(0, v) for v in range(1, 11)])
    draws = [sample_neighbors(star, 0, 5, np.random.default_rng(42)) for _ in range(2)]
    assert draws[0] == draws[1]


def test_khop_neighborhood(graph_factory):
    path = graph_factory(4, [(0, 1), (1, 2), (2, 3)])
    assert khop_neighborhood(path, 0, 2) == {1, 2}
    clique = graph_factory(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])
    assert khop_neighborhood(clique, 0, 1) == {1, 2, 3}
    assert khop_neighborhood(graph_factory(3, [(0, 1)]), 2, 2) == set()


def test_khop_is_monotone(small_synth_config):
    g = synth_graph(small_synth_config)
    for v in range(0, g.num_nodes, 5):
        assert set(neighbors(g, v)) <= khop_neighborhood(g, v, 1)
        assert khop_neighborhood(g, v, 2) <= khop_neighborhood(g, v, 3)


def test_validate_reports_nothing_for_a_valid_graph(toy_graph):
    assert validate(toy_graph).is_valid


def test_validate_names_asymmetric_edge(toy_graph):
    broken = MultimodalGraph(
        num_nodes=3, offsets=[0, 1, 1, 1], neighbors=[2], txt_features=toy_graph.txt_features[:3],
        img_features=toy_graph.img_features[:3], labels=[0, 0, 0], label_names=("A",), splits=[0, 0, 0],
    )
    report = validate(broken)
    assert "symmetry" in report.kinds()
    assert any("(0, 2)" in v.message for v in report.violations)


def test_validate_names_label_out_of_range(toy_graph):
    broken = MultimodalGraph(
        num_nodes=2, offsets=[0, 0, 0], neighbors=[], txt_features=toy_graph.txt_features[:2],
        img_features=toy_graph.img_features[:2], labels=[0, 1], label_names=("A",), splits=[0, 0],
    )
    assert "label_range" in validate(broken).kinds()
