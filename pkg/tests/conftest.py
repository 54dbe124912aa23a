import numpy as np
import pytest

from src.aligner.export import GraphEmbeddings
from src.constants import TEST, TRAIN
from src.entity.config_entity import DecoderConfig, RunConfig, SynthConfig
from src.entity.demonstration import Demonstration, DemonstrationSet, Task
from src.graph.store import build_graph
from src.instruct.decoder import FrozenDecoder
from src.instruct.prompts import build_lp_prompt, build_nc_prompt
from src.instruct.vocab import Vocabulary

TOY_LABELS = ("Books", "Games", "Toys")
TOY_TEXTS = ("red wooden train", "blue puzzle box", "green board game", "classic novel", "plush bear")
TOY_CATEGORY = "Toys & Games"


def make_graph(num_nodes, edges, labels=None, splits=None, label_names=("A", "B"), n_t=2, n_v=2, dim=3, seed=0,
               node_text=(), edge_splits=None, name="graph", category=""):
    """Small checked graph with float32-exact random features; every node train and labeled by default."""
    rng = np.random.default_rng(seed)
    txt = rng.standard_normal((num_nodes, n_t, dim)).astype(np.float32).astype(np.float64)
    img = rng.standard_normal((num_nodes, n_v, dim)).astype(np.float32).astype(np.float64)
    if labels is None:
        labels = [v % len(label_names) for v in range(num_nodes)]
    if splits is None:
        splits = [TRAIN] * num_nodes
    return build_graph(num_nodes=num_nodes, edges=edges, txt_features=txt, img_features=img, labels=labels,
                       label_names=label_names, splits=splits, node_text=node_text, edge_splits=edge_splits,
                       name=name, category=category)


@pytest.fixture
def graph_factory():
    return make_graph


@pytest.fixture
def toy_graph():
    """Five products: a triangle 0-1-2, a pendant 3 on node 2 and an isolated node 4."""
    edge_splits = {
        "train": {"pos": [(0, 1)], "neg": [(0, 3)]},
        "test": {"pos": [(2, 3)], "neg": [(1, 3)]},
    }
    return make_graph(5, [(0, 1), (0, 2), (1, 2), (2, 3)], labels=[2, 1, 1, 0, 2],
                      splits=[TRAIN, TRAIN, TRAIN, TEST, TEST], label_names=TOY_LABELS, node_text=TOY_TEXTS,
                      edge_splits=edge_splits, name="toy", category=TOY_CATEGORY)


@pytest.fixture
def toy_nc_demos():
    return DemonstrationSet(task=Task.NC, anchor=3, demos=(
        Demonstration(0, "Toys"), Demonstration(1, "Games"), Demonstration(2, "Games")))


@pytest.fixture
def toy_lp_demos():
    return DemonstrationSet(task=Task.LP, anchor=(2, 3), demos=(Demonstration((0, 1), "Yes"),))


@pytest.fixture
def toy_embeddings():
    rng = np.random.default_rng(11)
    return GraphEmbeddings(pooled=rng.standard_normal((5, 4)), fused=rng.standard_normal((5, 2, 4)),
                           image=rng.standard_normal((5, 4)), image_seq=rng.standard_normal((5, 2, 4)))


@pytest.fixture
def toy_vocab(toy_graph, toy_nc_demos, toy_lp_demos):
    prompts = [build_nc_prompt(toy_graph, 3, toy_nc_demos), build_lp_prompt(toy_graph, 2, 3, toy_lp_demos)]
    texts = [s.payload for p in prompts for s in p.segments if not s.is_slot]
    return Vocabulary.build(texts, TOY_LABELS)


@pytest.fixture
def toy_decoder(toy_vocab):
    decoder = FrozenDecoder.init(DecoderConfig(d_dec=8, n_heads=2, n_layers=1, ffn_mult=2, seed=5), toy_vocab)
    decoder.freeze()
    return decoder


@pytest.fixture
def small_synth_config():
    return SynthConfig(num_nodes=30, num_classes=2, p_in=0.3, p_out=0.02, d_t=4, d_i=4, n_t=2, n_v=2, seed=3)


@pytest.fixture
def tiny_run_values():
    """Flat config of a run small enough to execute every stage in a unit test."""
    return {
        "seed": 3, "num_graphs": 1, "num_nodes": 24, "num_classes": 2, "p_in": 0.4, "p_out": 0.02,
        "d_t": 4, "d_i": 4, "n_t": 2, "n_v": 2, "d": 8, "n_heads": 2, "n_layers": 1, "n_q": 2,
        "batch_size": 8, "aligner_epochs": 1, "d_dec": 8, "dec_heads": 2, "dec_layers": 1, "dec_epochs": 1,
        "dec_batch_size": 16, "tune_epochs": 1, "tune_batch_size": 16, "gradcheck_seeds": 1, "ablate_seeds": 1,
    }


@pytest.fixture
def tiny_run_config(tiny_run_values):
    return RunConfig.from_mapping(tiny_run_values)
