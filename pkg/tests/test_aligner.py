import math

import numpy as np
import pytest

from src.aligner.export import export_embeddings, load_embeddings, save_embeddings
from src.aligner.loss import contrastive_loss
from src.aligner.model import AlignerParams, cross_fuse_layer, encode_features, encode_node, share_attn_layer
from src.aligner.probe import linear_probe, probe_all
from src.aligner.train import anchor_pool, pretrain
from src.constants import TEST, TRAIN
from src.core.checkpoint import state_checksum
from src.core.tensor import Tensor
from src.entity.config_entity import AlignerConfig, SynthConfig
from src.exception import NumericError, ProbeError, TensorShapeError
from src.graph.store import build_graph
from src.graph.synth import modality_keys, synth_graph

D = 8


@pytest.fixture
def aligner():
    cfg = AlignerConfig(d=D, n_heads=2, n_layers=2, n_q=4, batch_size=4)
    return AlignerParams.init(cfg, 3, 3, np.random.default_rng(0))


def test_share_attn_over_one_token_is_value_then_output_map(aligner):
    layer = aligner.layers[0]
    x = Tensor(np.random.default_rng(1).standard_normal((1, D)))
    expected = layer.shared_attn.w_o(layer.shared_attn.w_v(x))
    assert np.allclose(share_attn_layer(layer, x, aligner.n_heads).data, expected.data, atol=1e-12)


def test_one_shared_attention_block_per_layer(aligner):
    names = [name for name, _ in aligner.named_parameters()]
    for i in range(2):
        shared = [n for n in names if n.startswith(f"layers.{i}.shared_attn.")]
        assert len(shared) == 8
    assert not any("txt_attn" in n or "img_attn" in n for n in names)


def test_cross_fuse_returns_one_row_per_query(aligner):
    rng = np.random.default_rng(2)
    queries = Tensor(rng.standard_normal((4, D)))
    img, txt = Tensor(rng.standard_normal((7, D))), Tensor(rng.standard_normal((13, D)))
    assert cross_fuse_layer(aligner.layers[0], queries, img, txt, aligner.n_heads).shape == (4, D)


def test_cross_fuse_drops_an_empty_modality(aligner):
    rng = np.random.default_rng(3)
    queries, txt = Tensor(rng.standard_normal((4, D))), Tensor(rng.standard_normal((5, D)))
    layer = aligner.layers[0]
    empty = cross_fuse_layer(layer, queries, Tensor(np.zeros((0, D))), txt, aligner.n_heads)
    missing = cross_fuse_layer(layer, queries, None, txt, aligner.n_heads)
    assert np.array_equal(empty.data, missing.data)
    with pytest.raises(TensorShapeError):
        cross_fuse_layer(layer, queries, None, None, aligner.n_heads)


def test_encoder_ignores_token_order(aligner):
    rng = np.random.default_rng(4)
    txt, img = rng.standard_normal((1, 5, 3)), rng.standard_normal((1, 4, 3))
    base = encode_features(aligner, txt, img)
    shuffled = encode_features(aligner, txt[:, rng.permutation(5)], img[:, rng.permutation(4)])
    assert np.allclose(base.fused.data, shuffled.fused.data, atol=1e-10)
    assert np.allclose(base.pooled.data, shuffled.pooled.data, atol=1e-10)


def test_identical_features_give_identical_embeddings(aligner):
    rng = np.random.default_rng(5)
    txt, img = rng.standard_normal((1, 3, 3)), rng.standard_normal((1, 2, 3))
    batch = encode_features(aligner, np.repeat(txt, 2, axis=0), np.repeat(img, 2, axis=0))
    assert np.array_equal(batch.pooled.data[0], batch.pooled.data[1])


def test_contrastive_loss_with_indistinguishable_rows():
    e = np.ones((1, 4))
    loss = contrastive_loss(Tensor(np.repeat(e, 2, axis=0)), [Tensor(e), Tensor(e)], tau=0.1)
    assert loss.item() == pytest.approx(math.log(3), abs=1e-12)


def test_contrastive_loss_vanishes_for_separated_pairs():
    e = np.array([[1.0, 0.0, 0.0]])
    loss = contrastive_loss(Tensor(np.vstack([e, -e])), [Tensor(e), Tensor(-e)], tau=0.05)
    assert loss.item() < 1e-10


def test_contrastive_loss_rejects_zero_vectors():
    rows = np.array([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(NumericError):
        contrastive_loss(Tensor(rows), [Tensor([[0.0, 1.0]]), Tensor([[1.0, 1.0]])], tau=0.5)


def test_contrastive_loss_matches_explicit_sum():
    rng = np.random.default_rng(6)
    anchors = rng.standard_normal((3, 5))
    positives = [rng.standard_normal((2, 5)), rng.standard_normal((1, 5)), rng.standard_normal((3, 5))]
    tau = 0.3
    z = np.vstack([anchors] + positives)
    z = z / np.linalg.norm(z, axis=1, keepdims=True)
    terms = []
    offset = 3
    for i, p in enumerate(positives):
        others = [k for k in range(len(z)) if k != i]
        denom = sum(math.exp(z[i] @ z[k] / tau) for k in others)
        for u in range(offset, offset + len(p)):
            terms.append(-math.log(math.exp(z[i] @ z[u] / tau) / denom))
        offset += len(p)
    loss = contrastive_loss(Tensor(anchors), [Tensor(p) for p in positives], tau)
    assert loss.item() == pytest.approx(sum(terms) / len(terms), rel=1e-10)


def test_contrastive_loss_is_scale_invariant():
    rng = np.random.default_rng(7)
    anchors, positives = rng.standard_normal((2, 4)), [rng.standard_normal((1, 4)), rng.standard_normal((2, 4))]
    base = contrastive_loss(Tensor(anchors), [Tensor(p) for p in positives], 0.2).item()
    scaled = contrastive_loss(Tensor(anchors * 1000.0), [Tensor(p * 1e-3) for p in positives], 0.2).item()
    assert scaled == pytest.approx(base, rel=1e-9)


def test_contrastive_loss_needs_two_anchors():
    with pytest.raises(TensorShapeError):
        contrastive_loss(Tensor(np.ones((1, 3))), [Tensor(np.ones((1, 3)))], 0.1)


def test_anchor_pool_skips_isolated_and_held_out_nodes(toy_graph):
    assert anchor_pool(toy_graph).tolist() == [0, 1, 2]


def test_pretrain_is_deterministic(small_synth_config):
    g = synth_graph(small_synth_config)
    cfg = AlignerConfig(d=4, n_heads=2, n_layers=1, n_q=2, batch_size=4, lr=1e-2, epochs=1, max_steps=3, seed=1)
    first, second = pretrain([g], cfg), pretrain([g], cfg)
    assert first.losses == second.losses
    assert len(first.losses) == 3
    assert state_checksum(first.params.state_dict()) == state_checksum(second.params.state_dict())


def test_export_rows_match_single_node_encoding(tmp_path, toy_graph, aligner):
    emb = export_embeddings(aligner, toy_graph)
    assert emb.fused.shape == (5, 4, D)
    assert emb.image_seq.shape == (5, 2, D)
    for v in (0, 4):
        node = encode_node(aligner, toy_graph, v)
        assert np.array_equal(emb.pooled[v], node.pooled.data)
        assert np.array_equal(emb.fused[v], node.fused.data)
    path = str(tmp_path / "emb.ckpt")
    save_embeddings(path, emb)
    loaded = load_embeddings(path)
    assert all(np.array_equal(a, b) for a, b in zip(emb.as_dict().values(), loaded.as_dict().values()))


def test_linear_probe_on_separable_features():
    rng = np.random.default_rng(8)
    labels = np.repeat([0, 1, 2], 20)
    features = np.eye(3)[labels] * 5.0 + 0.1 * rng.standard_normal((60, 3))
    splits = np.where(np.arange(60) % 4 == 0, TEST, TRAIN)
    assert linear_probe(features, labels, splits) == 1.0


def test_linear_probe_needs_two_classes():
    with pytest.raises(ProbeError):
        linear_probe(np.ones((4, 2)), np.zeros(4, dtype=int), np.array([TRAIN, TRAIN, TEST, TEST]))


def test_probe_all_reports_every_source(small_synth_config):
    g = synth_graph(small_synth_config)
    scores = probe_all(g, pooled=np.random.default_rng(0).standard_normal((g.num_nodes, 4)))
    assert set(scores) == {"txt", "img", "concat", "fused"}
    assert all(0.0 <= s <= 1.0 for s in scores.values())


@pytest.mark.slow
def test_pretraining_lowers_the_contrastive_loss():
    g = synth_graph(SynthConfig(num_nodes=80, num_classes=2, p_in=0.2, p_out=0.01, d_t=8, d_i=8, seed=2))
    cfg = AlignerConfig(d=16, n_heads=2, n_layers=1, n_q=4, batch_size=16, lr=1e-2, epochs=15, seed=2)
    history = pretrain([g], cfg).history
    first = np.mean([r.loss for r in history if r.epoch == 0])
    last = np.mean([r.loss for r in history if r.epoch == cfg.epochs - 1])
    assert last < first


def _ring_graph(num_nodes: int, features: np.ndarray):
    edges = [(v, (v + 1) % num_nodes) for v in range(num_nodes)]
    return build_graph(num_nodes, edges, features, features, [v % 2 for v in range(num_nodes)], ["A", "B"],
                       [TRAIN] * num_nodes, name="ring")


def test_first_step_loss_on_identical_nodes_is_log_of_other_members():
    g = _ring_graph(8, np.ones((8, 2, 3)))
    cfg = AlignerConfig(d=4, n_heads=2, n_layers=1, n_q=2, batch_size=8, neighbors_per_anchor=2, max_steps=1)
    first = pretrain([g], cfg).history[0]
    assert first.batch_members == 8
    assert first.loss == pytest.approx(math.log(first.batch_members - 1), abs=1e-9)


def test_first_step_loss_is_near_log_batch_at_high_temperature(small_synth_config):
    g = synth_graph(small_synth_config)
    cfg = AlignerConfig(d=8, n_heads=2, n_layers=1, n_q=2, batch_size=8, tau=100.0, max_steps=1, seed=4)
    first = pretrain([g], cfg).history[0]
    assert first.loss == pytest.approx(math.log(first.batch_members - 1), rel=0.2)


def test_complementary_modalities_each_merge_some_classes():
    classes = np.arange(5)
    txt_keys, img_keys = modality_keys(classes, complementary=True)
    assert len(set(txt_keys.tolist())) < 5 and len(set(img_keys.tolist())) < 5
    assert len(set(zip(txt_keys.tolist(), img_keys.tolist()))) == 5
    plain = modality_keys(classes, complementary=False)
    assert all(np.array_equal(keys, classes) for keys in plain)


def _cosine_means(pooled: np.ndarray, labels: np.ndarray):
    z = pooled / np.linalg.norm(pooled, axis=1, keepdims=True)
    sims = z @ z.T
    same = labels[:, None] == labels[None, :]
    off_diagonal = ~np.eye(len(labels), dtype=bool)
    return sims[same & off_diagonal].mean(), sims[~same].mean()


@pytest.mark.slow
def test_pretrained_embeddings_are_closer_within_a_class():
    g = synth_graph(SynthConfig(num_nodes=80, num_classes=2, p_in=0.2, p_out=0.01, d_t=8, d_i=8, seed=5))
    cfg = AlignerConfig(d=16, n_heads=2, n_layers=1, n_q=4, batch_size=16, lr=1e-2, epochs=10, seed=5)
    pooled = export_embeddings(pretrain([g], cfg).params, g).pooled
    intra, inter = _cosine_means(pooled, g.labels)
    assert intra > inter


@pytest.mark.slow
def test_fused_embeddings_beat_either_modality_on_complementary_graphs():
    fused, best_single = [], []
    for seed in range(5):
        g = synth_graph(SynthConfig(num_nodes=200, num_classes=3, p_in=0.1, p_out=0.005, d_t=8, d_i=8,
                                    txt_signal=0.5, img_signal=0.5, noise_sigma=0.2, complementary=True,
                                    seed=seed))
        cfg = AlignerConfig(d=16, n_heads=2, n_layers=1, n_q=4, batch_size=32, lr=1e-2, epochs=8, seed=seed)
        scores = probe_all(g, export_embeddings(pretrain([g], cfg).params, g).pooled)
        fused.append(scores["fused"])
        best_single.append(max(scores["txt"], scores["img"]))
    assert np.mean(fused) >= 0.85
    assert np.mean(fused) >= np.mean(best_single)
