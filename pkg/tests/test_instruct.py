import math
import os
from dataclasses import replace

import numpy as np
import pytest

from src.constants import EOS_TOKEN, GRAPH_TOKEN, IMAGE_TOKEN, UNK_TOKEN, UNLABELED
from src.core.checkpoint import state_checksum
from src.core.tensor import Tape, Tensor, backward
from src.entity.config_entity import DecoderConfig, TuneConfig
from src.entity.demonstration import Demonstration, DemonstrationSet, Task
from src.entity.prompt import PromptMode, PromptSegment, PromptSequence, SegmentKind
from src.exception import FrozenParameterError, InvariantViolationError, MissingArtifactError, PromptError
from src.instruct.assembly import assemble_decoder_input, assemble_token_input, instruction_loss
from src.instruct.decoder import FrozenDecoder
from src.instruct.inference import evaluate_accuracy, evaluate_prompts, predict
from src.instruct.projector import ProjectorParams, project
from src.instruct.prompts import build_lp_prompt, build_nc_prompt, build_task_prompts, render_prompt_text
from src.instruct.tuning import pretrain_decoder, training_regime, tune_projector
from src.instruct.vocab import RESERVED_TOKENS, Vocabulary, tokenize

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")
N_Q = 2


def _golden(name: str) -> str:
    with open(os.path.join(GOLDEN_DIR, name), "r", encoding="utf-8") as fh:
        return fh.read()


def _text_tokens(prompt: PromptSequence) -> int:
    return sum(len(tokenize(s.payload)) for s in prompt.segments if not s.is_slot)


@pytest.fixture
def projector(toy_embeddings, toy_decoder):
    return ProjectorParams.init(toy_embeddings.d, toy_decoder.d_dec, np.random.default_rng(3))


@pytest.fixture
def nc_prompt(toy_graph, toy_nc_demos):
    return build_nc_prompt(toy_graph, 3, toy_nc_demos)


def test_node_classification_prompt_matches_golden(nc_prompt):
    assert render_prompt_text(nc_prompt) == _golden("nc_prompt.txt")
    assert nc_prompt.answer == "Books"


def test_link_prediction_prompt_matches_golden(toy_graph, toy_lp_demos):
    prompt = build_lp_prompt(toy_graph, 2, 3, toy_lp_demos)
    assert render_prompt_text(prompt) == _golden("lp_prompt.txt")
    assert prompt.answer == "Yes"
    assert build_lp_prompt(toy_graph, 1, 3, toy_lp_demos).answer == "No"


def test_prompt_modes(toy_graph, toy_nc_demos, nc_prompt):
    assert render_prompt_text(nc_prompt).count("it belongs to") == 3

    no_demos = render_prompt_text(build_nc_prompt(toy_graph, 3, toy_nc_demos, PromptMode.NO_DEMOS))
    assert "Here are" not in no_demos
    assert "demonstrations" not in no_demos
    assert no_demos.count(GRAPH_TOKEN) == 1

    baseline = build_nc_prompt(toy_graph, 3, toy_nc_demos, PromptMode.MLLM_BASELINE)
    assert not baseline.slots(SegmentKind.GRAPH_SLOT)
    assert render_prompt_text(baseline).startswith(f"{IMAGE_TOKEN} classic novel\n")

    zero_shot = render_prompt_text(build_nc_prompt(toy_graph, 3, toy_nc_demos, PromptMode.ZERO_SHOT))
    assert "Product 3's multimodal features are: Text feature" in zero_shot
    assert "it belongs to" not in zero_shot


def test_link_prediction_demos_render_their_answer(toy_graph, toy_lp_demos):
    text = render_prompt_text(build_lp_prompt(toy_graph, 2, 3, toy_lp_demos))
    assert "Purchased or reviewed together: Yes" in text
    edge_slot = build_lp_prompt(toy_graph, 2, 3).slots(SegmentKind.GRAPH_SLOT)[0]
    assert edge_slot.node_refs() == (2, 3)


def test_prompt_rejects_mismatched_demonstrations(toy_graph, toy_lp_demos, graph_factory):
    with pytest.raises(PromptError):
        build_nc_prompt(toy_graph, 3, toy_lp_demos)
    g = graph_factory(3, [(0, 1)], labels=[UNLABELED, 0, 1])
    with pytest.raises(PromptError):
        build_nc_prompt(g, 1, DemonstrationSet(task=Task.NC, anchor=1, demos=(Demonstration(0, "A"),)))
    with pytest.raises(PromptError):
        build_lp_prompt(toy_graph, 2, 2)


def test_task_prompts_need_demonstrations_when_shown(toy_graph, toy_nc_demos):
    prompts = build_task_prompts(toy_graph, Task.NC, "test", {3: toy_nc_demos, 4: toy_nc_demos})
    assert [p.anchor for p in prompts] == [3, 4]
    with pytest.raises(MissingArtifactError):
        build_task_prompts(toy_graph, Task.NC, "test", {3: toy_nc_demos})
    assert len(build_task_prompts(toy_graph, Task.LP, "test", mode=PromptMode.NO_DEMOS)) == 2


def test_vocabulary_layout(toy_vocab):
    assert toy_vocab.tokens[:len(RESERVED_TOKENS)] == (UNK_TOKEN, EOS_TOKEN, IMAGE_TOKEN, GRAPH_TOKEN)
    assert toy_vocab.tokens[4:9] == ("Yes", "No", "Books", "Games", "Toys")
    assert "novel" in toy_vocab
    assert toy_vocab.encode(["plush", "novel"])[0] == toy_vocab.unk_id
    assert toy_vocab.decode(toy_vocab.encode(["classic", "novel"])) == ["classic", "novel"]


def test_vocabulary_file_round_trip(tmp_path, toy_vocab):
    path = str(tmp_path / "vocab.json")
    toy_vocab.save(path)
    assert Vocabulary.load(path) == toy_vocab


def test_projector_maps_rows_to_decoder_width(projector, toy_embeddings):
    out = project(projector, Tensor(toy_embeddings.pooled))
    assert out.shape == (5, 8)
    for layer in (projector.fc1, projector.fc2):
        layer.weight.data = np.zeros_like(layer.weight.data)
        layer.bias.data = np.zeros_like(layer.bias.data)
    assert not np.any(project(projector, Tensor(toy_embeddings.pooled)).data)


def test_swapping_two_words_changes_only_their_positions(projector, toy_embeddings, toy_decoder):
    def prompt(first_words):
        return PromptSequence(task=Task.NC, anchor=0, answer="Toys", segments=(
            PromptSegment(SegmentKind.TEXT, first_words + " "), PromptSegment(SegmentKind.GRAPH_SLOT, 0),
            PromptSegment(SegmentKind.TEXT, " classic novel"),
        ))

    base = assemble_decoder_input(prompt("red wooden train"), projector, toy_embeddings, toy_decoder).rows.data
    swapped = assemble_decoder_input(prompt("train wooden red"), projector, toy_embeddings, toy_decoder).rows.data
    changed = np.flatnonzero(np.any(base != swapped, axis=1)).tolist()
    assert changed == [0, 2]


def test_assembled_length_and_loss_mask(nc_prompt, toy_graph, toy_lp_demos, projector, toy_embeddings, toy_decoder):
    item = assemble_decoder_input(nc_prompt, projector, toy_embeddings, toy_decoder)
    assert item.length == _text_tokens(nc_prompt) + N_Q * 4 + 4 + 1
    assert item.loss_mask().sum() == 2
    assert item.target_positions == [item.prompt_length - 1, item.prompt_length]
    assert item.target_ids == [toy_decoder.vocab.index["Books"], toy_decoder.vocab.eos_id]

    as_sequence = assemble_decoder_input(nc_prompt, projector, toy_embeddings, toy_decoder, image_tokens="sequence")
    assert as_sequence.length == _text_tokens(nc_prompt) + N_Q * 4 + 2 * 4 + 1

    lp = build_lp_prompt(toy_graph, 2, 3, toy_lp_demos)
    lp_item = assemble_decoder_input(lp, projector, toy_embeddings, toy_decoder)
    assert lp_item.length == _text_tokens(lp) + N_Q * 2 * 2 + 2 + 1


def test_inference_input_has_no_targets(nc_prompt, projector, toy_embeddings, toy_decoder):
    item = assemble_decoder_input(nc_prompt, projector, toy_embeddings, toy_decoder, with_answer=False)
    assert item.target_positions == []
    assert item.length == item.prompt_length


def test_untrained_decoder_is_near_uniform(nc_prompt, toy_decoder):
    item = assemble_token_input(nc_prompt, toy_decoder, N_Q, score_prompt=True)
    loss = instruction_loss(toy_decoder, [item]).item()
    expected = math.log(len(toy_decoder.vocab))
    assert abs(loss - expected) / expected < 0.3


def test_repeating_a_batch_leaves_the_loss_unchanged(nc_prompt, projector, toy_embeddings, toy_decoder):
    item = assemble_decoder_input(nc_prompt, projector, toy_embeddings, toy_decoder)
    single = instruction_loss(toy_decoder, [item]).item()
    assert instruction_loss(toy_decoder, [item, item]).item() == pytest.approx(single, rel=1e-12)


def test_gradients_reach_only_the_projector(nc_prompt, projector, toy_embeddings, toy_decoder):
    with Tape() as tape:
        loss = instruction_loss(toy_decoder, [assemble_decoder_input(nc_prompt, projector, toy_embeddings,
                                                                     toy_decoder)])
    backward(loss, tape)
    assert all(p.grad is not None and np.any(p.grad) for p in projector.parameters())
    assert all(p.grad is None for p in toy_decoder.parameters())
    toy_decoder.assert_no_grad("decoder")


def test_decoder_overfits_one_prompt(nc_prompt, toy_graph):
    cfg = DecoderConfig(d_dec=16, n_heads=2, n_layers=1, ffn_mult=2, lr=1e-2, epochs=200, batch_size=1,
                        slot_hint_rate=0.0, slot_width=2, seed=1)
    result = pretrain_decoder([nc_prompt], cfg, label_names=toy_graph.label_names)
    assert result.history[-1].loss < 0.01
    assert result.decoder.is_frozen


def test_tuning_leaves_the_decoder_untouched(toy_graph, toy_embeddings, toy_decoder):
    before = state_checksum(toy_decoder.state_dict())
    cfg = TuneConfig(lr=1e-2, epochs=2, batch_size=2, mode="no_demos", seed=4)
    result = tune_projector([Task.NC], [toy_graph], [{}], [toy_embeddings], toy_decoder, cfg)
    assert state_checksum(toy_decoder.state_dict()) == before == result.decoder_checksum
    assert result.regime == "Single Focus"
    assert len(result.losses) == 4
    assert all(np.isfinite(result.losses))


def test_tuning_without_epochs_returns_the_initial_projector(toy_graph, toy_embeddings, toy_decoder):
    cfg = TuneConfig(epochs=0, mode="no_demos", seed=4)
    result = tune_projector([Task.NC, Task.LP], [toy_graph], [{}], [toy_embeddings], toy_decoder, cfg)
    fresh = ProjectorParams.init(toy_embeddings.d, toy_decoder.d_dec, np.random.default_rng(4))
    assert state_checksum(result.projector.state_dict()) == state_checksum(fresh.state_dict())
    assert result.regime == "Task Generalization"


def test_tuning_requires_a_frozen_decoder(toy_graph, toy_embeddings, toy_vocab):
    live = FrozenDecoder.init(DecoderConfig(d_dec=8, n_heads=2, n_layers=1, ffn_mult=2), toy_vocab)
    with pytest.raises(FrozenParameterError):
        tune_projector([Task.NC], [toy_graph], [{}], [toy_embeddings], live, TuneConfig(mode="no_demos"))


def test_tuning_lowers_the_training_loss(toy_graph, toy_embeddings, toy_decoder):
    cfg = TuneConfig(lr=1e-2, epochs=30, batch_size=3, mode="no_demos", seed=2)
    tuned = tune_projector([Task.NC], [toy_graph], [{}], [toy_embeddings], toy_decoder, cfg).projector
    untuned = tune_projector([Task.NC], [toy_graph], [{}], [toy_embeddings], toy_decoder,
                             replace(cfg, epochs=0)).projector
    prompts = build_task_prompts(toy_graph, Task.NC, "train", mode=PromptMode.NO_DEMOS)

    def loss(pp):
        return instruction_loss(toy_decoder, [assemble_decoder_input(p, pp, toy_embeddings, toy_decoder)
                                              for p in prompts]).item()

    assert loss(tuned) < loss(untuned)


@pytest.mark.parametrize("tasks, graphs, regime", [
    (1, 1, "Single Focus"),
    (1, 3, "Data Generalization"),
    (2, 1, "Task Generalization"),
    (2, 2, "Data & Task Generalization"),
])
def test_training_regime(tasks, graphs, regime):
    assert training_regime(tasks, graphs) == regime


def test_greedy_prediction(nc_prompt, projector, toy_embeddings, toy_decoder):
    first = predict(toy_decoder, projector, nc_prompt, toy_embeddings, max_len=3)
    assert first == predict(toy_decoder, projector, nc_prompt, toy_embeddings, max_len=3)
    assert len(first.split()) <= 3
    assert len(predict(toy_decoder, projector, nc_prompt, toy_embeddings, max_len=1).split()) <= 1
    with pytest.raises(InvariantViolationError):
        predict(toy_decoder, projector, nc_prompt, toy_embeddings, max_len=0)


def test_evaluate_prompts_records_every_anchor(toy_graph, toy_nc_demos, projector, toy_embeddings, toy_decoder):
    prompts = build_task_prompts(toy_graph, Task.NC, "test", {3: toy_nc_demos, 4: toy_nc_demos})
    records, accuracy = evaluate_prompts(toy_decoder, projector, prompts, toy_embeddings, "toy", max_len=2)
    assert [r.id for r in records] == ["toy/nc/3", "toy/nc/4"]
    assert [r.truth for r in records] == ["Books", "Toys"]
    assert accuracy == sum(r.correct for r in records) / 2


@pytest.mark.parametrize("predictions, truths, expected", [
    (["Toys", "Games"], ["Toys", "Games"], 1.0),
    (["Toys", "Games"], ["Games", "Toys"], 0.0),
    (["Yes", "No", "Yes", " Board  Games "], ["Yes", "No", "No", "Board Games"], 0.75),
    (["Board"], ["Board Games"], 0.0),
])
def test_accuracy(predictions, truths, expected):
    assert evaluate_accuracy(predictions, truths) == expected


def test_accuracy_needs_aligned_lists():
    with pytest.raises(InvariantViolationError):
        evaluate_accuracy(["Yes"], ["Yes", "No"])
