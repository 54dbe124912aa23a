from dataclasses import replace

import numpy as np
import pytest

from src.components.ablation import Ablation, prepare_run
from src.entity.config_entity import RunConfig, TrainingPipelineConfig

# neighbor-majority labels, text carries the planted class and images carry nothing
DIRECTIONAL_VALUES = {
    "seed": 11, "num_graphs": 1, "num_nodes": 60, "num_classes": 2, "p_in": 0.3, "p_out": 0.02,
    "d_t": 8, "d_i": 8, "n_t": 2, "n_v": 2, "txt_signal": 1.0, "img_signal": 0.0, "noise_sigma": 0.3,
    "label_rule": "neighbor_majority", "d": 16, "n_heads": 2, "n_layers": 1, "n_q": 2, "batch_size": 16,
    "aligner_lr": 0.01, "aligner_epochs": 5, "d_dec": 16, "dec_heads": 2, "dec_layers": 1, "dec_epochs": 6,
    "dec_batch_size": 16, "tune_epochs": 6, "tune_batch_size": 16, "tasks": "nc", "ablate_seeds": 5,
}


def _ablation(tmp_path, **overrides) -> Ablation:
    run_config = RunConfig.from_mapping(dict(DIRECTIONAL_VALUES, **overrides))
    return Ablation(TrainingPipelineConfig(run_config=run_config, artifact_root=str(tmp_path)))


@pytest.mark.slow
def test_demonstrations_and_graph_tokens_each_help(tmp_path):
    summary = _ablation(tmp_path).initiate_ablation().summary
    with_demos = summary["mode/with_demos/nc"]
    no_demos = summary["mode/no_demos/nc"]
    baseline = summary["mode/mllm_baseline/nc"]
    assert with_demos >= no_demos >= baseline


@pytest.mark.slow
def test_tuned_projector_transfers_to_an_unseen_graph(tmp_path):
    ablation = _ablation(tmp_path, num_graphs=3, mode="no_demos")
    tuned, untuned = [], []
    for s in range(3):
        run_config = replace(ablation.run_config, seed=ablation.run_config.seed + s)
        prepared = prepare_run(run_config, ablation.seed_graphs(run_config))
        for row in ablation.transfer_rows(prepared, run_config, run_config.seed):
            (tuned if row["variant"] == "tuned" else untuned).append(row["accuracy"])
    assert len(tuned) == len(untuned) == 3
    assert np.mean(tuned) > np.mean(untuned)


def test_two_graphs_give_tuned_and_untuned_transfer_rows(tmp_path):
    ablation = _ablation(tmp_path, num_graphs=2, num_nodes=24, p_in=0.4, aligner_epochs=1, dec_epochs=1, tune_epochs=1)
    prepared = prepare_run(ablation.run_config, ablation.seed_graphs(ablation.run_config))
    rows = ablation.transfer_rows(prepared, ablation.run_config, seed=0)
    assert sorted(row["variant"] for row in rows) == ["tuned", "untuned"]
    assert all(row["comparison"] == "transfer" and row["task"] == "nc" for row in rows)
    assert all(0.0 <= row["accuracy"] <= 1.0 for row in rows)
