import sys
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from src.aligner.export import GraphEmbeddings, export_embeddings
from src.aligner.probe import probe_all
from src.aligner.train import pretrain
from src.components.demo_builder import build_graph_demos, index_by_task
from src.components.model_evaluation import evaluate_model
from src.components.projector_tuner import train_instruct_model
from src.entity.artifact_entity import AblationArtifact
from src.entity.config_entity import RunConfig, TrainingPipelineConfig
from src.entity.estimator import GraphPromptModel
from src.entity.graph import MultimodalGraph
from src.exception import CustomException, ProbeError
from src.graph.store import training_view
from src.graph.synth import synth_graph
from src.components.graph_ingestion import load_run_graphs
from src.instruct.tuning import DemoIndex, tune_projector
from src.logger import log
from src.utils.main_utils import write_tsv

ABLATION_COLUMNS = ("comparison", "variant", "task", "seed", "accuracy")
ABLATION_MODES = ("with_demos", "no_demos", "mllm_baseline")
PROBE_VARIANTS = ("txt", "img", "fused")


@dataclass
class PreparedRun:
    """Everything upstream of the instruction stage, kept in memory."""
    graphs: List[MultimodalGraph]
    embeddings: List[GraphEmbeddings]
    demos: List[DemoIndex]
    probes: Dict[str, Dict[str, float]]


def prepare_run(run_config: RunConfig, graphs: Sequence[MultimodalGraph]) -> PreparedRun:
    aligner = pretrain(graphs, run_config.aligner_config()).params
    aligner.freeze()
    splits = list(dict.fromkeys(["train", run_config.eval_split]))
    embeddings, demos, probes = [], [], {}
    for g in graphs:
        emb = export_embeddings(aligner, g)
        embeddings.append(emb)
        demos.append(index_by_task(build_graph_demos(g, run_config, run_config.task_list, splits)))
        try:
            probes[g.name] = probe_all(g, emb.pooled, seed=run_config.seed)
        except ProbeError as e:
            log.info(f"Linear probe skipped for {g.name!r}: {e}")
    return PreparedRun(list(graphs), embeddings, demos, probes)


class Ablation:
    def __init__(self, pipeline_config: TrainingPipelineConfig):
        """
        :param pipeline_config: Run configuration and artifact layout
        """
        self.pipeline_config = pipeline_config
        self.run_config = pipeline_config.run_config

    def seed_graphs(self, run_config: RunConfig) -> List[MultimodalGraph]:
        """Fresh synthetic graphs per seed; ingested graphs stay fixed across seeds."""
        if run_config.graph_source == "synth":
            return [training_view(synth_graph(run_config.synth_config(i))) for i in range(run_config.num_graphs)]
        return load_run_graphs(self.pipeline_config)

    def accuracy_by_task(self, model: GraphPromptModel, prepared: PreparedRun, mode: str,
                         graph_slice: slice = slice(None)) -> Dict[str, float]:
        """Mean accuracy over the selected graphs, per task."""
        _, metrics = evaluate_model(model, prepared.graphs[graph_slice], prepared.embeddings[graph_slice],
                                    prepared.demos[graph_slice], self.run_config.task_list, mode,
                                    self.run_config.eval_split)
        frame = pd.DataFrame(metrics, columns=["task", "graph", "mode", "accuracy"])
        return frame.groupby("task")["accuracy"].mean().to_dict()

    def mode_rows(self, prepared: PreparedRun, run_config: RunConfig, seed: int) -> List[Dict]:
        rows = []
        for mode in ABLATION_MODES:
            model, _, _ = train_instruct_model(prepared.graphs, prepared.embeddings, prepared.demos, run_config, mode)
            for task, acc in self.accuracy_by_task(model, prepared, mode).items():
                rows.append({"comparison": "mode", "variant": mode, "task": task, "seed": seed, "accuracy": acc})
        return rows

    def modality_rows(self, prepared: PreparedRun, seed: int) -> List[Dict]:
        rows = []
        for variant in PROBE_VARIANTS:
            scores = [p[variant] for p in prepared.probes.values() if variant in p]
            if scores:
                rows.append({"comparison": "modality", "variant": variant, "task": "nc", "seed": seed,
                             "accuracy": float(np.mean(scores))})
        return rows

    def transfer_rows(self, prepared: PreparedRun, run_config: RunConfig, seed: int) -> List[Dict]:
        """Projector tuned on all graphs but the last, tuned vs. untuned on the held-out last graph."""
        sources = slice(0, len(prepared.graphs) - 1)
        target = slice(len(prepared.graphs) - 1, None)
        model, _, _ = train_instruct_model(prepared.graphs[sources], prepared.embeddings[sources],
                                           prepared.demos[sources], run_config)
        untuned = tune_projector(run_config.task_list, prepared.graphs[sources], prepared.demos[sources],
                                 prepared.embeddings[sources], model.decoder,
                                 replace(run_config.tune_config(), epochs=0)).projector
        baseline = GraphPromptModel(model.decoder, untuned, run_config.image_tokens, run_config.max_answer_len)
        rows = []
        for variant, candidate in (("tuned", model), ("untuned", baseline)):
            for task, acc in self.accuracy_by_task(candidate, prepared, run_config.mode, target).items():
                rows.append({"comparison": "transfer", "variant": variant, "task": task, "seed": seed,
                             "accuracy": acc})
        return rows

    def initiate_ablation(self) -> AblationArtifact:
        """
        Runs the demonstration-mode, modality and (with at least two graphs) transfer comparisons over
        ``ablate_seeds`` seeds and writes every row plus per-variant means to one table.
        """
        try:
            rows: List[Dict] = []
            for s in range(self.run_config.ablate_seeds):
                run_config = replace(self.run_config, seed=self.run_config.seed + s)
                log.info(f"Ablation seed {run_config.seed} ({s + 1}/{self.run_config.ablate_seeds})")
                prepared = prepare_run(run_config, self.seed_graphs(run_config))
                rows.extend(self.mode_rows(prepared, run_config, run_config.seed))
                rows.extend(self.modality_rows(prepared, run_config.seed))
                if len(prepared.graphs) >= 2:
                    rows.extend(self.transfer_rows(prepared, run_config, run_config.seed))

            frame = pd.DataFrame(rows, columns=list(ABLATION_COLUMNS))
            means = frame.groupby(["comparison", "variant", "task"], sort=False)["accuracy"].mean().reset_index()
            means["seed"] = "mean"
            table = pd.concat([frame, means[list(ABLATION_COLUMNS)]], ignore_index=True)
            write_tsv(self.pipeline_config.ablation_file_path, table.to_dict("records"), ABLATION_COLUMNS)

            summary = {f"{r.comparison}/{r.variant}/{r.task}": float(r.accuracy) for r in means.itertuples()}
            artifact = AblationArtifact(ablation_file_path=self.pipeline_config.ablation_file_path, summary=summary)
            log.info(f"Ablation completed. Artifact: {artifact}")
            return artifact
        except Exception as e:
            raise CustomException(e, sys) from e
