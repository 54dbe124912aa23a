import sys
from typing import Dict, List, Sequence, Tuple

from src.aligner.export import GraphEmbeddings, load_embeddings
from src.components.demo_builder import load_run_demos
from src.components.graph_ingestion import load_run_graphs
from src.entity.artifact_entity import ModelEvaluationArtifact
from src.entity.config_entity import TrainingPipelineConfig
from src.entity.estimator import GraphPromptModel, load_decoder, load_projector
from src.entity.graph import MultimodalGraph
from src.exception import CustomException
from src.instruct.inference import PredictionRecord
from src.instruct.prompts import build_task_prompts
from src.instruct.tuning import DemoIndex
from src.logger import log
from src.utils.main_utils import require_file, write_jsonl, write_tsv

METRIC_COLUMNS = ("task", "graph", "mode", "accuracy")


def evaluate_model(model: GraphPromptModel, graphs: Sequence[MultimodalGraph], embeddings: Sequence[GraphEmbeddings],
                   demos: Sequence[DemoIndex], tasks: Sequence[str], mode: str,
                   split: str = "test") -> Tuple[List[PredictionRecord], List[Dict]]:
    """
    Predicts every anchor of ``split`` per graph and task.

    :return: Prediction records in evaluation order and one metrics row per (task, graph).
    """
    records: List[PredictionRecord] = []
    metrics: List[Dict] = []
    for task in tasks:
        for g, emb, index in zip(graphs, embeddings, demos):
            prompts = build_task_prompts(g, task, split, index.get(task) if index else None, mode)
            if not prompts:
                log.info(f"No {task} {split} anchors in {g.name!r}; skipped")
                continue
            graph_records, accuracy = model.evaluate(prompts, emb, g.name)
            records.extend(graph_records)
            metrics.append({"task": task, "graph": g.name, "mode": mode, "accuracy": accuracy})
            log.info(f"{task} accuracy on {g.name!r} ({mode}, {len(prompts)} prompts): {accuracy:.4f}")
    return records, metrics


class ModelEvaluation:
    """
    Scores the tuned projector and frozen decoder on the evaluation split of every graph.
    """

    def __init__(self, pipeline_config: TrainingPipelineConfig):
        """
        :param pipeline_config: Run configuration and artifact layout
        """
        self.pipeline_config = pipeline_config

    def load_model(self, d: int) -> GraphPromptModel:
        pc = self.pipeline_config
        run_config = pc.run_config
        require_file(pc.projector_checkpoint_file_path, "tuned projector (run tune first)")
        decoder = load_decoder(pc.decoder_checkpoint_file_path, pc.decoder_vocab_file_path, run_config.decoder_config())
        projector = load_projector(pc.projector_checkpoint_file_path, d, decoder.d_dec)
        return GraphPromptModel(decoder, projector, run_config.image_tokens, run_config.max_answer_len)

    def initiate_model_evaluation(self) -> ModelEvaluationArtifact:
        """
        Writes predictions (one JSON line per prompt) and the metrics table (task, graph, mode, accuracy).
        """
        try:
            pc = self.pipeline_config
            run_config = pc.run_config
            graphs = load_run_graphs(pc)
            embeddings = [load_embeddings(pc.embedding_file_path(g.name)) for g in graphs]
            model = self.load_model(embeddings[0].d)
            demos = load_run_demos(pc, graphs)
            log.info(f"Evaluating {model} on split {run_config.eval_split!r}")

            records, metrics = evaluate_model(model, graphs, embeddings, demos, run_config.task_list,
                                              run_config.mode, run_config.eval_split)
            write_jsonl(pc.predictions_file_path, (r.to_record() for r in records))
            write_tsv(pc.metrics_file_path, metrics, METRIC_COLUMNS)

            artifact = ModelEvaluationArtifact(
                predictions_file_path=pc.predictions_file_path, metrics_file_path=pc.metrics_file_path,
                accuracy={f"{m['task']}/{m['graph']}": m["accuracy"] for m in metrics},
            )
            log.info(f"Model evaluation completed. Artifact: {artifact}")
            return artifact
        except Exception as e:
            log.error(f"Error in model evaluation: {e}")
            raise CustomException(e, sys) from e
