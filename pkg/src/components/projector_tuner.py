import sys
from typing import Dict, List, Optional, Sequence, Tuple

from src.aligner.export import GraphEmbeddings, load_embeddings
from src.aligner.model import AlignerParams
from src.components.demo_builder import load_run_demos
from src.components.graph_ingestion import load_run_graphs
from src.core.checkpoint import save_checkpoint
from src.entity.artifact_entity import ProjectorTunerArtifact
from src.entity.config_entity import RunConfig, TrainingPipelineConfig
from src.entity.estimator import GraphPromptModel, load_aligner, save_decoder
from src.entity.graph import MultimodalGraph
from src.entity.prompt import PromptSequence
from src.exception import CustomException
from src.graph.store import train_labeled_nodes
from src.instruct.prompts import build_task_prompts
from src.instruct.tuning import (DecoderPretrainResult, DemoIndex, TuneResult, label_hints, pretrain_decoder,
                                 tune_projector)
from src.logger import log
from src.utils.main_utils import write_tsv

STEP_COLUMNS = ("step", "epoch", "stream", "batch_size", "loss")


def decoder_corpus(graphs: Sequence[MultimodalGraph], demos: Sequence[DemoIndex], tasks: Sequence[str],
                   mode: str) -> Tuple[List[PromptSequence], List[Dict[int, str]]]:
    """Answered train prompts of every graph and task, each with the label hints of its graph."""
    prompts, hints = [], []
    for g, index in zip(graphs, demos):
        graph_hints = label_hints(g, train_labeled_nodes(g))
        for task in tasks:
            batch = build_task_prompts(g, task, "train", index.get(task) if index else None, mode)
            prompts.extend(batch)
            hints.extend(graph_hints for _ in batch)
    return prompts, hints


def train_instruct_model(graphs: Sequence[MultimodalGraph], embeddings: Sequence[GraphEmbeddings],
                         demos: Sequence[DemoIndex], run_config: RunConfig, mode: Optional[str] = None,
                         tasks: Optional[Sequence[str]] = None, seed_offset: int = 0,
                         aligner_params: Optional[AlignerParams] = None) -> Tuple[GraphPromptModel, DecoderPretrainResult, TuneResult]:
    """
    Pretrains and freezes a decoder on the train prompts of ``graphs``, then tunes a projector against it.

    :return: The model, the decoder pretraining result and the tuning result.
    """
    mode = mode or run_config.mode
    tasks = list(tasks or run_config.task_list)
    corpus, hints = decoder_corpus(graphs, demos, tasks, mode)
    label_names = sorted({name for g in graphs for name in g.label_names})
    decoder_result = pretrain_decoder(corpus, run_config.decoder_config(seed_offset), label_names, hints,
                                      image_tokens=run_config.image_tokens, n_v=graphs[0].n_v)
    tune_result = tune_projector(tasks, graphs, demos, embeddings, decoder_result.decoder,
                                 run_config.tune_config(mode, seed_offset), aligner_params=aligner_params)
    model = GraphPromptModel(decoder_result.decoder, tune_result.projector, run_config.image_tokens,
                       run_config.max_answer_len)
    return model, decoder_result, tune_result


class ProjectorTuner:
    def __init__(self, pipeline_config: TrainingPipelineConfig):
        """
        :param pipeline_config: Run configuration and artifact layout
        """
        self.pipeline_config = pipeline_config

    def initiate_projector_tuning(self) -> ProjectorTunerArtifact:
        """
        Decoder pretraining followed by projector tuning over every graph and configured task. Writes the
        frozen decoder with its vocabulary, the projector and both loss histories.
        """
        try:
            pc = self.pipeline_config
            run_config = pc.run_config
            graphs = load_run_graphs(pc)
            embeddings = [load_embeddings(pc.embedding_file_path(g.name)) for g in graphs]
            demos = load_run_demos(pc, graphs)
            aligner_params = load_aligner(pc.aligner_checkpoint_file_path, run_config.aligner_config(),
                                          graphs[0].d_t, graphs[0].d_i)

            model, decoder_result, tune_result = train_instruct_model(graphs, embeddings, demos, run_config,
                                                                      aligner_params=aligner_params)
            save_decoder(pc.decoder_checkpoint_file_path, pc.decoder_vocab_file_path, model.decoder)
            write_tsv(pc.decoder_loss_history_file_path, [vars(r) for r in decoder_result.history], STEP_COLUMNS)
            save_checkpoint(pc.projector_checkpoint_file_path, model.projector.state_dict())
            write_tsv(pc.projector_loss_history_file_path, [vars(r) for r in tune_result.history], STEP_COLUMNS)

            artifact = ProjectorTunerArtifact(
                decoder_checkpoint_file_path=pc.decoder_checkpoint_file_path,
                decoder_vocab_file_path=pc.decoder_vocab_file_path,
                projector_checkpoint_file_path=pc.projector_checkpoint_file_path,
                loss_history_file_path=pc.projector_loss_history_file_path,
                regime=tune_result.regime,
                decoder_checksum=tune_result.decoder_checksum,
            )
            log.info(f"Projector tuning completed. Artifact: {artifact}")
            return artifact
        except Exception as e:
            raise CustomException(e, sys) from e
