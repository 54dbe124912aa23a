import sys

from src.aligner.train import pretrain
from src.core.checkpoint import save_checkpoint
from src.entity.artifact_entity import AlignerTrainerArtifact
from src.entity.config_entity import TrainingPipelineConfig
from src.exception import CustomException
from src.components.graph_ingestion import load_run_graphs
from src.logger import log
from src.utils.main_utils import write_tsv

LOSS_HISTORY_COLUMNS = ("step", "epoch", "graph", "batch_members", "loss")


class AlignerTrainer:
    def __init__(self, pipeline_config: TrainingPipelineConfig):
        """
        :param pipeline_config: Run configuration and artifact layout
        """
        self.pipeline_config = pipeline_config

    def initiate_aligner_training(self) -> AlignerTrainerArtifact:
        """
        Contrastive pretraining of one aligner over all graphs of the run.

        :return: AlignerTrainerArtifact with the checkpoint and loss-history paths.
        """
        try:
            graphs = load_run_graphs(self.pipeline_config)
            cfg = self.pipeline_config.run_config.aligner_config()
            log.info(f"Pretraining the aligner on {[g.name for g in graphs]} with {cfg}")
            result = pretrain(graphs, cfg)

            save_checkpoint(self.pipeline_config.aligner_checkpoint_file_path, result.params.state_dict())
            write_tsv(self.pipeline_config.aligner_loss_history_file_path,
                      [vars(r) for r in result.history], LOSS_HISTORY_COLUMNS)

            artifact = AlignerTrainerArtifact(
                aligner_checkpoint_file_path=self.pipeline_config.aligner_checkpoint_file_path,
                loss_history_file_path=self.pipeline_config.aligner_loss_history_file_path,
                steps=len(result.history),
                final_loss=result.losses[-1] if result.history else float("nan"),
            )
            log.info(f"Aligner training completed. Artifact: {artifact}")
            return artifact
        except Exception as e:
            raise CustomException(e, sys) from e
