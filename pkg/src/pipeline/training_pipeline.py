import sys

from src.exception import CustomException
from src.logger import log

from src.components.graph_ingestion import GraphIngestion
from src.components.graph_validation import GraphValidation
from src.components.aligner_trainer import AlignerTrainer
from src.components.embedding_export import EmbeddingExport
from src.components.demo_builder import DemoBuilder
from src.components.projector_tuner import ProjectorTuner
from src.components.model_evaluation import ModelEvaluation
from src.components.gradient_check import GradientCheck
from src.components.ablation import Ablation

from src.entity.config_entity import TrainingPipelineConfig
from src.entity.artifact_entity import (GraphIngestionArtifact,
                                        GraphValidationArtifact,
                                        AlignerTrainerArtifact,
                                        EmbeddingExportArtifact,
                                        DemoBuilderArtifact,
                                        ProjectorTunerArtifact,
                                        ModelEvaluationArtifact,
                                        GradientCheckArtifact,
                                        AblationArtifact)
from src.utils.main_utils import write_yaml_file


class TrainPipeline:
    def __init__(self, pipeline_config: TrainingPipelineConfig):
        self.pipeline_config = pipeline_config
        self.stages = {
            "synth": lambda: self.start_graph_ingestion("synth"),
            "ingest": lambda: self.start_graph_ingestion("ingest"),
            "validate": self.start_graph_validation,
            "pretrain": self.start_aligner_training,
            "embed": self.start_embedding_export,
            "demos": self.start_demo_builder,
            "tune": self.start_projector_tuning,
            "eval": self.start_model_evaluation,
            "gradcheck": self.start_gradient_check,
            "ablate": self.start_ablation,
        }

    def write_resolved_config(self) -> str:
        """Persists the fully resolved run configuration into the run directory."""
        path = self.pipeline_config.resolved_config_file_path
        write_yaml_file(path, self.pipeline_config.run_config.to_dict(), replace=True)
        return path

    def start_graph_ingestion(self, source: str = "") -> GraphIngestionArtifact:
        """
        This method of TrainPipeline class is responsible for producing the run's graph manifests
        """
        try:
            log.info("Entered the start_graph_ingestion method of TrainPipeline class")
            return GraphIngestion(self.pipeline_config).initiate_graph_ingestion(source)
        except Exception as e:
            raise CustomException(e, sys) from e

    def start_graph_validation(self) -> GraphValidationArtifact:
        try:
            log.info("Entered the start_graph_validation method of TrainPipeline class")
            return GraphValidation(self.pipeline_config).initiate_graph_validation()
        except Exception as e:
            raise CustomException(e, sys) from e

    def start_aligner_training(self) -> AlignerTrainerArtifact:
        """
        This method of TrainPipeline class is responsible for contrastive aligner pretraining
        """
        try:
            log.info("Entered the start_aligner_training method of TrainPipeline class")
            return AlignerTrainer(self.pipeline_config).initiate_aligner_training()
        except Exception as e:
            raise CustomException(e, sys) from e

    def start_embedding_export(self) -> EmbeddingExportArtifact:
        try:
            log.info("Entered the start_embedding_export method of TrainPipeline class")
            return EmbeddingExport(self.pipeline_config).initiate_embedding_export()
        except Exception as e:
            raise CustomException(e, sys) from e

    def start_demo_builder(self) -> DemoBuilderArtifact:
        try:
            log.info("Entered the start_demo_builder method of TrainPipeline class")
            return DemoBuilder(self.pipeline_config).initiate_demo_builder()
        except Exception as e:
            raise CustomException(e, sys) from e

    def start_projector_tuning(self) -> ProjectorTunerArtifact:
        """
        This method of TrainPipeline class is responsible for decoder pretraining and projector tuning
        """
        try:
            log.info("Entered the start_projector_tuning method of TrainPipeline class")
            return ProjectorTuner(self.pipeline_config).initiate_projector_tuning()
        except Exception as e:
            raise CustomException(e, sys) from e

    def start_model_evaluation(self) -> ModelEvaluationArtifact:
        try:
            log.info("Entered the start_model_evaluation method of TrainPipeline class")
            return ModelEvaluation(self.pipeline_config).initiate_model_evaluation()
        except Exception as e:
            raise CustomException(e, sys) from e

    def start_gradient_check(self) -> GradientCheckArtifact:
        try:
            log.info("Entered the start_gradient_check method of TrainPipeline class")
            return GradientCheck(self.pipeline_config).initiate_gradient_check()
        except Exception as e:
            raise CustomException(e, sys) from e

    def start_ablation(self) -> AblationArtifact:
        try:
            log.info("Entered the start_ablation method of TrainPipeline class")
            return Ablation(self.pipeline_config).initiate_ablation()
        except Exception as e:
            raise CustomException(e, sys) from e

    def run_stage(self, name: str):
        """Runs one named stage after persisting the resolved config."""
        self.write_resolved_config()
        return self.stages[name]()

    def run_pipeline(self) -> ModelEvaluationArtifact:
        """
        This method of TrainPipeline class is responsible for running the complete pipeline:
        graphs -> validation -> aligner -> embeddings -> demonstrations -> projector -> evaluation
        """
        try:
            self.write_resolved_config()
            self.start_graph_ingestion()
            self.start_graph_validation()
            self.start_aligner_training()
            self.start_embedding_export()
            self.start_demo_builder()
            self.start_projector_tuning()
            model_evaluation_artifact = self.start_model_evaluation()
            log.info(f"Pipeline finished. Metrics at {model_evaluation_artifact.metrics_file_path}")
            return model_evaluation_artifact
        except Exception as e:
            raise CustomException(e, sys) from e
