from src.cli import resolve_config
from src.entity.config_entity import TrainingPipelineConfig
from src.pipeline.training_pipeline import TrainPipeline

pipeline = TrainPipeline(TrainingPipelineConfig(run_config=resolve_config(None, {})))
pipeline.run_pipeline()
