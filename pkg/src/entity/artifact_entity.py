from dataclasses import dataclass, field
from typing import Dict, List


@dataclass
class GraphIngestionArtifact:
    graph_dir: str
    graph_names: List[str]
    manifest_dirs: List[str]

@dataclass
class GraphValidationArtifact:
    validation_status: bool
    message: str
    validation_report_file_path: str

@dataclass
class AlignerTrainerArtifact:
    aligner_checkpoint_file_path: str
    loss_history_file_path: str
    steps: int
    final_loss: float

@dataclass
class EmbeddingExportArtifact:
    embedding_file_paths: Dict[str, str]
    probe_file_path: str
    probe_accuracy: Dict[str, Dict[str, float]] = field(default_factory=dict)

@dataclass
class DemoBuilderArtifact:
    demo_file_paths: Dict[str, str]
    demo_set_count: int

@dataclass
class ProjectorTunerArtifact:
    decoder_checkpoint_file_path: str
    decoder_vocab_file_path: str
    projector_checkpoint_file_path: str
    loss_history_file_path: str
    regime: str
    decoder_checksum: str

@dataclass
class ModelEvaluationArtifact:
    predictions_file_path: str
    metrics_file_path: str
    accuracy: Dict[str, float]

@dataclass
class GradientCheckArtifact:
    gradcheck_file_path: str
    passed: bool
    worst_error: float

@dataclass
class AblationArtifact:
    ablation_file_path: str
    summary: Dict[str, float]
