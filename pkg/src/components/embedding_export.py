import sys

from src.aligner.export import export_embeddings, save_embeddings
from src.aligner.probe import probe_all
from src.components.graph_ingestion import load_run_graphs
from src.entity.artifact_entity import EmbeddingExportArtifact
from src.entity.config_entity import TrainingPipelineConfig
from src.entity.estimator import load_aligner
from src.exception import CustomException, ProbeError
from src.logger import log
from src.utils.main_utils import write_tsv

PROBE_COLUMNS = ("graph", "source", "accuracy")


class EmbeddingExport:
    def __init__(self, pipeline_config: TrainingPipelineConfig):
        """
        :param pipeline_config: Run configuration and artifact layout
        """
        self.pipeline_config = pipeline_config

    def initiate_embedding_export(self) -> EmbeddingExportArtifact:
        """
        Encodes every node of every graph with the frozen aligner, saves the embeddings and writes the
        linear-probe table (text-only, image-only, concatenated and fused features).
        """
        try:
            run_config = self.pipeline_config.run_config
            graphs = load_run_graphs(self.pipeline_config)
            params = load_aligner(self.pipeline_config.aligner_checkpoint_file_path, run_config.aligner_config(),
                                  graphs[0].d_t, graphs[0].d_i)

            paths, probe_rows, probe_accuracy = {}, [], {}
            for g in graphs:
                emb = export_embeddings(params, g)
                paths[g.name] = self.pipeline_config.embedding_file_path(g.name)
                save_embeddings(paths[g.name], emb)
                try:
                    scores = probe_all(g, emb.pooled, seed=run_config.seed)
                except ProbeError as e:
                    log.info(f"Linear probe skipped for {g.name!r}: {e}")
                    continue
                probe_accuracy[g.name] = scores
                probe_rows.extend({"graph": g.name, "source": source, "accuracy": acc} for source, acc in scores.items())

            write_tsv(self.pipeline_config.probe_file_path, probe_rows, PROBE_COLUMNS)
            artifact = EmbeddingExportArtifact(embedding_file_paths=paths,
                                               probe_file_path=self.pipeline_config.probe_file_path,
                                               probe_accuracy=probe_accuracy)
            log.info(f"Embedding export completed. Artifact: {artifact}")
            return artifact
        except Exception as e:
            raise CustomException(e, sys) from e
