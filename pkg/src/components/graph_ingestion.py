import os
import sys
from typing import List

from src.entity.artifact_entity import GraphIngestionArtifact
from src.entity.config_entity import TrainingPipelineConfig
from src.entity.graph import MultimodalGraph
from src.exception import ConfigError, CustomException, MissingArtifactError
from src.graph.manifest import load_graph, save_graph
from src.graph.store import training_view
from src.graph.synth import synth_graph
from src.logger import log
from src.utils.main_utils import read_yaml_file, write_yaml_file


def load_run_graphs(pipeline_config: TrainingPipelineConfig, as_training_view: bool = True) -> List[MultimodalGraph]:
    """
    Graphs of a run in ingestion order.

    :param pipeline_config: Run whose graph stage has completed.
    :param as_training_view: Drop validation and test LP positives from the adjacency (every stage after
        ingestion works on this view; only the split lists keep those pairs).
    :return: One loaded graph per manifest listed in the run's graph index.
    """
    index_path = pipeline_config.graph_index_file_path
    if not os.path.exists(index_path):
        raise MissingArtifactError(f"no graphs in this run yet (run synth or ingest first): {index_path}")
    names = read_yaml_file(index_path).get("graphs") or []
    graphs = [load_graph(pipeline_config.graph_manifest_dir(name)) for name in names]
    return [training_view(g) for g in graphs] if as_training_view else graphs


class GraphIngestion:
    def __init__(self, pipeline_config: TrainingPipelineConfig):
        """
        :param pipeline_config: Run configuration and artifact layout
        """
        self.pipeline_config = pipeline_config
        self.run_config = pipeline_config.run_config

    def generate_graphs(self) -> List[MultimodalGraph]:
        """Synthetic planted-partition graphs, one per index, sharing class prototypes when configured."""
        log.info(f"Generating {self.run_config.num_graphs} synthetic graph(s)")
        return [synth_graph(self.run_config.synth_config(i)) for i in range(self.run_config.num_graphs)]

    def read_manifests(self) -> List[MultimodalGraph]:
        paths = self.run_config.ingest_path_list
        if not paths:
            raise ConfigError("graph_source=ingest needs ingest_paths (comma separated manifest directories)")
        graphs = [load_graph(path) for path in paths]
        names = [g.name for g in graphs]
        if len(set(names)) != len(names):
            raise ConfigError(f"ingested graphs must have distinct names, got {names}")
        return graphs

    def initiate_graph_ingestion(self, source: str = "") -> GraphIngestionArtifact:
        """
        Produces the run's graphs and writes each as a manifest under the run directory.

        :param source: "synth" or "ingest"; must agree with the configured graph_source.
        :return: GraphIngestionArtifact with the manifest directories in order.
        """
        try:
            source = source or self.run_config.graph_source
            if source != self.run_config.graph_source:
                raise ConfigError(f"'{source}' needs graph_source={source} in the config "
                                  f"(it is {self.run_config.graph_source!r})")
            graphs = self.generate_graphs() if source == "synth" else self.read_manifests()

            manifest_dirs = []
            for g in graphs:
                manifest_dirs.append(save_graph(g, self.pipeline_config.graph_manifest_dir(g.name)))
                log.info(f"Graph {g.name!r}: {g.num_nodes} nodes, {g.num_edges} edges, "
                         f"LP train pairs {len(g.split_edges('train', 'pos'))}")
            write_yaml_file(self.pipeline_config.graph_index_file_path, {"graphs": [g.name for g in graphs]},
                            replace=True)

            artifact = GraphIngestionArtifact(graph_dir=self.pipeline_config.graph_dir,
                                              graph_names=[g.name for g in graphs], manifest_dirs=manifest_dirs)
            log.info(f"Graph ingestion completed. Artifact: {artifact}")
            return artifact
        except Exception as e:
            raise CustomException(e, sys) from e
