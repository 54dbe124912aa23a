import os
import sys
from typing import Dict, List, Optional

import numpy as np

from src.constants import SPLIT_NAMES
from src.entity.artifact_entity import GraphValidationArtifact
from src.entity.config_entity import TrainingPipelineConfig
from src.entity.graph import EDGE_KINDS
from src.exception import CustomException, GraphFormatError, MissingArtifactError
from src.graph.manifest import load_graph
from src.logger import log
from src.utils.main_utils import read_yaml_file, write_yaml_file


class GraphValidation:
    def __init__(self, pipeline_config: TrainingPipelineConfig):
        """
        :param pipeline_config: Run configuration and artifact layout
        """
        self.pipeline_config = pipeline_config

    def manifest_dirs(self) -> List[str]:
        """The run's graph manifests, or the configured ingest paths before any ingestion."""
        index_path = self.pipeline_config.graph_index_file_path
        if os.path.exists(index_path):
            names = read_yaml_file(index_path).get("graphs") or []
            return [self.pipeline_config.graph_manifest_dir(name) for name in names]
        paths = list(self.pipeline_config.run_config.ingest_path_list)
        if not paths:
            raise MissingArtifactError(f"nothing to validate: no graph index at {index_path} and no ingest_paths")
        return paths

    def check_manifest(self, path: str) -> Dict:
        """
        Loads one manifest, recording either its summary or the invariant it violates.

        :param path: Manifest directory.
        :return: Report entry for this manifest.
        """
        try:
            g = load_graph(path)
        except GraphFormatError as e:
            log.info(f"Manifest {path} is invalid: {e}")
            return {"path": path, "valid": False, "error": type(e).__name__, "message": str(e), "exit_code": e.exit_code}
        node_splits = {name: int(np.sum(g.splits == i)) for i, name in enumerate(SPLIT_NAMES)}
        edge_splits = {f"{s}/{k}": int(len(g.split_edges(s, k))) for s in SPLIT_NAMES for k in EDGE_KINDS}
        return {
            "path": path, "valid": True, "name": g.name, "num_nodes": g.num_nodes, "num_edges": g.num_edges,
            "classes": list(g.label_names), "node_splits": node_splits, "edge_splits": edge_splits,
            "isolated_nodes": int(np.sum(np.diff(g.offsets) == 0)),
        }

    def initiate_graph_validation(self) -> GraphValidationArtifact:
        """
        Validates every manifest and writes the YAML report. An invalid manifest fails the stage after the
        report is written.
        """
        try:
            entries = [self.check_manifest(path) for path in self.manifest_dirs()]
            report_path = self.pipeline_config.validation_report_file_path
            write_yaml_file(report_path, {"graphs": entries}, replace=True)

            invalid: Optional[Dict] = next((e for e in entries if not e["valid"]), None)
            message = "" if invalid is None else f"{invalid['path']}: {invalid['message']}"
            artifact = GraphValidationArtifact(validation_status=invalid is None, message=message,
                                               validation_report_file_path=report_path)
            log.info(f"Graph validation result: {artifact}")
            if invalid is not None:
                # re-raise with the violated invariant's own error class
                load_graph(invalid["path"])
            return artifact
        except Exception as e:
            raise CustomException(e, sys) from e
