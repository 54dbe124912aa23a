import sys
from typing import Dict, List, Sequence

from src.demos.select import build_demo_sets, index_demonstrations, load_demonstrations, save_demonstrations
from src.entity.artifact_entity import DemoBuilderArtifact
from src.entity.config_entity import RunConfig, TrainingPipelineConfig
from src.entity.demonstration import DemonstrationSet, Task
from src.entity.graph import MultimodalGraph
from src.exception import CustomException
from src.components.graph_ingestion import load_run_graphs
from src.graph.store import held_out_pairs
from src.instruct.prompts import task_anchors
from src.instruct.tuning import DemoIndex
from src.logger import log


def build_graph_demos(g: MultimodalGraph, run_config: RunConfig, tasks: Sequence[str],
                      splits: Sequence[str]) -> List[DemonstrationSet]:
    """
    Demonstration sets for every anchor of the given splits and tasks: PPR-ranked labeled train nodes for
    node classification, shared-neighborhood edges for link prediction.
    """
    sets: List[DemonstrationSet] = []
    exclude = held_out_pairs(g)
    for task in (Task(t) for t in tasks):
        anchors = list(dict.fromkeys(anchor for split in splits for anchor, _ in task_anchors(g, task, split)))
        sets.extend(build_demo_sets(g, task, anchors, run_config.ppr_config(), k=run_config.k_demos,
                                    lp_demos=run_config.lp_demos, negatives=run_config.lp_negative_demos,
                                    exclude=exclude, seed=run_config.seed))
        log.info(f"{g.name!r}: {len(anchors)} {task.value} demonstration sets")
    return sets


def index_by_task(sets: Sequence[DemonstrationSet]) -> DemoIndex:
    return {task: index_demonstrations(s for s in sets if s.task is task) for task in Task}


def load_run_demos(pipeline_config: TrainingPipelineConfig, graphs: Sequence[MultimodalGraph]) -> List[DemoIndex]:
    """Per-graph demonstration indexes written by the demos stage."""
    return [index_by_task(load_demonstrations(pipeline_config.demo_file_path(g.name))) for g in graphs]


class DemoBuilder:
    def __init__(self, pipeline_config: TrainingPipelineConfig):
        """
        :param pipeline_config: Run configuration and artifact layout
        """
        self.pipeline_config = pipeline_config

    def initiate_demo_builder(self) -> DemoBuilderArtifact:
        """
        Selects demonstrations for the train anchors (projector tuning) and the evaluation anchors of every
        graph and writes one JSON-lines file per graph.
        """
        try:
            run_config = self.pipeline_config.run_config
            splits = list(dict.fromkeys(["train", run_config.eval_split]))
            paths: Dict[str, str] = {}
            count = 0
            for g in load_run_graphs(self.pipeline_config):
                sets = build_graph_demos(g, run_config, run_config.task_list, splits)
                paths[g.name] = self.pipeline_config.demo_file_path(g.name)
                count += save_demonstrations(paths[g.name], sets)

            artifact = DemoBuilderArtifact(demo_file_paths=paths, demo_set_count=count)
            log.info(f"Demonstration selection completed. Artifact: {artifact}")
            return artifact
        except Exception as e:
            raise CustomException(e, sys) from e
