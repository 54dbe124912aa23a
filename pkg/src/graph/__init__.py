from src.graph.manifest import load_graph, save_graph
from src.graph.store import (build_graph, khop_neighborhood, neighbors, sample_neighbors, train_labeled_nodes,
                             validate)
from src.graph.synth import synth_graph

__all__ = ["build_graph", "khop_neighborhood", "load_graph", "neighbors", "sample_neighbors", "save_graph",
           "synth_graph", "train_labeled_nodes", "validate"]
