from src.aligner.export import GraphEmbeddings, export_embeddings, load_embeddings, save_embeddings
from src.aligner.loss import contrastive_loss, info_nce
from src.aligner.model import (AlignerParams, NodeEmbedding, cross_fuse_layer, encode_node, encode_nodes,
                               share_attn_layer)
from src.aligner.probe import linear_probe, probe_feature_sources
from src.aligner.train import PretrainResult, pretrain

__all__ = ["AlignerParams", "GraphEmbeddings", "NodeEmbedding", "PretrainResult", "contrastive_loss",
           "cross_fuse_layer", "encode_node", "encode_nodes", "export_embeddings", "info_nce", "linear_probe",
           "load_embeddings", "pretrain", "probe_feature_sources", "save_embeddings", "share_attn_layer"]
