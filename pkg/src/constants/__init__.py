import os

from dotenv import load_dotenv

load_dotenv()

PIPELINE_NAME: str = "graphprompt"
ARTIFACT_DIR: str = os.getenv("GRAPHPROMPT_ARTIFACT_DIR", "artifact")
RUN_DIR_PREFIX: str = "run_"
RUN_HASH_LENGTH: int = 12
RESOLVED_CONFIG_FILE_NAME: str = "config.yaml"
DEFAULT_CONFIG_FILE_PATH: str = os.path.join("config", "default.yaml")

SUBCOMMANDS = ("synth", "ingest", "validate", "pretrain", "embed", "demos", "tune", "eval", "gradcheck", "ablate")

"""
Graph store related constants start with GRAPH var name
"""
GRAPH_DIR_NAME: str = "graphs"
GRAPH_META_FILE_NAME: str = "graph.meta"
GRAPH_NODES_FILE_NAME: str = "nodes.jsonl"
GRAPH_EDGES_FILE_NAME: str = "edges.tsv"
GRAPH_EDGE_SPLITS_FILE_NAME: str = "edge_splits.tsv"
GRAPH_TXT_FILE_NAME: str = "txt.f32"
GRAPH_IMG_FILE_NAME: str = "img.f32"
GRAPH_VALIDATION_REPORT_FILE_NAME: str = "report.yaml"
GRAPH_INDEX_FILE_NAME: str = "graphs.yaml"
SPLIT_NAMES = ("train", "val", "test")
TRAIN, VAL, TEST = 0, 1, 2
UNLABELED: int = -1

SYNTH_CATEGORY: str = "Synthetic"
SYNTH_LABEL_WORDS = (
    "Books", "Movies", "Toys", "Games", "Music", "Arts", "Garden", "Kitchen",
    "Sports", "Beauty", "Tools", "Office", "Jewelry", "Shoes", "Baby", "Pets",
    "Camera", "Software", "Grocery", "Luggage",
)
SYNTH_TEXT_WORDS = ("sturdy", "compact", "classic", "deluxe", "portable", "vintage", "modern", "premium")
SYNTH_TEXT_LENGTH: int = 3

"""
Tensor core related constants
"""
ADAM_BETA1: float = 0.9
ADAM_BETA2: float = 0.999
ADAM_EPS: float = 1e-8
MASK_VALUE: float = -1e9
CHECKPOINT_MAGIC: bytes = b"GPROMPTCKPT1\n"
GRADCHECK_STEP: float = 1e-5
GRADCHECK_TOLERANCE: float = 1e-4

"""
Aligner related constants start with ALIGNER var name
"""
ALIGNER_DIR_NAME: str = "aligner"
ALIGNER_CHECKPOINT_FILE_NAME: str = "aligner.ckpt"
ALIGNER_LOSS_HISTORY_FILE_NAME: str = "loss_history.tsv"
ALIGNER_DEFAULT_LR: float = 1e-5
EMBEDDING_DIR_NAME: str = "embeddings"
PROBE_FILE_NAME: str = "probe.tsv"

"""
Demonstration selection related constants start with DEMO var name
"""
DEMO_DIR_NAME: str = "demos"
DEMO_DEFAULT_K: int = 3
DEMO_DEFAULT_LP: int = 1
PPR_DEFAULT_ALPHA: float = 0.15
PPR_DEFAULT_TOL: float = 1e-10
PPR_DEFAULT_MAX_ITER: int = 1000
PPR_DENSE_MAX_NODES: int = 2000
PPR_RANK_DECIMALS: int = 12

"""
Instruction tuning related constants start with INSTRUCT var name
"""
INSTRUCT_DIR_NAME: str = "instruct"
DECODER_CHECKPOINT_FILE_NAME: str = "decoder.ckpt"
DECODER_VOCAB_FILE_NAME: str = "vocab.json"
DECODER_LOSS_HISTORY_FILE_NAME: str = "decoder_loss.tsv"
PROJECTOR_CHECKPOINT_FILE_NAME: str = "projector.ckpt"
PROJECTOR_LOSS_HISTORY_FILE_NAME: str = "projector_loss.tsv"
TUNE_DEFAULT_LR: float = 2e-5
IMAGE_TOKEN: str = "<image>"
GRAPH_TOKEN: str = "<graph>"
UNK_TOKEN: str = "<unk>"
EOS_TOKEN: str = "<eos>"
YES: str = "Yes"
NO: str = "No"

"""
Evaluation related constants
"""
EVALUATION_DIR_NAME: str = "evaluation"
PREDICTIONS_FILE_NAME: str = "predictions.jsonl"
METRICS_FILE_NAME: str = "metrics.tsv"
GRADCHECK_FILE_NAME: str = "gradcheck.tsv"
ABLATION_FILE_NAME: str = "ablation.tsv"
