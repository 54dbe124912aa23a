import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Mapping, Optional, Tuple

from src.constants import *
from src.exception import ConfigError


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


@dataclass(frozen=True)
class SynthConfig:
    """Planted-partition multimodal graph generator settings."""
    num_nodes: int = 120
    num_classes: int = 3
    p_in: float = 0.1
    p_out: float = 0.005
    d_t: int = 16
    d_i: int = 16
    n_t: int = 4
    n_v: int = 4
    txt_signal: float = 0.5
    img_signal: float = 0.5
    noise_sigma: float = 1.0
    seed: int = 0
    prototype_seed: Optional[int] = None
    train_frac: float = 0.6
    val_frac: float = 0.2
    lp_edge_count: Optional[int] = None
    label_rule: str = "planted"
    complementary: bool = False
    name: str = "synth"
    category: str = SYNTH_CATEGORY

    def __post_init__(self):
        _require(self.num_nodes >= 1, "num_nodes must be >= 1")
        _require(self.num_classes >= 1, "num_classes must be >= 1")
        _require(0.0 <= self.p_out <= self.p_in <= 1.0, "need 0 <= p_out <= p_in <= 1")
        _require(0.0 <= self.txt_signal <= 1.0 and 0.0 <= self.img_signal <= 1.0, "signals must be in [0, 1]")
        _require(min(self.d_t, self.d_i, self.n_t, self.n_v) >= 1, "dims and lengths must be >= 1")
        _require(self.noise_sigma >= 0.0, "noise_sigma must be >= 0")
        _require(0.0 <= self.train_frac and 0.0 <= self.val_frac and self.train_frac + self.val_frac <= 1.0,
                 "train_frac + val_frac must lie in [0, 1]")
        _require(self.lp_edge_count is None or self.lp_edge_count >= 0, "lp_edge_count must be >= 0")
        _require(self.label_rule in ("planted", "neighbor_majority"), f"unknown label_rule {self.label_rule!r}")


@dataclass(frozen=True)
class AlignerConfig:
    d: int = 32
    n_heads: int = 4
    n_layers: int = 2
    n_q: int = 8
    tau: float = 0.1
    neighbors_per_anchor: int = 5
    batch_size: int = 32
    lr: float = ALIGNER_DEFAULT_LR
    epochs: int = 10
    seed: int = 0
    max_steps: Optional[int] = None

    def __post_init__(self):
        _require(self.d >= 1 and self.n_heads >= 1 and self.d % self.n_heads == 0, "d must be divisible by n_heads")
        _require(self.tau > 0.0, "tau must be > 0")
        _require(self.n_q >= 1, "n_q must be >= 1")
        _require(self.n_layers >= 1, "n_layers must be >= 1")
        _require(self.neighbors_per_anchor >= 1, "neighbors_per_anchor must be >= 1")
        _require(self.batch_size >= 2, "batch_size must be >= 2 (in-batch negatives)")
        _require(self.lr > 0.0 and self.epochs >= 0, "lr must be > 0 and epochs >= 0")


@dataclass(frozen=True)
class PPRConfig:
    alpha: float = PPR_DEFAULT_ALPHA
    tol: float = PPR_DEFAULT_TOL
    max_iter: int = PPR_DEFAULT_MAX_ITER
    normalization: str = "rw"

    def __post_init__(self):
        _require(0.0 < self.alpha <= 1.0, "alpha must be in (0, 1]")
        _require(self.tol > 0.0, "tol must be > 0")
        _require(self.max_iter >= 1, "max_iter must be >= 1")
        _require(self.normalization in ("rw", "sym"), f"unknown normalization {self.normalization!r}")


@dataclass(frozen=True)
class DecoderConfig:
    """The tiny frozen stand-in language model and its own pretraining."""
    d_dec: int = 64
    n_heads: int = 4
    n_layers: int = 2
    ffn_mult: int = 4
    max_positions: int = 1024
    lr: float = 1e-3
    epochs: int = 6
    batch_size: int = 8
    slot_hint_rate: float = 0.5
    slot_width: int = 8
    loss_on: str = "answer"
    seed: int = 0

    def __post_init__(self):
        _require(self.d_dec % self.n_heads == 0, "d_dec must be divisible by n_heads")
        _require(self.n_layers >= 1 and self.ffn_mult >= 1, "n_layers and ffn_mult must be >= 1")
        _require(0.0 <= self.slot_hint_rate <= 1.0, "slot_hint_rate must be in [0, 1]")
        _require(self.loss_on in ("answer", "all"), f"unknown loss_on {self.loss_on!r}")
        _require(self.batch_size >= 1 and self.slot_width >= 1, "batch_size and slot_width must be >= 1")


@dataclass(frozen=True)
class TuneConfig:
    lr: float = TUNE_DEFAULT_LR
    epochs: int = 4
    batch_size: int = 8
    mode: str = "with_demos"
    image_tokens: str = "pooled"
    seed: int = 0

    def __post_init__(self):
        _require(self.lr > 0.0 and self.epochs >= 0 and self.batch_size >= 1, "bad tuning schedule")
        _require(self.mode in ("with_demos", "no_demos", "mllm_baseline", "zero_shot"), f"unknown mode {self.mode!r}")
        _require(self.image_tokens in ("pooled", "sequence"), f"unknown image_tokens {self.image_tokens!r}")


@dataclass(frozen=True)
class RunConfig:
    """
    Flat configuration of a whole run. Every knob of every stage is a field here; config files and
    ``--key value`` overrides may only set these names.
    """
    seed: int = 7
    graph_source: str = "synth"
    ingest_paths: str = ""
    num_graphs: int = 2
    # synthetic graphs
    num_nodes: int = 120
    num_classes: int = 3
    p_in: float = 0.1
    p_out: float = 0.005
    d_t: int = 16
    d_i: int = 16
    n_t: int = 4
    n_v: int = 4
    txt_signal: float = 0.7
    img_signal: float = 0.3
    noise_sigma: float = 1.0
    shared_prototypes: bool = True
    label_rule: str = "neighbor_majority"
    complementary: bool = False
    train_frac: float = 0.6
    val_frac: float = 0.2
    lp_edge_count: int = -1
    # aligner
    d: int = 32
    n_heads: int = 4
    n_layers: int = 2
    n_q: int = 8
    tau: float = 0.1
    neighbors_per_anchor: int = 5
    batch_size: int = 32
    aligner_lr: float = 1e-3
    aligner_epochs: int = 10
    # demonstrations
    alpha: float = PPR_DEFAULT_ALPHA
    ppr_tol: float = PPR_DEFAULT_TOL
    ppr_max_iter: int = PPR_DEFAULT_MAX_ITER
    ppr_normalization: str = "rw"
    k_demos: int = DEMO_DEFAULT_K
    lp_demos: int = DEMO_DEFAULT_LP
    lp_negative_demos: bool = False
    # decoder
    d_dec: int = 64
    dec_heads: int = 4
    dec_layers: int = 2
    dec_lr: float = 1e-3
    dec_epochs: int = 6
    dec_batch_size: int = 8
    slot_hint_rate: float = 0.5
    # projector tuning and evaluation
    tasks: str = "nc,lp"
    mode: str = "with_demos"
    image_tokens: str = "pooled"
    tune_lr: float = 1e-3
    tune_epochs: int = 4
    tune_batch_size: int = 8
    max_answer_len: int = 4
    eval_split: str = "test"
    # gradcheck and ablation
    gradcheck_seeds: int = 20
    gradcheck_tol: float = GRADCHECK_TOLERANCE
    ablate_seeds: int = 5

    def __post_init__(self):
        _require(self.graph_source in ("synth", "ingest"), f"unknown graph_source {self.graph_source!r}")
        _require(self.num_graphs >= 1, "num_graphs must be >= 1")
        _require(self.eval_split in ("val", "test"), "eval_split must be val or test")
        _require(set(self.task_list) <= {"nc", "lp"} and self.task_list, f"bad tasks {self.tasks!r}")
        _require(self.max_answer_len >= 1, "max_answer_len must be >= 1")
        _require(self.gradcheck_seeds >= 1 and self.ablate_seeds >= 1, "seed counts must be >= 1")

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        coerced = {key: _coerce(key, known[key].type, value) for key, value in values.items()}
        return cls(**coerced)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:RUN_HASH_LENGTH]

    @property
    def task_list(self) -> Tuple[str, ...]:
        return tuple(t.strip() for t in self.tasks.split(",") if t.strip())

    @property
    def ingest_path_list(self) -> Tuple[str, ...]:
        return tuple(p.strip() for p in self.ingest_paths.split(",") if p.strip())

    def synth_config(self, index: int) -> SynthConfig:
        return SynthConfig(
            num_nodes=self.num_nodes, num_classes=self.num_classes, p_in=self.p_in, p_out=self.p_out,
            d_t=self.d_t, d_i=self.d_i, n_t=self.n_t, n_v=self.n_v, txt_signal=self.txt_signal,
            img_signal=self.img_signal, noise_sigma=self.noise_sigma, seed=self.seed + index,
            prototype_seed=self.seed if self.shared_prototypes else None, train_frac=self.train_frac,
            val_frac=self.val_frac, lp_edge_count=None if self.lp_edge_count < 0 else self.lp_edge_count,
            label_rule=self.label_rule, complementary=self.complementary,
            name=f"synth_{index}",
        )

    def aligner_config(self) -> AlignerConfig:
        return AlignerConfig(d=self.d, n_heads=self.n_heads, n_layers=self.n_layers, n_q=self.n_q, tau=self.tau,
                             neighbors_per_anchor=self.neighbors_per_anchor, batch_size=self.batch_size,
                             lr=self.aligner_lr, epochs=self.aligner_epochs, seed=self.seed)

    def ppr_config(self) -> PPRConfig:
        return PPRConfig(alpha=self.alpha, tol=self.ppr_tol, max_iter=self.ppr_max_iter,
                         normalization=self.ppr_normalization)

    def decoder_config(self, seed_offset: int = 0) -> DecoderConfig:
        return DecoderConfig(d_dec=self.d_dec, n_heads=self.dec_heads, n_layers=self.dec_layers, lr=self.dec_lr,
                             epochs=self.dec_epochs, batch_size=self.dec_batch_size,
                             slot_hint_rate=self.slot_hint_rate, slot_width=self.n_q, seed=self.seed + seed_offset)

    def tune_config(self, mode: Optional[str] = None, seed_offset: int = 0) -> TuneConfig:
        return TuneConfig(lr=self.tune_lr, epochs=self.tune_epochs, batch_size=self.tune_batch_size,
                          mode=mode or self.mode, image_tokens=self.image_tokens, seed=self.seed + seed_offset)


def _coerce(key: str, annotation, value: Any) -> Any:
    """Coerces YAML scalars and command-line strings to the field type."""
    target = annotation if isinstance(annotation, type) else {"int": int, "float": float, "bool": bool, "str": str}.get(str(annotation))
    try:
        if target is bool:
            if isinstance(value, bool):
                return value
            lowered = str(value).strip().lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(value)
        if target is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if target is float:
            return float(value)
        if target is str:
            if isinstance(value, (list, tuple)):
                return ",".join(str(v) for v in value)
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: cannot interpret {value!r} as {target.__name__}")
    raise ConfigError(f"config key {key!r} has unsupported type {annotation!r}")


@dataclass(frozen=True)
class TrainingPipelineConfig:
    """Artifact layout of one run; the directory name is derived from the config hash."""
    run_config: RunConfig
    artifact_root: str = ARTIFACT_DIR

    @property
    def pipeline_name(self) -> str:
        return PIPELINE_NAME

    @property
    def artifact_dir(self) -> str:
        return os.path.join(self.artifact_root, f"{RUN_DIR_PREFIX}{self.run_config.config_hash()}")

    @property
    def resolved_config_file_path(self) -> str:
        return os.path.join(self.artifact_dir, RESOLVED_CONFIG_FILE_NAME)

    @property
    def graph_dir(self) -> str:
        return os.path.join(self.artifact_dir, GRAPH_DIR_NAME)

    def graph_manifest_dir(self, name: str) -> str:
        return os.path.join(self.graph_dir, name)

    @property
    def graph_index_file_path(self) -> str:
        return os.path.join(self.graph_dir, GRAPH_INDEX_FILE_NAME)

    @property
    def validation_report_file_path(self) -> str:
        return os.path.join(self.graph_dir, GRAPH_VALIDATION_REPORT_FILE_NAME)

    @property
    def aligner_checkpoint_file_path(self) -> str:
        return os.path.join(self.artifact_dir, ALIGNER_DIR_NAME, ALIGNER_CHECKPOINT_FILE_NAME)

    @property
    def aligner_loss_history_file_path(self) -> str:
        return os.path.join(self.artifact_dir, ALIGNER_DIR_NAME, ALIGNER_LOSS_HISTORY_FILE_NAME)

    def embedding_file_path(self, name: str) -> str:
        return os.path.join(self.artifact_dir, EMBEDDING_DIR_NAME, f"{name}.ckpt")

    @property
    def probe_file_path(self) -> str:
        return os.path.join(self.artifact_dir, EMBEDDING_DIR_NAME, PROBE_FILE_NAME)

    def demo_file_path(self, name: str) -> str:
        return os.path.join(self.artifact_dir, DEMO_DIR_NAME, f"{name}.jsonl")

    @property
    def decoder_checkpoint_file_path(self) -> str:
        return os.path.join(self.artifact_dir, INSTRUCT_DIR_NAME, DECODER_CHECKPOINT_FILE_NAME)

    @property
    def decoder_vocab_file_path(self) -> str:
        return os.path.join(self.artifact_dir, INSTRUCT_DIR_NAME, DECODER_VOCAB_FILE_NAME)

    @property
    def decoder_loss_history_file_path(self) -> str:
        return os.path.join(self.artifact_dir, INSTRUCT_DIR_NAME, DECODER_LOSS_HISTORY_FILE_NAME)

    @property
    def projector_checkpoint_file_path(self) -> str:
        return os.path.join(self.artifact_dir, INSTRUCT_DIR_NAME, PROJECTOR_CHECKPOINT_FILE_NAME)

    @property
    def projector_loss_history_file_path(self) -> str:
        return os.path.join(self.artifact_dir, INSTRUCT_DIR_NAME, PROJECTOR_LOSS_HISTORY_FILE_NAME)

    @property
    def predictions_file_path(self) -> str:
        return os.path.join(self.artifact_dir, EVALUATION_DIR_NAME, PREDICTIONS_FILE_NAME)

    @property
    def metrics_file_path(self) -> str:
        return os.path.join(self.artifact_dir, EVALUATION_DIR_NAME, METRICS_FILE_NAME)

    @property
    def gradcheck_file_path(self) -> str:
        return os.path.join(self.artifact_dir, EVALUATION_DIR_NAME, GRADCHECK_FILE_NAME)

    @property
    def ablation_file_path(self) -> str:
        return os.path.join(self.artifact_dir, EVALUATION_DIR_NAME, ABLATION_FILE_NAME)
