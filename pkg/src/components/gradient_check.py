import sys
from typing import Callable, Dict, Tuple

import numpy as np

from src.aligner.export import GraphEmbeddings
from src.aligner.loss import contrastive_loss, info_nce
from src.aligner.model import AlignerParams, cross_fuse_layer, encode_nodes, pool, share_attn_layer
from src.constants import TRAIN
from src.core import ops
from src.core.gradcheck import finite_diff_check
from src.core.nn import AttentionParams, attention
from src.core.tensor import Tensor
from src.entity.artifact_entity import GradientCheckArtifact
from src.entity.config_entity import AlignerConfig, DecoderConfig, TrainingPipelineConfig
from src.entity.demonstration import Task
from src.entity.prompt import PromptSegment, PromptSequence, SegmentKind
from src.exception import CustomException, NumericError
from src.graph.store import build_graph
from src.instruct.assembly import assemble_decoder_input, instruction_loss
from src.instruct.decoder import FrozenDecoder
from src.instruct.projector import ProjectorParams, project
from src.instruct.vocab import Vocabulary
from src.logger import log
from src.utils.main_utils import write_tsv

GRADCHECK_COLUMNS = ("op", "seed", "max_rel_error", "passed")

Case = Tuple[Callable[[Tensor], Tensor], Tensor]


def _leaf(rng: np.random.Generator, *shape) -> Tensor:
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def _weighted(rng: np.random.Generator, shape) -> Callable[[Tensor], Tensor]:
    """Scalar readout sum(y * C) with a fixed random C, so every output component is checked."""
    weights = Tensor(rng.standard_normal(shape))
    return lambda y: ops.sum_all(ops.mul(y, weights))


def _small_aligner(rng: np.random.Generator) -> AlignerParams:
    return AlignerParams.init(AlignerConfig(d=4, n_heads=2, n_layers=1, n_q=2, batch_size=2), 3, 3, rng)


def _matmul(rng) -> Case:
    b = Tensor(rng.standard_normal((4, 2)))
    readout = _weighted(rng, (3, 2))
    return (lambda x: readout(ops.matmul(x, b))), _leaf(rng, 3, 4)


def _softmax(rng) -> Case:
    readout = _weighted(rng, (3, 5))
    return (lambda x: readout(ops.softmax(x))), _leaf(rng, 3, 5)


def _layer_norm(rng) -> Case:
    gain, bias = Tensor(rng.standard_normal(6)), Tensor(rng.standard_normal(6))
    readout = _weighted(rng, (2, 6))
    return (lambda x: readout(ops.layer_norm(x, gain, bias))), _leaf(rng, 2, 6)


def _gelu(rng) -> Case:
    readout = _weighted(rng, (3, 4))
    return (lambda x: readout(ops.gelu(x))), _leaf(rng, 3, 4)


def _cross_entropy(rng) -> Case:
    targets = rng.integers(0, 5, size=4).tolist()
    return (lambda x: ops.cross_entropy_logits(x, targets)), _leaf(rng, 4, 5)


def _attention(rng) -> Case:
    params = AttentionParams.init(rng, 4)
    kv = Tensor(rng.standard_normal((5, 4)))
    readout = _weighted(rng, (3, 4))
    return (lambda x: readout(attention(x, kv, kv, params, heads=2))), _leaf(rng, 3, 4)


def _share_attn(rng) -> Case:
    params = _small_aligner(rng)
    readout = _weighted(rng, (3, 4))
    return (lambda x: readout(share_attn_layer(params.layers[0], x, params.n_heads))), _leaf(rng, 3, 4)


def _cross_fuse(rng) -> Case:
    params = _small_aligner(rng)
    img, txt = Tensor(rng.standard_normal((2, 4))), Tensor(rng.standard_normal((3, 4)))
    readout = _weighted(rng, (2, 4))
    return (lambda x: readout(cross_fuse_layer(params.layers[0], x, img, txt, params.n_heads))), _leaf(rng, 2, 4)


def _pooling(rng) -> Case:
    params = _small_aligner(rng)
    readout = _weighted(rng, (4,))
    return (lambda x: readout(pool(params, x))), _leaf(rng, 2, 4)


def _contrastive(rng) -> Case:
    positives = [Tensor(rng.standard_normal((2, 4))), Tensor(rng.standard_normal((1, 4))),
                 Tensor(rng.standard_normal((1, 4)))]
    return (lambda x: contrastive_loss(x, positives, tau=0.5)), _leaf(rng, 3, 4)


def _projector(rng) -> Case:
    pp = ProjectorParams.init(4, 6, rng)
    rows = Tensor(rng.standard_normal((3, 4)))
    readout = _weighted(rng, (3, 6))
    return (lambda x: readout(project(pp, rows))), pp.fc1.weight


def _instruction_loss(rng) -> Case:
    """Loss of a frozen two-head decoder w.r.t. the projector's output weights."""
    vocab = Vocabulary.build(["which class is it"], ["Books", "Toys"])
    decoder = FrozenDecoder.init(DecoderConfig(d_dec=8, n_heads=2, n_layers=1, ffn_mult=2,
                                               seed=int(rng.integers(1 << 30))), vocab)
    decoder.freeze()
    pp = ProjectorParams.init(4, 8, rng)
    emb = GraphEmbeddings(pooled=rng.standard_normal((2, 4)), fused=rng.standard_normal((2, 2, 4)),
                          image=rng.standard_normal((2, 4)), image_seq=rng.standard_normal((2, 3, 4)))
    prompt = PromptSequence(task=Task.NC, anchor=0, answer="Books", segments=(
        PromptSegment(SegmentKind.TEXT, "which class "), PromptSegment(SegmentKind.IMAGE_SLOT, 0),
        PromptSegment(SegmentKind.GRAPH_SLOT, 1), PromptSegment(SegmentKind.TEXT, " is it"),
    ))
    return (lambda x: instruction_loss(decoder, [assemble_decoder_input(prompt, pp, emb, decoder)])), pp.fc2.weight


GRADIENT_CASES: Dict[str, Callable[[np.random.Generator], Case]] = {
    "matmul": _matmul,
    "softmax": _softmax,
    "layer_norm": _layer_norm,
    "gelu": _gelu,
    "cross_entropy": _cross_entropy,
    "attention": _attention,
    "share_attn_layer": _share_attn,
    "cross_fuse_layer": _cross_fuse,
    "pooling_head": _pooling,
    "contrastive_loss": _contrastive,
    "projector": _projector,
    "instruction_loss": _instruction_loss,
}


def aligner_parameter_errors(seed: int) -> Dict[str, float]:
    """
    Checks every aligner parameter, the learnable query bank included, through the neighbor-contrastive loss
    of all six nodes of a two-triangle graph.
    """
    rng = np.random.default_rng(seed)
    params = _small_aligner(rng)
    g = build_graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)],
                    rng.standard_normal((6, 2, 3)), rng.standard_normal((6, 2, 3)),
                    [0, 0, 0, 1, 1, 1], ["A", "B"], [TRAIN] * 6, name="six")
    anchors, positives = [0, 2, 4], [[1, 2], [3], [3, 5]]

    def loss(_: Tensor) -> Tensor:
        return info_nce(encode_nodes(params, g, range(6)).pooled, anchors, positives, tau=0.5)

    return {name: finite_diff_check(loss, p) for name, p in params.named_parameters()}


PARAMETER_SWEEPS: Dict[str, Callable[[int], Dict[str, float]]] = {
    "aligner_info_nce": aligner_parameter_errors,
}

CHECKED_NAMES = tuple(GRADIENT_CASES) + tuple(PARAMETER_SWEEPS)


def check_case(name: str, seed: int) -> float:
    if name in PARAMETER_SWEEPS:
        return max(PARAMETER_SWEEPS[name](seed).values())
    f, x = GRADIENT_CASES[name](np.random.default_rng(seed))
    return finite_diff_check(f, x)


class GradientCheck:
    def __init__(self, pipeline_config: TrainingPipelineConfig):
        """
        :param pipeline_config: Run configuration and artifact layout
        """
        self.pipeline_config = pipeline_config

    def initiate_gradient_check(self) -> GradientCheckArtifact:
        """
        Central-difference check of every registered op over ``gradcheck_seeds`` seeds. The table is always
        written; any error above ``gradcheck_tol`` then fails the stage with NumericError.
        """
        try:
            run_config = self.pipeline_config.run_config
            rows = []
            for name in CHECKED_NAMES:
                errors = [check_case(name, run_config.seed * 1000 + s) for s in range(run_config.gradcheck_seeds)]
                rows.extend({"op": name, "seed": s, "max_rel_error": err, "passed": err <= run_config.gradcheck_tol}
                            for s, err in enumerate(errors))
                log.info(f"gradcheck {name}: worst relative error {max(errors):.3e}")

            path = self.pipeline_config.gradcheck_file_path
            write_tsv(path, rows, GRADCHECK_COLUMNS)
            worst = max(r["max_rel_error"] for r in rows)
            artifact = GradientCheckArtifact(gradcheck_file_path=path, passed=all(r["passed"] for r in rows),
                                             worst_error=worst)
            log.info(f"Gradient check completed. Artifact: {artifact}")
            if not artifact.passed:
                failing = sorted({r["op"] for r in rows if not r["passed"]})
                raise NumericError(f"gradient check failed for {failing} (tolerance {run_config.gradcheck_tol})")
            return artifact
        except Exception as e:
            raise CustomException(e, sys) from e
