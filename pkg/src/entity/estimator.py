import sys
from typing import List, Sequence, Tuple

import numpy as np

from src.aligner.export import GraphEmbeddings
from src.aligner.model import AlignerParams
from src.core.checkpoint import load_checkpoint, save_checkpoint
from src.entity.config_entity import AlignerConfig, DecoderConfig
from src.entity.prompt import PromptSequence
from src.exception import CustomException
from src.instruct.decoder import FrozenDecoder
from src.instruct.inference import PredictionRecord, evaluate_prompts, predict
from src.instruct.projector import ProjectorParams
from src.instruct.vocab import Vocabulary
from src.logger import log


class GraphPromptModel:
    """
    Frozen decoder plus tuned projector, the pair that answers prompts once aligner embeddings exist.
    """
    def __init__(self, decoder: FrozenDecoder, projector: ProjectorParams, image_tokens: str = "pooled",
                 max_answer_len: int = 4):
        """
        :param decoder: Pretrained and frozen decoder.
        :param projector: Projector mapping aligner rows into the decoder embedding width.
        :param image_tokens: "pooled" or "sequence" image slot filling.
        :param max_answer_len: Greedy decoding limit in words.
        """
        self.decoder = decoder
        self.projector = projector
        self.image_tokens = image_tokens
        self.max_answer_len = max_answer_len

    def predict(self, prompt: PromptSequence, embeddings: GraphEmbeddings) -> str:
        """
        Greedy answer for one prompt.

        :param prompt: Prompt whose slots reference nodes covered by ``embeddings``.
        :param embeddings: Aligner outputs of the prompt's graph.
        :return: The whitespace-normalized answer string.
        """
        return predict(self.decoder, self.projector, prompt, embeddings, self.max_answer_len, self.image_tokens)

    def evaluate(self, prompts: Sequence[PromptSequence], embeddings: GraphEmbeddings,
                 graph_name: str) -> Tuple[List[PredictionRecord], float]:
        """
        Predicts and scores answered prompts.

        :return: Per-prompt records and the exact-match accuracy.
        """
        try:
            return evaluate_prompts(self.decoder, self.projector, prompts, embeddings, graph_name,
                                    self.max_answer_len, self.image_tokens)
        except Exception as e:
            log.error(f"Error occurred while evaluating {graph_name!r}: {e}", exc_info=True)
            raise CustomException(e, sys) from e

    def __repr__(self) -> str:
        return (f"GraphPromptModel(vocab={len(self.decoder.vocab)}, d_dec={self.decoder.d_dec}, "
                f"projector={self.projector.d_in}->{self.projector.d_out})")


def load_aligner(file_path: str, cfg: AlignerConfig, d_t: int, d_i: int) -> AlignerParams:
    """Aligner parameters from a checkpoint, frozen."""
    params = AlignerParams.init(cfg, d_t, d_i)
    params.load_state_dict(load_checkpoint(file_path))
    params.freeze()
    return params


def save_decoder(checkpoint_path: str, vocab_path: str, decoder: FrozenDecoder) -> None:
    save_checkpoint(checkpoint_path, decoder.state_dict())
    decoder.vocab.save(vocab_path)


def load_decoder(checkpoint_path: str, vocab_path: str, cfg: DecoderConfig) -> FrozenDecoder:
    """The decoder checkpoint and its vocabulary, frozen."""
    decoder = FrozenDecoder.init(cfg, Vocabulary.load(vocab_path))
    decoder.load_state_dict(load_checkpoint(checkpoint_path))
    decoder.freeze()
    return decoder


def load_projector(file_path: str, d: int, d_dec: int) -> ProjectorParams:
    projector = ProjectorParams.init(d, d_dec, np.random.default_rng(0))
    projector.load_state_dict(load_checkpoint(file_path))
    return projector
