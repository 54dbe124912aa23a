from src.instruct.assembly import AssembledInput, assemble_decoder_input, assemble_token_input, instruction_loss
from src.instruct.decoder import FrozenDecoder
from src.instruct.inference import PredictionRecord, evaluate_accuracy, evaluate_prompts, predict
from src.instruct.projector import ProjectorParams, project
from src.instruct.prompts import build_lp_prompt, build_nc_prompt, build_task_prompts, render_prompt_text
from src.instruct.tuning import pretrain_decoder, training_regime, tune_projector
from src.instruct.vocab import Vocabulary

__all__ = ["AssembledInput", "FrozenDecoder", "PredictionRecord", "ProjectorParams", "Vocabulary",
           "assemble_decoder_input", "assemble_token_input", "build_lp_prompt", "build_nc_prompt",
           "build_task_prompts", "evaluate_accuracy", "evaluate_prompts", "instruction_loss", "predict",
           "pretrain_decoder", "project", "render_prompt_text", "training_regime", "tune_projector"]
