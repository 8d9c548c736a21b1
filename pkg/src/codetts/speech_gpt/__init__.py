"""Decoder-only autoregressive model over reference + text + speechcodes."""

from .model import (
    GenerationResult,
    ModelConfig,
    PRESETS,
    SamplingConfig,
    SpeechGpt,
    sequence_logprob,
)
from .objective import TrainingConfig, combine_joint_loss, joint_loss, lr_schedule
from .sequence import JointSequence, TextSequence, build_sequence
from .text_tokens import TextTokenizer
from .trainer import overfit_single_batch, train_speech_gpt

__all__ = [
    "GenerationResult",
    "JointSequence",
    "ModelConfig",
    "PRESETS",
    "SamplingConfig",
    "SpeechGpt",
    "TextSequence",
    "TextTokenizer",
    "TrainingConfig",
    "build_sequence",
    "combine_joint_loss",
    "joint_loss",
    "lr_schedule",
    "overfit_single_batch",
    "sequence_logprob",
    "train_speech_gpt",
]
