"""Dual cross-entropy objective and the warmup + cosine learning-rate law."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from ..errors import ConfigurationError, DataError


@dataclass
class TrainingConfig:
    """Optimizer and loss-weighting hyperparameters."""

    max_lr: float = 3.0e-4
    warmup_steps: int = 10000
    floor_lr: float = 1.5e-4
    total_steps: int = 100000
    weight_decay: float = 0.03
    text_weight: float = 0.01
    speech_weight: float = 1.0
    batch_size: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        positives = {
            "max_lr": self.max_lr,
            "warmup_steps": self.warmup_steps,
            "floor_lr": self.floor_lr,
            "total_steps": self.total_steps,
            "weight_decay": self.weight_decay,
            "text_weight": self.text_weight,
            "speech_weight": self.speech_weight,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ConfigurationError(f"{name} must be positive, got {value}")
        if self.text_weight >= self.speech_weight:
            raise ConfigurationError("text loss weight must stay below the speech weight")
        if self.total_steps < self.warmup_steps:
            raise ConfigurationError("total_steps must cover the warmup")


def lr_schedule(step: int, cfg: TrainingConfig) -> float:
    """Linear 0 -> max_lr over warmup, then cosine down to floor_lr.

    Steps past total_steps clamp to the floor.
    """
    if step < 0:
        raise ConfigurationError(f"step must be nonnegative, got {step}")
    if step <= cfg.warmup_steps:
        return cfg.max_lr * step / cfg.warmup_steps
    if step >= cfg.total_steps:
        return cfg.floor_lr
    progress = (step - cfg.warmup_steps) / (cfg.total_steps - cfg.warmup_steps)
    return cfg.floor_lr + (cfg.max_lr - cfg.floor_lr) * 0.5 * (1.0 + math.cos(math.pi * progress))


def combine_joint_loss(
    ce_speech, ce_text, speech_weight: float = 1.0, text_weight: float = 0.01
):
    """speech_weight * CE_speech + text_weight * CE_text."""
    return speech_weight * ce_speech + text_weight * ce_text


def joint_loss(
    text_logits: torch.Tensor,
    speech_logits: torch.Tensor,
    text_targets: torch.Tensor,
    speech_targets: torch.Tensor,
    text_weight: float = 0.01,
    speech_weight: float = 1.0,
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """Weighted sum of per-span mean cross-entropies.

    Logits come flattened: [N, vocab] rows aligned one-to-one with targets.
    An empty span contributes zero, so with no text the loss is exactly the
    speech term.
    """
    if len(text_logits) != len(text_targets):
        raise DataError(
            f"text span mismatch: {len(text_logits)} logit rows, {len(text_targets)} targets"
        )
    if len(speech_logits) != len(speech_targets):
        raise DataError(
            f"speech span mismatch: {len(speech_logits)} logit rows, {len(speech_targets)} targets"
        )
    for targets, logits, name in (
        (text_targets, text_logits, "text"),
        (speech_targets, speech_logits, "speech"),
    ):
        if len(targets) and (targets.min() < 0 or targets.max() >= logits.shape[-1]):
            raise DataError(f"{name} targets outside the head vocabulary")
    zero = torch.zeros((), dtype=text_logits.dtype if len(text_logits) else torch.float32)
    ce_text = F.cross_entropy(text_logits, text_targets) if len(text_targets) else zero
    ce_speech = F.cross_entropy(speech_logits, speech_targets) if len(speech_targets) else zero
    total = combine_joint_loss(ce_speech, ce_text, speech_weight, text_weight)
    return total, {"ce_text": ce_text, "ce_speech": ce_speech}
