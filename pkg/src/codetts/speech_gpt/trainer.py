"""Training loops: schedule-driven training and a single-batch overfit probe."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import torch

from ..errors import EmptyInputError
from .model import SpeechGpt
from .objective import TrainingConfig, lr_schedule
from .sequence import JointSequence


def _optimizer(model: SpeechGpt, lr: float, weight_decay: float) -> torch.optim.AdamW:
    # decay matrices only; biases, gains, and embeddings stay undecayed
    decay, no_decay = [], []
    for param in model.parameters():
        (decay if param.dim() >= 2 else no_decay).append(param)
    return torch.optim.AdamW(
        [
            {"params": decay, "weight_decay": weight_decay},
            {"params": no_decay, "weight_decay": 0.0},
        ],
        lr=lr,
        betas=(0.9, 0.95),
    )


def train_speech_gpt(
    model: SpeechGpt,
    dataset: Sequence[JointSequence],
    cfg: TrainingConfig,
    steps: int,
    include_eos_target: bool = True,
    val_dataset: Sequence[JointSequence] | None = None,
    val_every: int = 0,
) -> list[dict[str, float]]:
    """Seeded minibatch training under the warmup + cosine schedule.

    With val_dataset and val_every set, the held-out loss is evaluated every
    val_every steps and recorded as "val_loss" on those history entries.
    """
    if not dataset:
        raise EmptyInputError("empty training dataset")
    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)
    opt = _optimizer(model, cfg.max_lr, cfg.weight_decay)
    history = []
    for step in range(steps):
        lr = lr_schedule(step, cfg)
        for group in opt.param_groups:
            group["lr"] = lr
        picks = rng.integers(len(dataset), size=min(cfg.batch_size, len(dataset)))
        batch = [dataset[int(i)] for i in picks]
        loss, comps = model.loss_on_batch(
            batch,
            text_weight=cfg.text_weight,
            speech_weight=cfg.speech_weight,
            include_eos_target=include_eos_target,
        )
        opt.zero_grad()
        loss.backward()
        opt.step()
        record = {
            "loss": float(loss.detach()),
            "ce_text": float(comps["ce_text"].detach()),
            "ce_speech": float(comps["ce_speech"].detach()),
            "lr": lr,
        }
        if val_dataset and val_every and (step + 1) % val_every == 0:
            with torch.no_grad():
                val_loss, _ = model.loss_on_batch(
                    list(val_dataset),
                    text_weight=cfg.text_weight,
                    speech_weight=cfg.speech_weight,
                    include_eos_target=include_eos_target,
                )
            record["val_loss"] = float(val_loss)
        history.append(record)
    return history


def overfit_single_batch(
    model: SpeechGpt,
    batch: Sequence[JointSequence],
    steps: int = 2000,
    lr: float = 1e-3,
    weight_decay: float = 0.0,
    target_loss: float | None = 0.1,
    seed: int = 0,
) -> list[float]:
    """Memorize one batch at constant lr; stops early once below target_loss."""
    if not batch:
        raise EmptyInputError("empty batch")
    torch.manual_seed(seed)
    opt = _optimizer(model, lr, weight_decay)
    losses = []
    for _ in range(steps):
        loss, _ = model.loss_on_batch(batch)
        opt.zero_grad()
        loss.backward()
        opt.step()
        losses.append(float(loss.detach()))
        if target_loss is not None and losses[-1] < target_loss:
            break
    return losses
