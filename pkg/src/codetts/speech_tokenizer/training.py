"""Toy-scale training loops for both tokenizer paths.

These run in seconds on CPU; they exist so the loss wiring, codebook
maintenance, and disentanglement behavior can be exercised end to end, not
to reach perceptual quality.
"""

from __future__ import annotations

import copy

import numpy as np
import torch

from ..audio_core import Waveform
from ..errors import ConfigurationError, EmptyInputError
from .losses import TokenizerLossWeights, tokenizer_loss
from .models import SslFeatureProvider, SslTokenizer, VqVaeTokenizer


def _crop(t: torch.Tensor, frames: int, rng: np.random.Generator) -> torch.Tensor:
    if t.shape[0] <= frames:
        return t
    start = int(rng.integers(t.shape[0] - frames + 1))
    return t[start : start + frames]


def train_vqvae(
    model: VqVaeTokenizer,
    mels: list[np.ndarray],
    steps: int = 200,
    batch_size: int = 8,
    crop_frames: int = 48,
    lr: float = 2e-3,
    weights: TokenizerLossWeights | None = None,
    seed: int = 0,
) -> list[float]:
    """L1 reconstruction + commitment training; returns per-step losses."""
    if not mels:
        raise EmptyInputError("no training mels")
    weights = weights or TokenizerLossWeights(alpha=0.25, beta=0.0, gamma=0.0)
    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)
    crop = min(crop_frames, min(m.shape[0] for m in mels))
    crop -= crop % 2
    if crop == 0:
        raise EmptyInputError("shortest mel has fewer than 2 frames")
    tensors = [torch.as_tensor(m, dtype=torch.float32) for m in mels]
    opt = torch.optim.Adam([p for p in model.parameters() if p.requires_grad], lr=lr)
    history = []
    for _ in range(steps):
        batch = torch.stack(
            [_crop(tensors[int(rng.integers(len(tensors)))], crop, rng) for _ in range(batch_size)]
        )
        out = model(batch, batch)
        recon = (out["reconstruction"][:, : batch.shape[1]] - batch).abs().mean()
        loss = recon + weights.alpha * out["commitment"]
        opt.zero_grad()
        loss.backward()
        opt.step()
        model.codebook.update(out["pre_quantized"], out["codes"])
        history.append(float(loss.detach()))
    return history


def train_ssl_tokenizer(
    model: SslTokenizer,
    provider: SslFeatureProvider,
    utterances: list[tuple[Waveform, str]],
    epochs: int = 3,
    steps_per_epoch: int = 50,
    speakers_per_batch: int = 2,
    clips_per_speaker: int = 2,
    crop_frames: int = 25,
    lr: float = 1e-3,
    weights: TokenizerLossWeights | None = None,
    seed: int = 0,
) -> list[dict[str, float]]:
    """Disentanglement training over (waveform, speaker_id) pairs.

    Batches hold clips_per_speaker clips from each of speakers_per_batch
    speakers so the contrastive term always has positive pairs. The frozen
    extractor copy used by the cosine-leakage term is refreshed once per
    epoch. Returns per-step component logs.
    """
    weights = weights or TokenizerLossWeights()
    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)
    by_speaker: dict[str, list[torch.Tensor]] = {}
    for waveform, sid in utterances:
        by_speaker.setdefault(sid, []).append(provider.features(waveform))
    speakers = sorted(by_speaker)
    if len(speakers) < 2:
        raise ConfigurationError("disentanglement training needs at least 2 speakers")
    crop = min(crop_frames, min(f.shape[0] for fs in by_speaker.values() for f in fs))
    opt = torch.optim.Adam([p for p in model.parameters() if p.requires_grad], lr=lr)
    history = []
    for _ in range(epochs):
        frozen = copy.deepcopy(model.speaker_extractor).eval()
        for p in frozen.parameters():
            p.requires_grad_(False)
        for _ in range(steps_per_epoch):
            chosen = rng.choice(len(speakers), size=min(speakers_per_batch, len(speakers)), replace=False)
            feats, sids = [], []
            for si in chosen:
                sid = speakers[int(si)]
                clips = by_speaker[sid]
                for _ in range(clips_per_speaker):
                    feats.append(_crop(clips[int(rng.integers(len(clips)))], crop, rng))
                    sids.append(sid)
            batch_feats = torch.stack(feats)
            out = model(batch_feats)
            total, comps = tokenizer_loss(
                {
                    "target": batch_feats,
                    "reconstruction": out["reconstruction"],
                    "commitment": out["commitment"],
                    "embeddings": out["embeddings"],
                    "speaker_ids": sids,
                    "content_features": out["content_features"],
                    "frozen_extractor": frozen,
                },
                weights,
            )
            opt.zero_grad()
            total.backward()
            opt.step()
            model.codebook.update(out["pre_quantized"], out["codes"])
            record = {name: float(v.detach()) for name, v in comps.items()}
            record["total"] = float(total.detach())
            history.append(record)
    return history
