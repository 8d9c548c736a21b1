"""Adversarial machinery: period/scale discriminator banks and GAN losses.

Widths are kept tiny; the banks exist to exercise the training objective,
not to reach production fidelity. Scores and per-layer features come back
as lists so feature matching can run over every bank member.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..audio_core import AudioConfig, mel_filterbank


class _PeriodDiscriminator(nn.Module):
    """2-D convs over the signal folded to (time/period, period)."""

    def __init__(self, period: int):
        super().__init__()
        self.period = period
        self.convs = nn.ModuleList(
            [
                nn.Conv2d(1, 8, (5, 1), stride=(3, 1), padding=(2, 0)),
                nn.Conv2d(8, 16, (5, 1), stride=(3, 1), padding=(2, 0)),
                nn.Conv2d(16, 32, (5, 1), stride=(3, 1), padding=(2, 0)),
            ]
        )
        self.out = nn.Conv2d(32, 1, (3, 1), padding=(1, 0))

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        bsz, t = x.shape
        remainder = t % self.period
        if remainder:
            x = F.pad(x, (0, self.period - remainder))
        x = x.view(bsz, 1, -1, self.period)
        features = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), 0.1)
            features.append(x)
        return self.out(x).flatten(1), features


class _ScaleDiscriminator(nn.Module):
    def __init__(self):
        super().__init__()
        self.convs = nn.ModuleList(
            [
                nn.Conv1d(1, 8, 15, stride=4, padding=7),
                nn.Conv1d(8, 16, 15, stride=4, padding=7),
                nn.Conv1d(16, 32, 15, stride=4, padding=7),
            ]
        )
        self.out = nn.Conv1d(32, 1, 3, padding=1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        x = x.unsqueeze(1)
        features = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), 0.1)
            features.append(x)
        return self.out(x).flatten(1), features


class MultiPeriodDiscriminator(nn.Module):
    def __init__(self, periods: tuple[int, ...] = (2, 3, 5)):
        super().__init__()
        self.banks = nn.ModuleList([_PeriodDiscriminator(p) for p in periods])

    def forward(self, x: torch.Tensor) -> list[tuple[torch.Tensor, list[torch.Tensor]]]:
        return [bank(x) for bank in self.banks]


class MultiScaleDiscriminator(nn.Module):
    def __init__(self, num_scales: int = 2):
        super().__init__()
        self.banks = nn.ModuleList([_ScaleDiscriminator() for _ in range(num_scales)])

    def forward(self, x: torch.Tensor) -> list[tuple[torch.Tensor, list[torch.Tensor]]]:
        outputs = []
        for i, bank in enumerate(self.banks):
            scaled = F.avg_pool1d(x.unsqueeze(1), 2**i).squeeze(1) if i else x
            outputs.append(bank(scaled))
        return outputs


def hinge_discriminator_loss(real_scores: list, fake_scores: list) -> torch.Tensor:
    """Mean over banks of relu(1 - real) + relu(1 + fake)."""
    terms = [
        F.relu(1.0 - real).mean() + F.relu(1.0 + fake).mean()
        for real, fake in zip(real_scores, fake_scores)
    ]
    return torch.stack(terms).mean()


def hinge_generator_loss(fake_scores: list) -> torch.Tensor:
    """Mean over banks of -score; lower when the discriminator is fooled."""
    return torch.stack([(-fake).mean() for fake in fake_scores]).mean()


def feature_matching_loss(real_features: list, fake_features: list) -> torch.Tensor:
    """L1 between real and fake discriminator activations, all banks/layers."""
    terms = []
    for real_bank, fake_bank in zip(real_features, fake_features):
        for real, fake in zip(real_bank, fake_bank):
            terms.append((real.detach() - fake).abs().mean())
    return torch.stack(terms).mean()


_FILTERBANK_CACHE: dict[tuple, torch.Tensor] = {}


def torch_logmel(wave: torch.Tensor, config: AudioConfig | None = None) -> torch.Tensor:
    """Differentiable log-mel of [B, T] float audio on the shared mel grid."""
    cfg = config or AudioConfig()
    bsz, t = wave.shape
    pad_left = cfg.hop // 2 - cfg.win // 2
    frames = int(np.ceil(t / cfg.hop))
    total = (frames - 1) * cfg.hop + cfg.hop // 2 + cfg.win // 2
    x = F.pad(wave, (max(0, -pad_left), max(0, total - t)))
    windows = x.unfold(1, cfg.win, cfg.hop)[:, :frames]
    spec = torch.fft.rfft(windows * torch.hann_window(cfg.win, periodic=False), dim=-1).abs() ** 2
    key = (cfg.sample_rate, cfg.win, cfg.num_mels, cfg.fmin, cfg.fmax)
    if key not in _FILTERBANK_CACHE:
        fb = mel_filterbank(cfg.sample_rate, cfg.win, cfg.num_mels, cfg.fmin, cfg.fmax)
        _FILTERBANK_CACHE[key] = torch.as_tensor(fb, dtype=torch.float32)
    mel = spec @ _FILTERBANK_CACHE[key].t()
    return torch.log(torch.clamp(mel, min=cfg.log_floor))
