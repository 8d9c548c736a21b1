"""Causal convolutional waveform generator with exact chunked streaming.

Every convolution is strictly causal (left-padded), so the decoder has zero
lookahead: streamed decoding with per-layer left-context caches produces the
same samples as a full pass. Upsampling is nearest-neighbor repeat by
2, 8, 6, 5 (480x total), taking 50 hidden states/s to 24000 samples/s.
Speaker identity enters through per-channel affine modulation after each
upsampling stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..audio_core import TARGET_SAMPLE_RATE, Waveform
from ..errors import ConfigurationError, EmptyInputError

StreamState = dict


@dataclass
class DecoderConfig:
    input_dim: int = 32
    speaker_dim: int = 64
    base_channels: int = 64
    upsample_factors: tuple[int, ...] = (2, 8, 6, 5)
    frame_rate: float = 50.0

    def __post_init__(self) -> None:
        total = math.prod(self.upsample_factors)
        if self.frame_rate * total != TARGET_SAMPLE_RATE:
            raise ConfigurationError(
                f"frame rate {self.frame_rate} x upsampling {total} != {TARGET_SAMPLE_RATE}"
            )

    @property
    def total_upsampling(self) -> int:
        return math.prod(self.upsample_factors)


@dataclass
class DecoderInput:
    """One utterance worth of conditioning: [S, model_dim] plus a voice vector."""

    hidden_states: np.ndarray
    speaker_emb: np.ndarray

    def __post_init__(self) -> None:
        self.hidden_states = np.asarray(self.hidden_states, dtype=np.float32)
        vec = getattr(self.speaker_emb, "vector", self.speaker_emb)
        self.speaker_emb = np.asarray(vec, dtype=np.float32).reshape(-1)

    @property
    def num_frames(self) -> int:
        return self.hidden_states.shape[0]


@dataclass
class StreamChunk:
    samples: np.ndarray  # int16
    chunk_index: int
    is_final: bool


class CausalConv1d(nn.Module):
    """Conv1d that only sees the past; left context comes from zeros or a cache."""

    def __init__(self, cin: int, cout: int, kernel: int, dilation: int = 1):
        super().__init__()
        self.conv = nn.Conv1d(cin, cout, kernel, dilation=dilation)
        self.pad = (kernel - 1) * dilation

    def forward(self, x: torch.Tensor, state: StreamState | None = None) -> torch.Tensor:
        if state is None:
            context = x.new_zeros(x.shape[0], x.shape[1], self.pad)
        else:
            context = state.get(self)
            if context is None:
                context = x.new_zeros(x.shape[0], x.shape[1], self.pad)
        x = torch.cat([context, x], dim=2)
        if state is not None and self.pad:
            state[self] = x[:, :, x.shape[2] - self.pad :]
        return self.conv(x)


class _Film(nn.Module):
    """Per-channel affine modulation from the speaker embedding."""

    def __init__(self, speaker_dim: int, channels: int):
        super().__init__()
        self.scale = nn.Linear(speaker_dim, channels)
        self.shift = nn.Linear(speaker_dim, channels)
        nn.init.zeros_(self.scale.weight)
        nn.init.zeros_(self.scale.bias)
        nn.init.zeros_(self.shift.weight)
        nn.init.zeros_(self.shift.bias)

    def forward(self, x: torch.Tensor, spk: torch.Tensor) -> torch.Tensor:
        scale = self.scale(spk).unsqueeze(-1)
        shift = self.shift(spk).unsqueeze(-1)
        return x * (1.0 + scale) + shift


class _UpsampleStage(nn.Module):
    def __init__(self, cin: int, cout: int, factor: int, speaker_dim: int):
        super().__init__()
        self.factor = factor
        self.conv = CausalConv1d(cin, cout, kernel=2 * factor + 1)
        self.res1 = CausalConv1d(cout, cout, kernel=3, dilation=1)
        self.res2 = CausalConv1d(cout, cout, kernel=3, dilation=3)
        self.film = _Film(speaker_dim, cout)

    def forward(self, x: torch.Tensor, spk: torch.Tensor, state: StreamState | None) -> torch.Tensor:
        x = torch.repeat_interleave(x, self.factor, dim=2)
        x = F.leaky_relu(self.conv(x, state), 0.1)
        y = self.res2(F.leaky_relu(self.res1(x, state), 0.1), state)
        x = x + y
        return self.film(x, spk)


class WaveDecoder(nn.Module):
    def __init__(self, config: DecoderConfig | None = None, seed: int = 0):
        super().__init__()
        self.config = config or DecoderConfig()
        cfg = self.config
        torch.manual_seed(seed)
        self.prenet = CausalConv1d(cfg.input_dim, cfg.base_channels, kernel=3)
        channels = [max(4, cfg.base_channels // (2**i)) for i in range(len(cfg.upsample_factors) + 1)]
        self.stages = nn.ModuleList(
            [
                _UpsampleStage(channels[i], channels[i + 1], f, cfg.speaker_dim)
                for i, f in enumerate(cfg.upsample_factors)
            ]
        )
        self.postnet = CausalConv1d(channels[-1], 1, kernel=7)

    def forward(
        self, hidden: torch.Tensor, spk: torch.Tensor, state: StreamState | None = None
    ) -> torch.Tensor:
        """[B, S, input_dim] + [B, speaker_dim] -> samples [B, S * 480] in [-1, 1]."""
        if hidden.shape[1] == 0:
            raise EmptyInputError("no hidden-state frames to decode")
        if hidden.shape[2] != self.config.input_dim:
            raise ConfigurationError(
                f"hidden dim {hidden.shape[2]} != decoder input dim {self.config.input_dim}"
            )
        if spk.shape[-1] != self.config.speaker_dim:
            raise ConfigurationError(
                f"speaker dim {spk.shape[-1]} != decoder speaker dim {self.config.speaker_dim}"
            )
        x = self.prenet(hidden.transpose(1, 2), state)
        for stage in self.stages:
            x = stage(x, spk, state)
        return torch.tanh(self.postnet(x, state)).squeeze(1)


def _to_int16(samples: torch.Tensor) -> np.ndarray:
    return np.clip(np.round(samples.numpy() * 32768.0), -32768, 32767).astype(np.int16)


@torch.no_grad()
def decode_full(inp: DecoderInput, model: WaveDecoder) -> Waveform:
    """All frames in one pass; output length is exactly frames x 480."""
    hidden = torch.as_tensor(inp.hidden_states).unsqueeze(0)
    spk = torch.as_tensor(inp.speaker_emb).unsqueeze(0)
    samples = model(hidden, spk)[0]
    return Waveform(samples=_to_int16(samples), sample_rate=TARGET_SAMPLE_RATE, channels=1)


@torch.no_grad()
def decode_stream(
    inp: DecoderInput, chunk_frames: int, model: WaveDecoder
) -> Iterator[StreamChunk]:
    """Yield waveform chunks of chunk_frames x 480 samples as frames arrive.

    The decoder is fully causal (zero lookahead), so any chunk_frames >= 1 is
    valid and the concatenated chunks equal the full decode.
    """
    if chunk_frames < 1:
        raise ConfigurationError(f"chunk_frames must be >= 1, got {chunk_frames}")
    if inp.num_frames == 0:
        raise EmptyInputError("no hidden-state frames to decode")
    spk = torch.as_tensor(inp.speaker_emb).unsqueeze(0)
    state: StreamState = {}
    n_chunks = math.ceil(inp.num_frames / chunk_frames)
    for i in range(n_chunks):
        frames = inp.hidden_states[i * chunk_frames : (i + 1) * chunk_frames]
        hidden = torch.as_tensor(frames).unsqueeze(0)
        samples = model(hidden, spk, state)[0]
        yield StreamChunk(
            samples=_to_int16(samples), chunk_index=i, is_final=i == n_chunks - 1
        )


def expand_hidden_states(
    hidden: np.ndarray, token_lengths: Sequence[int], repeats_per_code: int = 1
) -> np.ndarray:
    """Repeat each token's hidden state to the decoder's fixed frame rate.

    BPE tokens cover token_lengths[i] base codes each; base codes may
    themselves span repeats_per_code decoder frames (2 for a 25/s tokenizer
    feeding a 50/s decoder).
    """
    if len(token_lengths) != hidden.shape[0]:
        raise ConfigurationError(
            f"{hidden.shape[0]} hidden rows but {len(token_lengths)} token lengths"
        )
    reps = np.asarray(token_lengths, dtype=np.int64) * repeats_per_code
    return np.repeat(np.asarray(hidden), reps, axis=0)
