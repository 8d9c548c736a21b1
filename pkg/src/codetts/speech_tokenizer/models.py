"""Tokenizer model architectures.

The mel-domain path (VqVaeTokenizer) halves the 50 frames/s mel grid to 25
codes/s and conditions its decoder on a global reference embedding. The
feature-domain path (SslTokenizer) emits one code per 20 ms feature frame
from a pluggable provider and splits the representation into content and
speaker branches so the codes can be trained to drop speaker identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..audio_core import MelSpectrogram, Waveform
from ..errors import ConfigurationError, EmptyInputError
from .codes import SpeakerEmbedding, SpeechcodeSequence
from .vq import Codebook, vq_quantize


class ReferenceEncoder(nn.Module):
    """Utterance-level voice summary from a mel spectrogram of any length."""

    def __init__(self, num_mels: int = 80, hidden: int = 128, out_dim: int = 64):
        super().__init__()
        self.convs = nn.Sequential(
            nn.Conv1d(num_mels, hidden, 3, padding=1),
            nn.GELU(),
            nn.Conv1d(hidden, hidden, 3, stride=2, padding=1),
            nn.GELU(),
        )
        self.proj = nn.Linear(hidden, out_dim)

    def forward(self, mel: torch.Tensor) -> torch.Tensor:
        """[B, F, M] -> [B, out_dim], unit norm."""
        if mel.shape[1] == 0:
            raise EmptyInputError("reference mel has no frames")
        h = self.convs(mel.transpose(1, 2)).transpose(1, 2)
        return F.normalize(self.proj(h.mean(dim=1)), dim=-1)


@dataclass
class VqVaeConfig:
    num_mels: int = 80
    hidden: int = 128
    code_dim: int = 64
    codebook_size: int = 8196
    ref_dim: int = 64
    input_frame_rate: float = 50.0
    seed: int = 0

    @property
    def code_frame_rate(self) -> float:
        return self.input_frame_rate / 2.0


class VqVaeTokenizer(nn.Module):
    """Mel autoencoder whose bottleneck is a 25 codes/s quantized sequence."""

    def __init__(self, config: VqVaeConfig | None = None):
        super().__init__()
        self.config = config or VqVaeConfig()
        cfg = self.config
        torch.manual_seed(cfg.seed)
        self.encoder = nn.Sequential(
            nn.Conv1d(cfg.num_mels, cfg.hidden, 3, padding=1),
            nn.GELU(),
            nn.Conv1d(cfg.hidden, cfg.hidden, 4, stride=2, padding=1),
            nn.GELU(),
            nn.Conv1d(cfg.hidden, cfg.code_dim, 3, padding=1),
        )
        self.codebook = Codebook(cfg.codebook_size, cfg.code_dim, seed=cfg.seed)
        self.decoder = nn.Sequential(
            nn.Conv1d(cfg.code_dim + cfg.ref_dim, cfg.hidden, 3, padding=1),
            nn.GELU(),
            nn.ConvTranspose1d(cfg.hidden, cfg.hidden, 4, stride=2, padding=1),
            nn.GELU(),
            nn.Conv1d(cfg.hidden, cfg.num_mels, 3, padding=1),
        )
        self.ref_encoder = ReferenceEncoder(cfg.num_mels, cfg.hidden, cfg.ref_dim)

    def encode(self, mel: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """[B, F, M] -> (codes [B, ceil(F/2)], pre_quantized, commitment)."""
        if mel.shape[1] == 0:
            raise EmptyInputError("mel has no frames")
        if mel.shape[1] % 2:
            mel = F.pad(mel, (0, 0, 0, 1))
        pre_q = self.encoder(mel.transpose(1, 2)).transpose(1, 2)
        codes, quantized, commitment = vq_quantize(pre_q, self.codebook)
        return codes, pre_q, commitment

    def decode(self, quantized: torch.Tensor, ref_emb: torch.Tensor) -> torch.Tensor:
        """Codes as vectors [B, S, d] plus [B, ref_dim] -> mel [B, 2S, M]."""
        if quantized.shape[1] == 0:
            raise EmptyInputError("no codes to decode")
        ref = ref_emb.unsqueeze(1).expand(-1, quantized.shape[1], -1)
        x = torch.cat([quantized, ref], dim=-1)
        return self.decoder(x.transpose(1, 2)).transpose(1, 2)

    def forward(self, mel: torch.Tensor, ref_mel: torch.Tensor) -> dict:
        codes, pre_q, commitment = self.encode(mel)
        quantized = pre_q + (self.codebook.entries[codes].to(pre_q.dtype) - pre_q).detach()
        ref_emb = self.ref_encoder(ref_mel)
        recon = self.decode(quantized, ref_emb)
        return {
            "codes": codes,
            "pre_quantized": pre_q,
            "commitment": commitment,
            "reference_embedding": ref_emb,
            "reconstruction": recon,
        }

    @torch.no_grad()
    def encode_utterance(
        self, mel: MelSpectrogram, ref: MelSpectrogram
    ) -> tuple[SpeechcodeSequence, SpeakerEmbedding]:
        """Utterance mel + reference mel -> 25 codes/s sequence + voice vector."""
        frames = torch.as_tensor(mel.frames, dtype=torch.float32).unsqueeze(0)
        ref_frames = torch.as_tensor(ref.frames, dtype=torch.float32).unsqueeze(0)
        codes, _, _ = self.encode(frames)
        emb = self.ref_encoder(ref_frames)[0]
        seq = SpeechcodeSequence(
            codes=codes[0].numpy(),
            frame_rate=self.config.code_frame_rate,
            codebook_size=self.config.codebook_size,
        )
        return seq, SpeakerEmbedding(vector=emb.numpy())

    @torch.no_grad()
    def decode_utterance(self, seq: SpeechcodeSequence, ref_emb: SpeakerEmbedding) -> MelSpectrogram:
        if seq.codebook_size != self.config.codebook_size:
            raise ConfigurationError(
                f"sequence codebook size {seq.codebook_size} != model {self.config.codebook_size}"
            )
        if len(seq) == 0:
            raise EmptyInputError("no codes to decode")
        vectors = self.codebook.entries[torch.as_tensor(seq.codes)].unsqueeze(0)
        emb = torch.as_tensor(ref_emb.vector, dtype=torch.float32).unsqueeze(0)
        mel = self.decode(vectors, emb)[0]
        return MelSpectrogram(
            frames=mel.numpy().astype(np.float32),
            num_mels=self.config.num_mels,
            hop=int(round(24000 / self.config.input_frame_rate)),
            frame_rate=self.config.input_frame_rate,
        )


@runtime_checkable
class SslFeatureProvider(Protocol):
    """Frame-level feature source at 50 frames/s (20 ms per frame)."""

    feature_dim: int
    frame_rate: float

    def features(self, waveform: Waveform) -> torch.Tensor:
        """[num_frames, feature_dim] with num_frames == ceil(duration_s * 50)."""
        ...


class RandomConvFeatureProvider(nn.Module):
    """Fixed random convolutional stand-in for a pretrained feature stack.

    Four strided conv layers (4*4*6*5 = 480 samples/frame at 24 kHz) give one
    feature vector per 20 ms; kernels are twice the stride so adjacent frames
    share context. Weights are random orthogonal projections, seeded and never
    trained, so the provider is a deterministic function of the waveform,
    which is all the tokenizer contracts require. The output is scaled by a
    constant calibrated on white noise so features come out near unit
    variance, like the layer-normalized features of a real pretrained stack.
    A genuinely pretrained provider satisfying the same protocol can be
    swapped in by config.
    """

    frame_rate = 50.0
    samples_per_frame = 480

    def __init__(self, feature_dim: int = 64, seed: int = 0):
        super().__init__()
        self.feature_dim = feature_dim
        torch.manual_seed(seed)
        widths = [1, 48, 64, 96, feature_dim]
        strides = [4, 4, 6, 5]
        layers: list[nn.Module] = []
        for i, s in enumerate(strides):
            conv = nn.Conv1d(widths[i], widths[i + 1], kernel_size=2 * s, stride=s)
            # norm-preserving random projection; the gain offsets GELU's
            # attenuation so the signal survives all four layers
            nn.init.orthogonal_(conv.weight.view(conv.weight.shape[0], -1), gain=2.0)
            nn.init.zeros_(conv.bias)
            layers.append(nn.ConstantPad1d((s // 2, s - s // 2), 0.0))
            layers.append(conv)
            if i < len(strides) - 1:
                layers.append(nn.GELU())
        self.stack = nn.Sequential(*layers)
        for p in self.parameters():
            p.requires_grad_(False)
        self.output_gain = self._calibrate_gain()

    @torch.no_grad()
    def _calibrate_gain(self) -> float:
        """Fixed scale putting features near unit variance on speech-like input.

        White noise overweights high frequencies that strided convs average
        away, so the calibration signal is lowpassed to a speech-like spectrum
        at conversational level before measuring the stack's response.
        """
        gen = torch.Generator().manual_seed(0)
        noise = torch.randn(1, 1, 20 * self.samples_per_frame, generator=gen)
        kernel = 0.95 ** torch.arange(256, dtype=torch.float32)
        shaped = F.conv1d(F.pad(noise, (255, 0)), kernel.view(1, 1, -1))
        shaped = 0.1 * shaped / shaped.std()
        return float(1.0 / (self.stack(shaped).std() + 1e-8))

    @torch.no_grad()
    def features(self, waveform: Waveform) -> torch.Tensor:
        n = len(waveform)
        if n < self.samples_per_frame:
            raise EmptyInputError(f"waveform shorter than one 20 ms frame ({n} samples)")
        x = torch.as_tensor(waveform.to_float(), dtype=torch.float32)
        remainder = n % self.samples_per_frame
        if remainder:
            x = F.pad(x, (0, self.samples_per_frame - remainder))
        return self.output_gain * self.stack(x.view(1, 1, -1))[0].t().contiguous()


class SpeakerExtractor(nn.Module):
    """Transformer pooling of speaker-branch frames into a unit-norm vector."""

    def __init__(
        self,
        input_dim: int = 64,
        d_model: int = 64,
        nhead: int = 4,
        num_layers: int = 2,
        emb_dim: int = 64,
    ):
        super().__init__()
        self.in_proj = nn.Linear(input_dim, d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=d_model,
            nhead=nhead,
            dim_feedforward=2 * d_model,
            dropout=0.0,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers)
        self.out_proj = nn.Linear(d_model, emb_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """[B, T, input_dim] -> [B, emb_dim]; also accepts a single [T, input_dim]."""
        squeeze = x.ndim == 2
        if squeeze:
            x = x.unsqueeze(0)
        if x.shape[1] == 0:
            raise EmptyInputError("no frames to extract a speaker embedding from")
        h = self.encoder(self.in_proj(x))
        emb = F.normalize(self.out_proj(h.mean(dim=1)), dim=-1)
        return emb[0] if squeeze else emb


def extract_speaker(features, extractor: SpeakerExtractor) -> SpeakerEmbedding:
    """Speaker-branch frames -> fixed-size unit-norm SpeakerEmbedding."""
    x = torch.as_tensor(np.asarray(features), dtype=torch.float32)
    with torch.no_grad():
        emb = extractor(x)
    if emb.ndim != 1:
        raise ConfigurationError("extract_speaker expects a single utterance, not a batch")
    return SpeakerEmbedding(vector=emb.numpy())


class _ResidualConvBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv1d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv1d(channels, channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv2(F.gelu(self.conv1(F.gelu(x))))
        return x + h


@dataclass
class SslTokenizerConfig:
    feature_dim: int = 64
    hidden: int = 64
    bottleneck_dim: int = 8
    codebook_size: int = 256
    emb_dim: int = 64
    content_instance_norm: bool = True
    seed: int = 0

    @property
    def code_frame_rate(self) -> float:
        return 50.0


class SslTokenizer(nn.Module):
    """One speechcode per 20 ms feature frame, with a separate speaker branch.

    features -> content regressor -> residual conv encoder -> vq_quantize is
    the content path; features -> speaker regressor -> transformer extractor
    is the speaker path. The feature decoder sees content codes plus the
    speaker embedding, so reconstruction does not force speaker identity into
    the codes. Instance normalization on the content branch strips
    per-utterance feature statistics, which carry most of the voice.
    """

    def __init__(self, config: SslTokenizerConfig | None = None):
        super().__init__()
        self.config = config or SslTokenizerConfig()
        cfg = self.config
        torch.manual_seed(cfg.seed)
        self.content_regressor = nn.Linear(cfg.feature_dim, cfg.hidden)
        self.instance_norm = (
            nn.InstanceNorm1d(cfg.hidden) if cfg.content_instance_norm else None
        )
        self.content_encoder = nn.Sequential(
            nn.Conv1d(cfg.hidden, cfg.hidden, 3, padding=1),
            _ResidualConvBlock(cfg.hidden),
            nn.Conv1d(cfg.hidden, cfg.bottleneck_dim, 1),
        )
        self.codebook = Codebook(cfg.codebook_size, cfg.bottleneck_dim, seed=cfg.seed)
        self.decoder = nn.Sequential(
            nn.Conv1d(cfg.bottleneck_dim + cfg.emb_dim, cfg.hidden, 3, padding=1),
            _ResidualConvBlock(cfg.hidden),
            nn.Conv1d(cfg.hidden, cfg.feature_dim, 3, padding=1),
        )
        self.speaker_regressor = nn.Linear(cfg.feature_dim, cfg.hidden)
        self.speaker_extractor = SpeakerExtractor(
            input_dim=cfg.hidden, d_model=cfg.hidden, emb_dim=cfg.emb_dim
        )

    def content_branch(self, features: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """[B, T, f] -> (content_features [B, T, h], pre_quantized [B, T, d])."""
        h = self.content_regressor(features)
        if self.instance_norm is not None:
            if h.shape[1] == 1:
                # normalizing a single frame is degenerate; the eps-regularized
                # limit is exactly zero
                h = torch.zeros_like(h)
            else:
                h = self.instance_norm(h.transpose(1, 2)).transpose(1, 2)
        pre_q = self.content_encoder(h.transpose(1, 2)).transpose(1, 2)
        return h, pre_q

    def speaker_embedding(self, features: torch.Tensor) -> torch.Tensor:
        """[B, T, f] -> [B, emb_dim], unit norm."""
        return self.speaker_extractor(self.speaker_regressor(features))

    def forward(self, features: torch.Tensor) -> dict:
        if features.shape[1] == 0:
            raise EmptyInputError("no feature frames")
        content_features, pre_q = self.content_branch(features)
        codes, quantized, commitment = vq_quantize(pre_q, self.codebook)
        embeddings = self.speaker_embedding(features)
        ref = embeddings.unsqueeze(1).expand(-1, quantized.shape[1], -1)
        recon = self.decoder(torch.cat([quantized, ref], dim=-1).transpose(1, 2)).transpose(1, 2)
        return {
            "codes": codes,
            "pre_quantized": pre_q,
            "commitment": commitment,
            "content_features": content_features,
            "embeddings": embeddings,
            "reconstruction": recon,
        }

    @torch.no_grad()
    def encode_utterance(
        self, waveform: Waveform, provider: SslFeatureProvider
    ) -> tuple[SpeechcodeSequence, np.ndarray]:
        """Waveform -> (codes at 50/s, content encodings before quantization)."""
        features = provider.features(waveform).unsqueeze(0)
        _, pre_q = self.content_branch(features)
        codes, _, _ = vq_quantize(pre_q, self.codebook)
        seq = SpeechcodeSequence(
            codes=codes[0].numpy(),
            frame_rate=self.config.code_frame_rate,
            codebook_size=self.config.codebook_size,
        )
        return seq, pre_q[0].numpy()

    @torch.no_grad()
    def utterance_speaker(self, waveform: Waveform, provider: SslFeatureProvider) -> SpeakerEmbedding:
        features = provider.features(waveform).unsqueeze(0)
        return SpeakerEmbedding(vector=self.speaker_embedding(features)[0].numpy())
