"""Decoder training step, collapse monitoring, and synthesis benchmarks."""

from __future__ import annotations

import time
import warnings

import numpy as np
import torch

from ..audio_core import AudioConfig, Waveform
from ..errors import ConfigurationError
from .gan import (
    MultiPeriodDiscriminator,
    MultiScaleDiscriminator,
    feature_matching_loss,
    hinge_discriminator_loss,
    hinge_generator_loss,
    torch_logmel,
)
from .generator import DecoderConfig, DecoderInput, WaveDecoder, decode_full, decode_stream

MEL_LOSS_WEIGHT = 45.0
FEATURE_MATCHING_WEIGHT = 2.0


class CollapseTracker:
    """Warns once when discriminator loss pins near zero for a full window.

    A hinge D loss stuck at ~0 means the discriminator separates real from
    fake perfectly and the generator gets no usable gradient.
    """

    def __init__(self, threshold: float = 1e-6, window: int = 100):
        self.threshold = threshold
        self.window = window
        self.streak = 0
        self.warned = False

    def observe(self, discriminator_loss: float) -> bool:
        self.streak = self.streak + 1 if discriminator_loss < self.threshold else 0
        if self.streak >= self.window and not self.warned:
            self.warned = True
            warnings.warn(
                f"discriminator loss below {self.threshold} for {self.window} "
                "consecutive steps; adversarial training has likely collapsed",
                RuntimeWarning,
                stacklevel=2,
            )
            return True
        return False


def _generate(batch: dict, generator: WaveDecoder) -> torch.Tensor:
    hidden = torch.as_tensor(np.asarray(batch["hidden"]), dtype=torch.float32)
    speaker = torch.as_tensor(np.asarray(batch["speaker"]), dtype=torch.float32)
    if hidden.dim() != 3:
        raise ConfigurationError(f"batch hidden states must be [B, S, D], got {tuple(hidden.shape)}")
    return generator(hidden, speaker)


def decoder_training_step(
    batch: dict,
    generator: WaveDecoder,
    discriminators: tuple[MultiPeriodDiscriminator, MultiScaleDiscriminator],
    g_opt: torch.optim.Optimizer | None = None,
    d_opt: torch.optim.Optimizer | None = None,
    mel_weight: float = MEL_LOSS_WEIGHT,
    fm_weight: float = FEATURE_MATCHING_WEIGHT,
    tracker: CollapseTracker | None = None,
    config: AudioConfig | None = None,
) -> dict:
    """One adversarial update: D on detached fakes, then G on the full objective.

    batch carries "hidden" [B, S, D], "speaker" [B, E], "waveform" [B, T] float
    targets in [-1, 1]. With the optimizers omitted the losses are computed
    without updating anything, which the tests use for hand-checkable numbers.

    Returns a dict with generator_loss, discriminator_loss, and components.
    """
    mpd, msd = discriminators
    real = torch.as_tensor(np.asarray(batch["waveform"]), dtype=torch.float32)
    fake = _generate(batch, generator)
    if fake.shape != real.shape:
        raise ConfigurationError(
            f"generator produced {tuple(fake.shape)} but targets are {tuple(real.shape)}"
        )

    def run_banks(wave: torch.Tensor) -> tuple[list, list]:
        outs = mpd(wave) + msd(wave)
        return [s for s, _ in outs], [f for _, f in outs]

    real_scores, real_feats = run_banks(real)
    fake_scores_detached, _ = run_banks(fake.detach())
    d_loss = hinge_discriminator_loss(real_scores, fake_scores_detached)
    if d_opt is not None:
        d_opt.zero_grad()
        d_loss.backward()
        d_opt.step()

    fake_scores, fake_feats = run_banks(fake)
    adv = hinge_generator_loss(fake_scores)
    fm = feature_matching_loss(real_feats, fake_feats)
    mel = (torch_logmel(fake, config) - torch_logmel(real, config)).abs().mean()
    g_loss = adv + fm_weight * fm + mel_weight * mel
    if g_opt is not None:
        g_opt.zero_grad()
        g_loss.backward()
        g_opt.step()

    if tracker is not None:
        tracker.observe(float(d_loss.detach()))
    return {
        "generator_loss": float(g_loss.detach()),
        "discriminator_loss": float(d_loss.detach()),
        "components": {
            "adversarial": float(adv.detach()),
            "feature_matching": float(fm.detach()),
            "mel_l1": float(mel.detach()),
        },
    }


def train_decoder(
    generator: WaveDecoder,
    batch: dict,
    steps: int = 500,
    g_lr: float = 2e-3,
    d_lr: float = 1e-3,
    seed: int = 0,
    config: AudioConfig | None = None,
) -> list[dict]:
    """Small adversarial fit of one batch; returns the per-step loss records."""
    torch.manual_seed(seed)
    mpd = MultiPeriodDiscriminator()
    msd = MultiScaleDiscriminator()
    g_opt = torch.optim.Adam(generator.parameters(), lr=g_lr, betas=(0.8, 0.99))
    d_opt = torch.optim.Adam(
        list(mpd.parameters()) + list(msd.parameters()), lr=d_lr, betas=(0.8, 0.99)
    )
    tracker = CollapseTracker()
    history = []
    for _ in range(steps):
        history.append(
            decoder_training_step(
                batch, generator, (mpd, msd), g_opt, d_opt, tracker=tracker, config=config
            )
        )
    return history


def benchmark_synthesis(
    model: WaveDecoder,
    num_utterances: int = 5,
    utterance_seconds: float = 2.0,
    mode: str = "full",
    chunk_frames: int = 25,
    seed: int = 0,
) -> dict:
    """Wall-clock synthesis timing over random inputs.

    "full" decodes each utterance in one pass; "stream" walks fixed-size
    chunks and records the time to first audio separately. first_chunk_time
    for full mode equals the whole decode by definition.
    """
    if mode not in ("full", "stream"):
        raise ConfigurationError(f"unknown benchmark mode: {mode}")
    cfg = model.config
    frames = max(1, int(round(utterance_seconds * cfg.frame_rate)))
    rng = np.random.default_rng(seed)
    total_times = []
    first_times = []
    samples_out = 0
    for _ in range(num_utterances):
        inp = DecoderInput(
            hidden_states=rng.standard_normal((frames, cfg.input_dim)).astype(np.float32),
            speaker_emb=rng.standard_normal(cfg.speaker_dim).astype(np.float32),
        )
        start = time.perf_counter()
        if mode == "full":
            wave = decode_full(inp, model)
            elapsed = time.perf_counter() - start
            first = elapsed
            samples_out += len(wave)
        else:
            first = None
            for chunk in decode_stream(inp, chunk_frames, model):
                if first is None:
                    first = time.perf_counter() - start
                samples_out += len(chunk.samples)
            elapsed = time.perf_counter() - start
        total_times.append(elapsed)
        first_times.append(first)
    total_audio_s = samples_out / AudioConfig().sample_rate
    wall = float(np.sum(total_times))
    return {
        "mode": mode,
        "num_utterances": num_utterances,
        "frames_per_utterance": frames,
        "mean_wall_time": float(np.mean(total_times)),
        "first_chunk_time": float(np.mean(first_times)),
        "total_wall_time": wall,
        "real_time_factor": wall / total_audio_s if total_audio_s else float("inf"),
    }


def synthesize_waveform(
    hidden_states: np.ndarray | torch.Tensor,
    speaker_emb: np.ndarray | torch.Tensor,
    model: WaveDecoder,
) -> Waveform:
    """Convenience wrapper: hidden states + speaker embedding to a Waveform."""
    return decode_full(DecoderInput(hidden_states=hidden_states, speaker_emb=speaker_emb), model)


__all__ = [
    "MEL_LOSS_WEIGHT",
    "FEATURE_MATCHING_WEIGHT",
    "CollapseTracker",
    "benchmark_synthesis",
    "decoder_training_step",
    "synthesize_waveform",
    "train_decoder",
]
