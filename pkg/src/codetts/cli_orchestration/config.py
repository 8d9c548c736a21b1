"""Experiment configuration: one YAML schema covering every stage.

Every hyperparameter any stage consumes lives here, so a run directory's
saved config fully determines the run. Unknown keys are rejected rather
than ignored; a typo should fail loudly, not silently fall back.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ..errors import ConfigurationError


def stage_seed(root_seed: int, stage: str) -> int:
    """Deterministic per-stage seed derived from the root seed."""
    digest = hashlib.sha256(f"{root_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "big") % (2**31)


@dataclass
class FixtureConfig:
    num_speakers: int = 2
    utterances_per_speaker: int = 12
    min_seconds: float = 1.0
    max_seconds: float = 8.0


@dataclass
class PrepConfig:
    cap_hours: float = 200.0
    max_split_s: float = 20.0
    max_segment_s: float = 40.0
    silence_threshold_dbfs: float = -40.0
    min_silence_s: float = 0.3
    asr_word_error_rate: float = 0.05
    asr_fragment_s: float = 10.0


@dataclass
class TokenizerConfig:
    variant: str = "ssl"  # "ssl" (50 codes/s) or "vqvae" (25 codes/s)
    codebook_size: int = 64
    # ssl branch
    feature_dim: int = 32
    hidden: int = 32
    bottleneck_dim: int = 8
    emb_dim: int = 32
    epochs: int = 3
    steps_per_epoch: int = 60
    speakers_per_batch: int = 2
    clips_per_speaker: int = 2
    crop_frames: int = 25
    lr: float = 1.0e-3
    # vqvae branch
    num_mels: int = 80
    code_dim: int = 16
    vqvae_hidden: int = 32
    ref_dim: int = 32
    vqvae_steps: int = 200
    vqvae_batch_size: int = 8
    vqvae_crop_frames: int = 48
    vqvae_lr: float = 2.0e-3
    # loss weights shared by both variants
    alpha: float = 0.25
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.variant not in ("ssl", "vqvae"):
            raise ConfigurationError(f"unknown tokenizer variant: {self.variant!r}")


@dataclass
class LmConfig:
    preset: str = "toy"
    text_vocab: int = 288  # byte alphabet (256) + learned merges
    bpe_target_vocab: int = 96
    steps: int = 400
    max_lr: float = 3.0e-3
    warmup_steps: int = 40
    floor_lr: float = 1.5e-3
    total_steps: int = 400
    weight_decay: float = 0.03
    text_weight: float = 0.01
    speech_weight: float = 1.0
    batch_size: int = 8
    val_fraction: float = 0.1
    val_every: int = 50


@dataclass
class DecoderStageConfig:
    base_channels: int = 32
    steps: int = 120
    batch_utterances: int = 2
    crop_frames: int = 50
    g_lr: float = 2.0e-3
    d_lr: float = 1.0e-3


@dataclass
class SynthesisConfig:
    temperature: float = 0.9
    top_k: int = 50
    max_codes: int = 400
    chunk_frames: int = 25


@dataclass
class ExperimentConfig:
    seed: int = 0
    fixture: FixtureConfig = field(default_factory=FixtureConfig)
    prep: PrepConfig = field(default_factory=PrepConfig)
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    lm: LmConfig = field(default_factory=LmConfig)
    decoder: DecoderStageConfig = field(default_factory=DecoderStageConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)

    def stage_seed(self, stage: str) -> int:
        return stage_seed(self.seed, stage)

    def to_yaml(self, path: str | Path) -> None:
        Path(path).write_text(
            yaml.safe_dump(asdict(self), sort_keys=False), encoding="utf-8"
        )

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigurationError(f"config root must be a mapping, got {type(raw).__name__}")
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        sections = {
            "fixture": FixtureConfig,
            "prep": PrepConfig,
            "tokenizer": TokenizerConfig,
            "lm": LmConfig,
            "decoder": DecoderStageConfig,
            "synthesis": SynthesisConfig,
        }
        known = set(sections) | {"seed"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict = {"seed": raw.get("seed", 0)}
        for name, section_cls in sections.items():
            kwargs[name] = _build_section(section_cls, raw.get(name, {}), name)
        return cls(**kwargs)


def _build_section(section_cls, mapping, name: str):
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigurationError(f"config section {name!r} must be a mapping")
    allowed = {f.name for f in fields(section_cls)}
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigurationError(f"unknown keys in config section {name!r}: {sorted(unknown)}")
    return section_cls(**mapping)
