"""GPT-style decoder over the joint [ref | text | codes] layout.

Dual embeddings and heads: text tokens and speechcodes each get their own
token embedding, positional table (both indexed from 0 within their span),
and prediction head over their own vocabulary. The speech head covers the
code vocabulary plus two boundary tokens (begin-speech, end-of-speech).
Prediction heads start at zero so an untrained model is exactly uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ConfigurationError, ContextOverflowError, NumericalError
from .objective import joint_loss
from .sequence import JointSequence, build_sequence

# Full-scale preset shapes and the same depth at 1/8 width for desk runs.
PRESETS: dict[str, dict] = {
    "small": dict(layers=16, model_dim=768, heads=12, ff_dim=3072),
    "medium": dict(layers=30, model_dim=1024, heads=16, ff_dim=4096),
    "large": dict(layers=32, model_dim=1536, heads=24, ff_dim=6144),
    "small-desk": dict(layers=16, model_dim=96, heads=12, ff_dim=384),
    "medium-desk": dict(layers=30, model_dim=128, heads=16, ff_dim=512),
    "large-desk": dict(layers=32, model_dim=192, heads=24, ff_dim=768),
    "toy": dict(layers=2, model_dim=32, heads=2, ff_dim=64),
}


@dataclass
class ModelConfig:
    layers: int
    model_dim: int
    heads: int
    ff_dim: int
    name: str = "custom"
    text_vocab: int = 320
    code_vocab: int = 8192
    ref_dim: int = 64
    context: int = 2048

    def __post_init__(self) -> None:
        if self.model_dim % self.heads:
            raise ConfigurationError(
                f"model_dim {self.model_dim} not divisible by {self.heads} heads"
            )

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "ModelConfig":
        if name not in PRESETS:
            raise ConfigurationError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
        return cls(name=name, **PRESETS[name], **overrides)

    @property
    def speech_vocab(self) -> int:
        return self.code_vocab + 2

    @property
    def begin_token(self) -> int:
        return self.code_vocab

    @property
    def eos_token(self) -> int:
        return self.code_vocab + 1

    def parameter_estimate(self) -> int:
        """Exact trainable-parameter count of SpeechGpt built from this config."""
        d, ff = self.model_dim, self.ff_dim
        emb = (
            self.text_vocab * d
            + self.speech_vocab * d
            + 2 * self.context * d
            + (self.ref_dim * d + d)
        )
        block = (3 * d * d + 3 * d) + (d * d + d) + 2 * (2 * d) + (d * ff + ff) + (ff * d + d)
        heads = (d * self.text_vocab + self.text_vocab) + (d * self.speech_vocab + self.speech_vocab)
        return emb + self.layers * block + 2 * d + heads


@dataclass
class SamplingConfig:
    temperature: float = 0.9
    top_k: int = 50
    max_codes: int = 1500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigurationError("temperature must be >= 0 (0 means greedy)")
        if self.max_codes < 1:
            raise ConfigurationError("max_codes must be >= 1")


@dataclass
class GenerationResult:
    codes: list[int]
    hidden_states: torch.Tensor  # [num_codes, model_dim]
    truncated: bool


class _CausalSelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor, cache: dict | None = None) -> torch.Tensor:
        bsz, length, dim = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)
        shape = (bsz, length, self.heads, dim // self.heads)
        q, k, v = (t.view(shape).transpose(1, 2) for t in (q, k, v))
        if cache is not None:
            if "k" in cache:
                k = torch.cat([cache["k"], k], dim=2)
                v = torch.cat([cache["v"], v], dim=2)
            cache["k"], cache["v"] = k, v
        # with a cache and a single new query it may attend to everything
        causal = q.shape[2] == k.shape[2]
        y = F.scaled_dot_product_attention(q, k, v, is_causal=causal)
        return self.proj(y.transpose(1, 2).reshape(bsz, length, dim))


class _Block(nn.Module):
    def __init__(self, dim: int, heads: int, ff_dim: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = _CausalSelfAttention(dim, heads)
        self.ln2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, ff_dim), nn.GELU(), nn.Linear(ff_dim, dim))

    def forward(self, x: torch.Tensor, cache: dict | None = None) -> torch.Tensor:
        x = x + self.attn(self.ln1(x), cache)
        return x + self.mlp(self.ln2(x))


class SpeechGpt(nn.Module):
    def __init__(self, config: ModelConfig, seed: int = 0):
        super().__init__()
        self.config = config
        torch.manual_seed(seed)
        d = config.model_dim
        self.text_emb = nn.Embedding(config.text_vocab, d)
        self.speech_emb = nn.Embedding(config.speech_vocab, d)
        self.text_pos = nn.Embedding(config.context, d)
        self.code_pos = nn.Embedding(config.context, d)
        self.ref_proj = nn.Linear(config.ref_dim, d)
        self.blocks = nn.ModuleList(
            [_Block(d, config.heads, config.ff_dim) for _ in range(config.layers)]
        )
        self.ln_f = nn.LayerNorm(d)
        self.text_head = nn.Linear(d, config.text_vocab)
        self.speech_head = nn.Linear(d, config.speech_vocab)
        for table in (self.text_emb, self.speech_emb, self.text_pos, self.code_pos):
            nn.init.normal_(table.weight, std=0.02)
        for head in (self.text_head, self.speech_head):
            nn.init.zeros_(head.weight)
            nn.init.zeros_(head.bias)

    def _embed(self, seq: JointSequence) -> torch.Tensor:
        """One sequence to input vectors [total_length, model_dim]."""
        cfg = self.config
        if seq.total_length > cfg.context:
            raise ContextOverflowError(
                f"sequence length {seq.total_length} exceeds context {cfg.context}"
            )
        ref = torch.as_tensor(seq.ref_embedding, dtype=self.ref_proj.weight.dtype)
        if ref.shape != (cfg.ref_dim,):
            raise ConfigurationError(
                f"reference embedding dim {tuple(ref.shape)} != ({cfg.ref_dim},)"
            )
        device_kw = {"dtype": torch.long}
        parts = [self.ref_proj(ref).unsqueeze(0)]
        if seq.text_ids:
            ids = torch.tensor(seq.text_ids, **device_kw)
            parts.append(self.text_emb(ids) + self.text_pos.weight[: len(ids)])
        parts.append(self.speech_emb(torch.tensor([cfg.begin_token], **device_kw)))
        if seq.code_ids:
            ids = torch.tensor(seq.code_ids, **device_kw)
            parts.append(self.speech_emb(ids) + self.code_pos.weight[: len(ids)])
        parts.append(self.speech_emb(torch.tensor([cfg.eos_token], **device_kw)))
        return torch.cat(parts, dim=0)

    def forward(self, x: torch.Tensor, caches: list[dict] | None = None) -> torch.Tensor:
        """Input vectors [B, L, d] -> final hidden states [B, L, d]."""
        for i, block in enumerate(self.blocks):
            x = block(x, caches[i] if caches is not None else None)
        h = self.ln_f(x)
        if not torch.isfinite(h).all():
            raise NumericalError("non-finite activations in transformer forward")
        return h

    def forward_sequences(self, seqs: Sequence[JointSequence]) -> tuple[torch.Tensor, list[int]]:
        """Right-padded batch forward; returns (hidden [B, Lmax, d], lengths)."""
        embedded = [self._embed(s) for s in seqs]
        lengths = [e.shape[0] for e in embedded]
        x = torch.zeros(len(seqs), max(lengths), self.config.model_dim, dtype=embedded[0].dtype)
        for b, e in enumerate(embedded):
            x[b, : e.shape[0]] = e
        return self.forward(x), lengths

    def loss_on_batch(
        self,
        seqs: Sequence[JointSequence],
        text_weight: float = 0.01,
        speech_weight: float = 1.0,
        include_eos_target: bool = True,
    ) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
        """Dual cross-entropy over a batch of joint sequences.

        Text targets are x1..xT (the reference slot predicts x1); speech
        targets are y1..yS, plus end-of-speech when include_eos_target is
        set. Boundary tokens are never text targets. Cross-entropies are
        evaluated in float64 so the factorization identity checks hold
        tightly.
        """
        hidden, _ = self.forward_sequences(seqs)
        text_rows, text_targets = [], []
        speech_rows, speech_targets = [], []
        for b, seq in enumerate(seqs):
            t, s = len(seq.text_ids), len(seq.code_ids)
            if t:
                text_rows.append(hidden[b, 0:t])
                text_targets.extend(seq.text_ids)
            speech_rows.append(hidden[b, 1 + t : 1 + t + s])
            speech_targets.extend(seq.code_ids)
            if include_eos_target:
                speech_rows.append(hidden[b, 1 + t + s : 2 + t + s])
                speech_targets.append(self.config.eos_token)
        d = self.config.model_dim
        dtype = self.ln_f.weight.dtype
        text_hidden = torch.cat(text_rows) if text_rows else torch.zeros(0, d, dtype=dtype)
        speech_hidden = torch.cat(speech_rows) if speech_rows else torch.zeros(0, d, dtype=dtype)
        return joint_loss(
            self.text_head(text_hidden).double(),
            self.speech_head(speech_hidden).double(),
            torch.tensor(text_targets, dtype=torch.long),
            torch.tensor(speech_targets, dtype=torch.long),
            text_weight=text_weight,
            speech_weight=speech_weight,
        )

    @torch.no_grad()
    @torch.no_grad()
    def code_hidden_states(self, seq: JointSequence) -> torch.Tensor:
        """Teacher-forced hidden states above each code's own input position.

        Matches what generate() hands the waveform decoder, but for known
        code sequences.
        """
        hidden, _ = self.forward_sequences([seq])
        lo, hi = seq.code_span
        return hidden[0, lo:hi]

    def sequence_logprob(self, seq: JointSequence) -> float:
        """log p(text) + log p(codes | text) under the model (no eos term)."""
        hidden, _ = self.forward_sequences([seq])
        t, s = len(seq.text_ids), len(seq.code_ids)
        total = 0.0
        if t:
            logits = self.text_head(hidden[0, 0:t]).double()
            lp = F.log_softmax(logits, dim=-1)
            total += lp[torch.arange(t), torch.tensor(seq.text_ids)].sum().item()
        if s:
            logits = self.speech_head(hidden[0, 1 + t : 1 + t + s]).double()
            lp = F.log_softmax(logits, dim=-1)
            total += lp[torch.arange(s), torch.tensor(seq.code_ids)].sum().item()
        return total

    @torch.no_grad()
    def code_continuation_logprob(
        self, text_ids: Sequence[int], ref_emb, continuation: Sequence[int]
    ) -> float:
        """Sum of log p(continuation_j | prefix) over the speech head.

        Continuation entries may be code ids or boundary tokens, so exhaustive
        enumeration over the full speech vocabulary is possible.
        """
        cfg = self.config
        prefix = build_sequence(
            ref_emb, text_ids, [], code_vocab=cfg.code_vocab, context=cfg.context
        )
        x = self._embed(prefix)[:-1]  # drop the eos input vector
        ids = torch.tensor(list(continuation), dtype=torch.long)
        if len(ids) > 1:
            fed = self.speech_emb(ids[:-1]) + self.code_pos.weight[: len(ids) - 1]
            x = torch.cat([x, fed], dim=0)
        hidden = self.forward(x.unsqueeze(0))[0]
        start = 1 + len(prefix.text_ids)
        logits = self.speech_head(hidden[start : start + len(ids)]).double()
        lp = F.log_softmax(logits, dim=-1)
        return lp[torch.arange(len(ids)), ids].sum().item()

    @torch.no_grad()
    def generate(
        self, text_ids: Sequence[int], ref_emb, sampling: SamplingConfig | None = None
    ) -> GenerationResult:
        """Autoregressive speechcode generation with per-layer KV caches.

        Emits until end-of-speech or max_codes (then truncated=True). Each
        emitted code exposes the hidden state at its own input position for
        the waveform decoder.
        """
        cfg = self.config
        sampling = sampling or SamplingConfig()
        gen = torch.Generator().manual_seed(sampling.seed)
        prefix = build_sequence(
            ref_emb, text_ids, [], code_vocab=cfg.code_vocab, context=cfg.context
        )
        caches: list[dict] = [{} for _ in self.blocks]
        x = self._embed(prefix)[:-1].unsqueeze(0)  # [ref][text][begin]
        hidden = self.forward(x, caches)
        last = hidden[:, -1]
        codes: list[int] = []
        hiddens: list[torch.Tensor] = []
        budget = min(sampling.max_codes, cfg.context - x.shape[1] - 1)
        truncated = True
        while len(codes) < budget:
            logits = self.speech_head(last)[0]
            logits[cfg.begin_token] = float("-inf")  # structural, never emitted
            token = _sample(logits, sampling, gen)
            if token == cfg.eos_token:
                truncated = False
                break
            step = self.speech_emb(torch.tensor([token])) + self.code_pos.weight[len(codes)]
            last = self.forward(step.unsqueeze(0), caches)[:, -1]
            codes.append(token)
            hiddens.append(last[0])
        hidden_states = torch.stack(hiddens) if hiddens else torch.zeros(0, cfg.model_dim)
        return GenerationResult(codes=codes, hidden_states=hidden_states, truncated=truncated)


def _sample(logits: torch.Tensor, sampling: SamplingConfig, gen: torch.Generator) -> int:
    if sampling.temperature == 0:
        return int(logits.argmax())
    if sampling.top_k and sampling.top_k < len(logits):
        kth = logits.topk(sampling.top_k).values[-1]
        logits = logits.masked_fill(logits < kth, float("-inf"))
    probs = F.softmax(logits / sampling.temperature, dim=-1)
    return int(torch.multinomial(probs, 1, generator=gen))


def sequence_logprob(model: SpeechGpt, seq: JointSequence) -> float:
    return model.sequence_logprob(seq)
