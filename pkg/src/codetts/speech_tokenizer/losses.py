"""Tokenizer training losses, including the speaker disentanglement terms.

Total loss is recon + alpha*commitment + beta*contrastive + gamma*cosine.
The contrastive term pulls same-speaker embeddings together; the cosine term
is adversarial: content features are pushed, through gradient reversal and a
frozen copy of the speaker extractor, to carry as little speaker identity as
possible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch
import torch.nn.functional as F

from ..errors import ConfigurationError, LossUndefinedError, NumericalError


class _GradReverse(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, lam):
        ctx.lam = lam
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output.neg() * ctx.lam, None


def gradient_reversal(x: torch.Tensor, lam: float = 1.0) -> torch.Tensor:
    """Identity forward; backward multiplies the gradient by -lam."""
    if lam <= 0:
        raise ConfigurationError(f"reversal strength must be positive, got {lam}")
    return _GradReverse.apply(x, lam)


def contrastive_speaker_loss(
    embeddings: torch.Tensor, speaker_ids, temperature: float = 0.1
) -> torch.Tensor:
    """InfoNCE over cosine similarities with in-batch negatives.

    Every ordered same-speaker pair (i, p) contributes
    -log softmax_p(sim(i, .) / temperature) over all j != i; the loss is the
    mean over ordered pairs. Raises if no positive pair exists.
    """
    if temperature <= 0:
        raise ConfigurationError(f"temperature must be positive, got {temperature}")
    if embeddings.ndim != 2 or len(embeddings) < 2:
        raise LossUndefinedError("contrastive loss needs a 2-D batch of at least 2 embeddings")
    uniq: dict = {}
    ids = torch.as_tensor([uniq.setdefault(s, len(uniq)) for s in speaker_ids])
    if len(ids) != len(embeddings):
        raise ConfigurationError("one speaker id per embedding required")
    normed = F.normalize(embeddings, dim=1)
    sim = normed @ normed.t() / temperature
    n = len(embeddings)
    eye = torch.eye(n, dtype=torch.bool)
    same = (ids.unsqueeze(0) == ids.unsqueeze(1)) & ~eye
    if not same.any():
        raise LossUndefinedError("no same-speaker pair in batch")
    # log softmax over each row, excluding self-similarity
    sim = sim.masked_fill(eye, float("-inf"))
    log_prob = sim - torch.logsumexp(sim, dim=1, keepdim=True)
    return -log_prob[same].mean()


def cosine_leakage_loss(
    content_features: torch.Tensor,
    frozen_extractor: Callable[[torch.Tensor], torch.Tensor],
    speaker_embeddings: torch.Tensor,
    lam: float = 1.0,
) -> torch.Tensor:
    """Mean cosine distance between leaked and actual speaker embeddings.

    The extractor sees content features through gradient reversal, so
    minimizing the loss drives the extractor copy toward the speaker while
    the content branch is pushed the opposite way, i.e. toward maximal
    cosine distance. The true embeddings act as constants here.
    """
    leaked = frozen_extractor(gradient_reversal(content_features, lam))
    cos = F.cosine_similarity(leaked, speaker_embeddings.detach(), dim=-1)
    return (1.0 - cos).mean()


@dataclass
class TokenizerLossWeights:
    """Weights of the commitment, contrastive, and cosine terms."""

    alpha: float = 0.25
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be nonnegative")


def combine_loss_components(components: dict, weights: TokenizerLossWeights):
    """recon + alpha*commitment + beta*contrastive + gamma*cosine."""
    return (
        components["recon"]
        + weights.alpha * components["commitment"]
        + weights.beta * components["contrastive"]
        + weights.gamma * components["cosine"]
    )


def tokenizer_loss(
    batch: dict, weights: TokenizerLossWeights
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """Weighted sum recon + a*commitment + b*contrastive + g*cosine.

    batch keys: "target" and "reconstruction" (feature tensors), "commitment"
    (scalar from vq_quantize); for beta > 0 also "embeddings" and
    "speaker_ids"; for gamma > 0 also "content_features" and
    "frozen_extractor". Disabled terms are reported as zeros.
    """
    zero = torch.zeros(())
    recon = (batch["reconstruction"] - batch["target"]).abs().mean()
    commitment = batch["commitment"]
    contrastive = zero
    if weights.beta > 0:
        contrastive = contrastive_speaker_loss(
            batch["embeddings"], batch["speaker_ids"], batch.get("temperature", 0.1)
        )
    cosine = zero
    if weights.gamma > 0:
        cosine = cosine_leakage_loss(
            batch["content_features"],
            batch["frozen_extractor"],
            batch["embeddings"],
            batch.get("reversal_strength", 1.0),
        )
    components = {
        "recon": recon,
        "commitment": commitment,
        "contrastive": contrastive,
        "cosine": cosine,
    }
    for name, value in components.items():
        if not torch.isfinite(value).all():
            raise NumericalError(f"{name} loss is non-finite")
    return combine_loss_components(components, weights), components
