"""Vector quantization with a straight-through estimator and EMA codebook."""

from __future__ import annotations

import torch
from torch import nn

from ..errors import ConfigurationError


class Codebook(nn.Module):
    """K learned code vectors maintained by exponential moving averages.

    Entries are not optimized by gradient descent; update() moves them toward
    the mean of their assigned encoder outputs. Entries that stay unassigned
    for reseed_after consecutive updates are re-initialized to random rows of
    the current batch, which keeps the codebook from collapsing onto a few
    active codes.
    """

    def __init__(
        self,
        codebook_size: int,
        dim: int,
        decay: float = 0.99,
        epsilon: float = 1e-5,
        reseed_after: int = 100,
        seed: int = 0,
    ):
        super().__init__()
        if codebook_size < 2:
            raise ConfigurationError(f"codebook size {codebook_size} < 2")
        self.codebook_size = codebook_size
        self.dim = dim
        self.decay = decay
        self.epsilon = epsilon
        self.reseed_after = reseed_after
        gen = torch.Generator().manual_seed(seed)
        entries = torch.randn(codebook_size, dim, generator=gen) * 0.1
        self.register_buffer("entries", entries)
        self.register_buffer("ema_cluster_size", torch.zeros(codebook_size))
        self.register_buffer("ema_embed_sum", entries.clone())
        self.register_buffer("unused_steps", torch.zeros(codebook_size, dtype=torch.long))
        self._gen = gen

    @torch.no_grad()
    def update(self, vectors: torch.Tensor, codes: torch.Tensor) -> None:
        """EMA step over one batch of encoder outputs and their assignments."""
        vectors = vectors.detach().reshape(-1, self.dim)
        codes = codes.detach().reshape(-1)
        onehot = torch.zeros(len(codes), self.codebook_size, dtype=vectors.dtype)
        onehot.scatter_(1, codes.unsqueeze(1), 1.0)
        counts = onehot.sum(dim=0)
        embed_sum = onehot.t() @ vectors
        self.ema_cluster_size.mul_(self.decay).add_(counts, alpha=1 - self.decay)
        self.ema_embed_sum.mul_(self.decay).add_(embed_sum, alpha=1 - self.decay)
        n = self.ema_cluster_size.sum()
        smoothed = (
            (self.ema_cluster_size + self.epsilon)
            / (n + self.codebook_size * self.epsilon)
            * n
        )
        self.entries.copy_(self.ema_embed_sum / smoothed.unsqueeze(1))
        used = counts > 0
        self.unused_steps[used] = 0
        self.unused_steps[~used] += 1
        self._reseed_dead(vectors)

    @torch.no_grad()
    def _reseed_dead(self, vectors: torch.Tensor) -> None:
        dead = self.unused_steps >= self.reseed_after
        n_dead = int(dead.sum())
        if n_dead == 0 or len(vectors) == 0:
            return
        picks = torch.randint(0, len(vectors), (n_dead,), generator=self._gen)
        self.entries[dead] = vectors[picks]
        self.ema_embed_sum[dead] = vectors[picks]
        self.ema_cluster_size[dead] = 1.0
        self.unused_steps[dead] = 0


def vq_quantize(
    vectors: torch.Tensor, cb: Codebook
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Nearest-neighbor assignment with straight-through gradients.

    Returns (codes, quantized, commitment). quantized carries the encoder's
    gradient unchanged; commitment is the mean squared distance between each
    vector and its assigned entry, with the entries treated as constants.
    """
    vectors = torch.as_tensor(vectors)
    if vectors.ndim == 1:
        vectors = vectors.unsqueeze(1)
    if vectors.shape[-1] != cb.dim:
        raise ConfigurationError(
            f"vector dim {vectors.shape[-1]} does not match codebook dim {cb.dim}"
        )
    flat = vectors.reshape(-1, cb.dim)
    entries = cb.entries.to(flat.dtype)
    # assignment in float64: the matmul expansion of ||v - e||^2 loses enough
    # precision in float32 to flip near-ties against a brute-force oracle
    f64, e64 = flat.detach().double(), entries.detach().double()
    dist = (
        f64.pow(2).sum(dim=1, keepdim=True)
        - 2 * f64 @ e64.t()
        + e64.pow(2).sum(dim=1).unsqueeze(0)
    )
    codes = dist.argmin(dim=1)
    chosen = entries[codes]
    quantized = flat + (chosen - flat).detach()
    commitment = (flat - chosen.detach()).pow(2).sum(dim=1).mean()
    return codes.reshape(vectors.shape[:-1]), quantized.reshape(vectors.shape), commitment
