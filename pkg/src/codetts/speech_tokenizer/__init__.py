"""Discrete speech tokenizers.

Two paths produce speechcode sequences: a mel-domain VQ-VAE at 25 codes/s
with a global reference encoder, and a 50 codes/s tokenizer over features
from a pluggable self-supervised provider, trained with speaker
disentanglement losses.
"""

from .codes import SpeakerEmbedding, SpeechcodeSequence, bitrate, read_speechcodes, write_speechcodes
from .losses import (
    TokenizerLossWeights,
    combine_loss_components,
    contrastive_speaker_loss,
    cosine_leakage_loss,
    gradient_reversal,
    tokenizer_loss,
)
from .models import (
    RandomConvFeatureProvider,
    ReferenceEncoder,
    SpeakerExtractor,
    SslFeatureProvider,
    SslTokenizer,
    SslTokenizerConfig,
    VqVaeConfig,
    VqVaeTokenizer,
    extract_speaker,
)
from .training import train_ssl_tokenizer, train_vqvae
from .vq import Codebook, vq_quantize

__all__ = [
    "Codebook",
    "RandomConvFeatureProvider",
    "ReferenceEncoder",
    "SpeakerEmbedding",
    "SpeakerExtractor",
    "SpeechcodeSequence",
    "SslFeatureProvider",
    "SslTokenizer",
    "SslTokenizerConfig",
    "TokenizerLossWeights",
    "VqVaeConfig",
    "VqVaeTokenizer",
    "bitrate",
    "combine_loss_components",
    "contrastive_speaker_loss",
    "cosine_leakage_loss",
    "extract_speaker",
    "gradient_reversal",
    "read_speechcodes",
    "tokenizer_loss",
    "train_ssl_tokenizer",
    "train_vqvae",
    "vq_quantize",
    "write_speechcodes",
]
