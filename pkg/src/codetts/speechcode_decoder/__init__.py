"""Streaming convolutional decoder from LM hidden states to waveform."""

from .gan import (
    MultiPeriodDiscriminator,
    MultiScaleDiscriminator,
    feature_matching_loss,
    hinge_discriminator_loss,
    hinge_generator_loss,
    torch_logmel,
)
from .generator import (
    DecoderConfig,
    DecoderInput,
    StreamChunk,
    WaveDecoder,
    decode_full,
    decode_stream,
    expand_hidden_states,
)
from .training import (
    CollapseTracker,
    benchmark_synthesis,
    decoder_training_step,
    synthesize_waveform,
    train_decoder,
)

__all__ = [
    "CollapseTracker",
    "DecoderConfig",
    "DecoderInput",
    "MultiPeriodDiscriminator",
    "MultiScaleDiscriminator",
    "StreamChunk",
    "WaveDecoder",
    "benchmark_synthesis",
    "decode_full",
    "decode_stream",
    "decoder_training_step",
    "expand_hidden_states",
    "feature_matching_loss",
    "hinge_discriminator_loss",
    "hinge_generator_loss",
    "synthesize_waveform",
    "torch_logmel",
    "train_decoder",
]
