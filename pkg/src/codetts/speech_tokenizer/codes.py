"""Speechcode sequences, speaker embeddings, and the on-disk code format."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, DataError, DataIntegrityError

MAGIC = b"SPCD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHII")  # magic, version, frame_rate, codebook_size, count


def bitrate(frame_rate: float, codebook_size: int) -> float:
    """Bits per second of a codestream: frame_rate * log2(K)."""
    if codebook_size < 2:
        raise ConfigurationError(f"codebook size {codebook_size} < 2 carries no information")
    if frame_rate <= 0:
        raise ConfigurationError(f"frame rate must be positive, got {frame_rate}")
    return frame_rate * math.log2(codebook_size)


@dataclass
class SpeechcodeSequence:
    """Discrete codes for one utterance at a fixed frame rate."""

    codes: np.ndarray
    frame_rate: float
    codebook_size: int

    def __post_init__(self) -> None:
        self.codes = np.asarray(self.codes, dtype=np.int64)
        if self.codes.ndim != 1:
            raise DataError(f"codes must be 1-D, got shape {self.codes.shape}")
        if len(self.codes) and (self.codes.min() < 0 or self.codes.max() >= self.codebook_size):
            raise DataError(
                f"codes outside [0, {self.codebook_size}): "
                f"min {self.codes.min()}, max {self.codes.max()}"
            )

    def __len__(self) -> int:
        return len(self.codes)

    @property
    def duration_s(self) -> float:
        return len(self.codes) / self.frame_rate

    @property
    def bits_per_second(self) -> float:
        return bitrate(self.frame_rate, self.codebook_size)


@dataclass
class SpeakerEmbedding:
    """Fixed-size utterance-level voice vector, unit L2 norm."""

    vector: np.ndarray

    def __post_init__(self) -> None:
        self.vector = np.asarray(self.vector, dtype=np.float32).reshape(-1)

    @property
    def dim(self) -> int:
        return len(self.vector)

    def cosine(self, other: "SpeakerEmbedding") -> float:
        a, b = self.vector, other.vector
        return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def write_speechcodes(seq: SpeechcodeSequence, path: str | Path) -> None:
    """Binary codestream: fixed header then unsigned 16-bit LE codes."""
    if seq.codebook_size > 1 << 16:
        raise DataError(f"codebook size {seq.codebook_size} does not fit 16-bit codes")
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, int(round(seq.frame_rate)), seq.codebook_size, len(seq.codes)
    )
    Path(path).write_bytes(header + seq.codes.astype("<u2").tobytes())


def read_speechcodes(path: str | Path) -> SpeechcodeSequence:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise DataIntegrityError(f"{path}: truncated header")
    magic, version, frame_rate, codebook_size, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DataIntegrityError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DataIntegrityError(f"{path}: unsupported version {version}")
    payload = blob[_HEADER.size:]
    if len(payload) != 2 * count:
        raise DataIntegrityError(f"{path}: expected {2 * count} payload bytes, got {len(payload)}")
    codes = np.frombuffer(payload, dtype="<u2").astype(np.int64)
    if len(codes) and codes.max() >= codebook_size:
        raise DataIntegrityError(f"{path}: code {codes.max()} >= codebook size {codebook_size}")
    return SpeechcodeSequence(codes=codes, frame_rate=float(frame_rate), codebook_size=codebook_size)
