"""Joint sequence layout: [ref][text tokens][begin-speech][codes][end].

The reference slot holds one continuous embedding; text and code spans carry
independent position indices starting at 0. The two boundary tokens
(begin-speech and end-of-speech) are structural and live in the speech
head's vocabulary; they are attached by the model, so a JointSequence stores
only raw text ids and raw code ids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ContextOverflowError, DataError

DEFAULT_CONTEXT = 2048
NUM_BOUNDARY_TOKENS = 2


@dataclass
class TextSequence:
    """Token ids over a text tokenizer vocabulary."""

    ids: tuple[int, ...]
    vocab_size: int

    def __post_init__(self) -> None:
        self.ids = tuple(int(i) for i in self.ids)
        if any(i < 0 or i >= self.vocab_size for i in self.ids):
            raise DataError(f"text ids outside vocabulary of size {self.vocab_size}")

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class JointSequence:
    """One training/inference example in the concatenated layout."""

    ref_embedding: np.ndarray
    text_ids: tuple[int, ...]
    code_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        self.ref_embedding = np.asarray(self.ref_embedding, dtype=np.float32).reshape(-1)
        self.text_ids = tuple(int(i) for i in self.text_ids)
        self.code_ids = tuple(int(i) for i in self.code_ids)

    @property
    def total_length(self) -> int:
        return 1 + len(self.text_ids) + len(self.code_ids) + NUM_BOUNDARY_TOKENS

    @property
    def ref_slot(self) -> int:
        return 0

    @property
    def text_span(self) -> tuple[int, int]:
        return 1, 1 + len(self.text_ids)

    @property
    def code_span(self) -> tuple[int, int]:
        start = 2 + len(self.text_ids)
        return start, start + len(self.code_ids)


def build_sequence(
    ref_emb,
    text: TextSequence | Sequence[int],
    codes: Sequence[int],
    code_vocab: int,
    text_vocab: int | None = None,
    context: int = DEFAULT_CONTEXT,
) -> JointSequence:
    """Validate spans and assemble the joint layout.

    Total length is 1 (ref) + T + S + 2 boundary tokens; anything beyond the
    configured context raises. Empty text is valid (unconditional speech),
    as is empty codes (a pure text prefix).
    """
    if isinstance(text, TextSequence):
        text_ids = text.ids
    else:
        text_ids = tuple(int(i) for i in text)
        if text_vocab is not None and any(i < 0 or i >= text_vocab for i in text_ids):
            raise DataError(f"text ids outside vocabulary of size {text_vocab}")
    code_ids = tuple(int(c) for c in codes)
    if any(c < 0 or c >= code_vocab for c in code_ids):
        raise DataError(f"code ids outside vocabulary of size {code_vocab}")
    vector = ref_emb.vector if hasattr(ref_emb, "vector") else ref_emb
    seq = JointSequence(ref_embedding=vector, text_ids=text_ids, code_ids=code_ids)
    if seq.total_length > context:
        raise ContextOverflowError(
            f"sequence length {seq.total_length} exceeds context {context}"
        )
    return seq
