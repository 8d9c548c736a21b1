"""Byte-level text tokenization with learned merges.

Any string maps to UTF-8 bytes (ids 0..255); a merge vocabulary trained on
transcripts shortens common byte runs. Reuses the speechcode BPE machinery,
which operates on arbitrary integer alphabets.
"""

from __future__ import annotations

from pathlib import Path

from ..speechcode_bpe import BpeVocab, bpe_decode, bpe_encode, train_bpe

BYTE_ALPHABET = 256


class TextTokenizer:
    def __init__(self, vocab: BpeVocab | None = None):
        self.vocab = vocab or BpeVocab(base_size=BYTE_ALPHABET)

    @property
    def vocab_size(self) -> int:
        return self.vocab.vocab_size

    @classmethod
    def train(cls, texts: list[str], vocab_size: int = 320) -> "TextTokenizer":
        corpus = [list(t.encode("utf-8")) for t in texts]
        return cls(train_bpe(corpus, base_size=BYTE_ALPHABET, target_vocab=vocab_size))

    def encode(self, text: str) -> list[int]:
        return bpe_encode(list(text.encode("utf-8")), self.vocab)

    def decode(self, ids) -> str:
        return bytes(bpe_decode(list(ids), self.vocab)).decode("utf-8", errors="replace")

    def save(self, path: str | Path) -> None:
        self.vocab.save(path)

    @classmethod
    def load(cls, path: str | Path) -> "TextTokenizer":
        return cls(BpeVocab.load(path))
