"""Byte-pair encoding over speechcode streams.

Greedy most-frequent-pair merging shortens code sequences before
autoregressive modeling. Merges never cross utterance boundaries; each
sequence is an independent unit. Pair counting is a per-sequence reduction,
summed in corpus order, so it is deterministic and safe to parallelize.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigurationError, DataError, EmptyInputError

Pair = tuple[int, int]


@dataclass
class BpeVocab:
    """Ordered merge list over a closed base alphabet.

    Merge i maps its pair to token base_size + i, so targets are assigned
    consecutively and every merge only references tokens already defined.
    """

    base_size: int
    merges: list[Pair] = field(default_factory=list)

    @property
    def vocab_size(self) -> int:
        return self.base_size + len(self.merges)

    def __post_init__(self) -> None:
        defined = self.base_size
        for a, b in self.merges:
            if a >= defined or b >= defined or a < 0 or b < 0:
                raise ConfigurationError(f"merge ({a},{b}) references an undefined token")
            defined += 1

    def merge_ranks(self) -> dict[Pair, int]:
        return {pair: i for i, pair in enumerate(self.merges)}

    def save(self, path: str | Path) -> None:
        """Text format: a 'base N' header then one 'a b -> t' line per merge."""
        lines = [f"base {self.base_size}"]
        for i, (a, b) in enumerate(self.merges):
            lines.append(f"{a} {b} -> {self.base_size + i}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "BpeVocab":
        lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("base "):
            raise DataError(f"{path}: missing 'base N' header")
        base_size = int(lines[0].split()[1])
        merges = []
        for i, line in enumerate(lines[1:]):
            left, right = line.split("->")
            a, b = (int(tok) for tok in left.split())
            target = int(right)
            if target != base_size + i:
                raise DataError(f"{path}: merge target {target} out of order at line {i + 2}")
            merges.append((a, b))
        return cls(base_size=base_size, merges=merges)


def _pair_counts(corpus: Iterable[Sequence[int]]) -> Counter:
    counts: Counter = Counter()
    for seq in corpus:
        for pair in zip(seq, seq[1:]):
            counts[pair] += 1
    return counts


def _apply_merge(seq: list[int], pair: Pair, target: int) -> list[int]:
    out: list[int] = []
    i = 0
    while i < len(seq):
        if i + 1 < len(seq) and seq[i] == pair[0] and seq[i + 1] == pair[1]:
            out.append(target)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def train_bpe(corpus: Sequence[Sequence[int]], base_size: int, target_vocab: int) -> BpeVocab:
    """Learn merges greedily until target_vocab or until no pair repeats.

    The most frequent adjacent pair wins each round; frequency ties break
    toward the smallest (a, b) in lexicographic order so vocabularies are
    reproducible.
    """
    if target_vocab < base_size:
        raise ConfigurationError(f"target_vocab {target_vocab} < base_size {base_size}")
    for seq in corpus:
        for code in seq:
            if not 0 <= code < base_size:
                raise DataError(f"code {code} outside base alphabet of size {base_size}")
    work = [list(seq) for seq in corpus]
    merges: list[Pair] = []
    while base_size + len(merges) < target_vocab:
        counts = _pair_counts(work)
        if not counts:
            break
        best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        pair, freq = best
        if freq < 2:
            break
        target = base_size + len(merges)
        merges.append(pair)
        work = [_apply_merge(seq, pair, target) for seq in work]
    return BpeVocab(base_size=base_size, merges=merges)


def bpe_encode(codes: Sequence[int], vocab: BpeVocab) -> list[int]:
    """Apply merges by training rank until none applies."""
    for code in codes:
        if not 0 <= code < vocab.base_size:
            raise DataError(f"code {code} outside base alphabet of size {vocab.base_size}")
    seq = list(codes)
    ranks = vocab.merge_ranks()
    while len(seq) >= 2:
        pairs = set(zip(seq, seq[1:]))
        best = min(pairs, key=lambda p: ranks.get(p, len(ranks)))
        if best not in ranks:
            break
        seq = _apply_merge(seq, best, vocab.base_size + ranks[best])
    return seq


def bpe_decode(tokens: Sequence[int], vocab: BpeVocab) -> list[int]:
    """Expand merged tokens recursively back to base codes."""
    expansions = _expansions(vocab)
    out: list[int] = []
    for tok in tokens:
        if not 0 <= tok < vocab.vocab_size:
            raise DataError(f"token {tok} outside vocabulary of size {vocab.vocab_size}")
        if tok < vocab.base_size:
            out.append(tok)
        else:
            out.extend(expansions[tok])
    return out


def _expansions(vocab: BpeVocab) -> dict[int, list[int]]:
    table: dict[int, list[int]] = {}
    for i, (a, b) in enumerate(vocab.merges):
        tok = vocab.base_size + i
        left = table[a] if a >= vocab.base_size else [a]
        right = table[b] if b >= vocab.base_size else [b]
        table[tok] = left + right
    return table


def token_lengths(vocab: BpeVocab) -> dict[int, int]:
    """Number of base codes each token expands to (1 for base tokens)."""
    lengths = {t: 1 for t in range(vocab.base_size)}
    for i, (a, b) in enumerate(vocab.merges):
        lengths[vocab.base_size + i] = lengths[a] + lengths[b]
    return lengths


def compression_report(corpus: Sequence[Sequence[int]], vocab: BpeVocab) -> dict:
    """Per-sequence and mean length reduction: 1 - encoded/original."""
    if len(corpus) == 0:
        raise EmptyInputError("empty corpus")
    per_sequence = []
    for seq in corpus:
        if len(seq) == 0:
            per_sequence.append(0.0)
            continue
        encoded = bpe_encode(seq, vocab)
        per_sequence.append(1.0 - len(encoded) / len(seq))
    return {
        "mean_ratio": sum(per_sequence) / len(per_sequence),
        "per_sequence": per_sequence,
    }
