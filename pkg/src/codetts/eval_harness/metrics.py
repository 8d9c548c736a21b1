"""Objective metrics: word error rate and speaker similarity."""

from __future__ import annotations

import re
from typing import Sequence

import numpy as np

from ..data_pipeline import levenshtein
from ..errors import UndefinedMetricError


def normalize_text(text: str) -> list[str]:
    """Lowercase, drop punctuation, collapse whitespace; returns words."""
    return re.sub(r"[^\w\s]", "", text.lower()).split()


def _as_words(value: str | Sequence[str]) -> list[str]:
    if isinstance(value, str):
        return normalize_text(value)
    return list(value)


def wer(reference: str | Sequence[str], hypothesis: str | Sequence[str]) -> float:
    """Word error rate as a percentage of the reference length.

    Counts substitutions, insertions, and deletions from the minimum-cost
    word alignment; strings are normalized first, token lists are taken
    as-is. An empty reference leaves the metric undefined.
    """
    ref = _as_words(reference)
    hyp = _as_words(hypothesis)
    if not ref:
        raise UndefinedMetricError("WER needs a nonempty reference")
    return 100.0 * levenshtein(ref, hyp) / len(ref)


def speaker_sim(a, b) -> float:
    """Cosine similarity between two speaker embeddings, scaled to [−100, 100]."""
    va = np.asarray(getattr(a, "vector", a), dtype=np.float64).reshape(-1)
    vb = np.asarray(getattr(b, "vector", b), dtype=np.float64).reshape(-1)
    if va.shape != vb.shape:
        raise UndefinedMetricError(f"embedding dims differ: {va.shape} vs {vb.shape}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise UndefinedMetricError("cosine similarity is undefined for a zero vector")
    return float(100.0 * (va @ vb) / (na * nb))
