"""Evaluation: WER, speaker similarity, MUSHRA aggregation, expert rubric."""

from .emergent import (
    CATEGORIES,
    HIGH_SCORE_THRESHOLD,
    LOW_SCORE_THRESHOLD,
    SENTENCES_PER_CATEGORY,
    EmergentRating,
    EmergentReport,
    emergent_report,
    load_emergent_testset,
    plot_emergent_report,
    read_ratings,
)
from .listening import MushraResult, SignificanceResult, mushra_aggregate, significance
from .metrics import normalize_text, speaker_sim, wer

__all__ = [
    "CATEGORIES",
    "HIGH_SCORE_THRESHOLD",
    "LOW_SCORE_THRESHOLD",
    "SENTENCES_PER_CATEGORY",
    "EmergentRating",
    "EmergentReport",
    "MushraResult",
    "SignificanceResult",
    "emergent_report",
    "load_emergent_testset",
    "mushra_aggregate",
    "normalize_text",
    "plot_emergent_report",
    "read_ratings",
    "significance",
    "speaker_sim",
    "wer",
]
