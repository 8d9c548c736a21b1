"""The shipped emergent-abilities testset and expert-rating reports.

Seven categories of hand-written sentences probe abilities that only show
up with scale: questions, emotions, compound nouns, syntactic complexity,
foreign words, paralinguistics, and punctuation. Experts score each
rendering 1-3; the report aggregates per-category means per system.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from ..errors import CompletenessError, DataError, DataIntegrityError

CATEGORIES = (
    "Questions",
    "Emotions",
    "Compound Nouns",
    "Syntactic Complexities",
    "Foreign Words",
    "Paralinguistics",
    "Punctuations",
)
SENTENCES_PER_CATEGORY = 20
# low bar: model shows no ability; high bar: ability clearly present
LOW_SCORE_THRESHOLD = 1.25
HIGH_SCORE_THRESHOLD = 1.75

_TESTSET_FILE = "emergent_testset.json"
_TESTSET_SHA256 = "d3f627ea391e51c457bf8cc56b32947e14dd13c8dd3b9dd296dfdcd7520a3ded"


def load_emergent_testset() -> dict[str, list[str]]:
    """The frozen 7 x 20 sentence testset, keyed by category.

    The shipped file is checksummed; any corruption or edit raises
    DataIntegrityError rather than silently changing the benchmark.
    """
    payload = (resources.files(__package__) / "data" / _TESTSET_FILE).read_bytes()
    digest = hashlib.sha256(payload).hexdigest()
    if digest != _TESTSET_SHA256:
        raise DataIntegrityError(
            f"testset checksum mismatch: expected {_TESTSET_SHA256[:12]}…, got {digest[:12]}…"
        )
    data = json.loads(payload.decode("utf-8"))
    if tuple(data) != CATEGORIES or any(
        len(v) != SENTENCES_PER_CATEGORY for v in data.values()
    ):
        raise DataIntegrityError("testset does not hold 7 categories x 20 sentences")
    return data


@dataclass
class EmergentRating:
    """One expert judgment of one rendered sentence on the 1-3 scale."""

    system: str
    category: str
    sentence_id: int
    score: int

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise DataError(f"unknown category: {self.category!r}")
        if not 1 <= self.sentence_id <= SENTENCES_PER_CATEGORY:
            raise DataError(f"sentence_id {self.sentence_id} outside 1..20")
        if self.score not in (1, 2, 3):
            raise DataError(f"score {self.score} outside the 1-3 scale")


def read_ratings(path: str | Path) -> list[EmergentRating]:
    """Line-delimited JSON ratings: {system, category, sentence_id, score}."""
    ratings = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                ratings.append(
                    EmergentRating(
                        system=entry["system"],
                        category=entry["category"],
                        sentence_id=int(entry["sentence_id"]),
                        score=int(entry["score"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"bad rating on line {lineno}: {exc}") from exc
    return ratings


@dataclass
class EmergentReport:
    systems: list[str]
    means: dict[tuple[str, str], float]  # (system, category) -> mean score
    low_threshold: float = LOW_SCORE_THRESHOLD
    high_threshold: float = HIGH_SCORE_THRESHOLD

    def mean(self, system: str, category: str) -> float:
        return self.means[(system, category)]

    def as_table(self) -> str:
        width = max(len(c) for c in CATEGORIES)
        header = " " * (width + 2) + "  ".join(f"{s:>12}" for s in self.systems)
        rows = [header]
        for cat in CATEGORIES:
            cells = "  ".join(f"{self.means[(s, cat)]:>12.2f}" for s in self.systems)
            rows.append(f"{cat:<{width}}  {cells}")
        return "\n".join(rows)


def emergent_report(
    ratings: Sequence[EmergentRating], systems: Sequence[str] | None = None
) -> EmergentReport:
    """Per-category mean expert score for each system.

    Every (system, category) pair must cover all 20 sentences exactly once;
    anything missing or duplicated is reported rather than averaged over.
    """
    if systems is None:
        seen: dict[str, None] = {}
        for r in ratings:
            seen.setdefault(r.system, None)
        systems = list(seen)
    if not systems:
        raise CompletenessError("no ratings and no systems given")
    scores: dict[tuple[str, str], dict[int, int]] = {}
    for r in ratings:
        if r.system not in systems:
            continue
        cell = scores.setdefault((r.system, r.category), {})
        if r.sentence_id in cell:
            raise DataError(
                f"duplicate rating: {r.system} / {r.category} sentence {r.sentence_id}"
            )
        cell[r.sentence_id] = r.score
    gaps = []
    for system in systems:
        for cat in CATEGORIES:
            have = scores.get((system, cat), {})
            missing = sorted(set(range(1, SENTENCES_PER_CATEGORY + 1)) - set(have))
            if missing:
                gaps.append(f"{system} / {cat}: missing sentences {missing}")
    if gaps:
        raise CompletenessError("incomplete ratings:\n" + "\n".join(gaps))
    means = {
        key: sum(cell.values()) / SENTENCES_PER_CATEGORY for key, cell in scores.items()
    }
    return EmergentReport(systems=list(systems), means=means)


def plot_emergent_report(report: EmergentReport, path: str | Path) -> None:
    """Grouped per-category bars with the 1.25/1.75 ability thresholds marked."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = range(len(CATEGORIES))
    width = 0.8 / max(1, len(report.systems))
    fig, ax = plt.subplots(figsize=(11, 5))
    for i, system in enumerate(report.systems):
        offsets = [xi + (i - (len(report.systems) - 1) / 2) * width for xi in x]
        values = [report.means[(system, cat)] for cat in CATEGORIES]
        ax.bar(offsets, values, width=width, label=system)
    ax.axhline(report.low_threshold, color="gray", linestyle=":", linewidth=1)
    ax.axhline(report.high_threshold, color="gray", linestyle="--", linewidth=1)
    ax.set_xticks(list(x))
    ax.set_xticklabels(CATEGORIES, rotation=20, ha="right")
    ax.set_ylim(1.0, 3.0)
    ax.set_ylabel("mean expert score")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
