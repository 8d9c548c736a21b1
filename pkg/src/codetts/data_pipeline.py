"""Dataset preparation: segmentation, transcript restoration, and manifests.

Recordings arrive as long audio plus ASR fragments. Preparation splits
anything over 20 s at the quietest silence, merges neighbors back up to a
40 s ceiling (never across speaker or recording boundaries), optionally
swaps ASR hypotheses for matching ground-truth sentences, caps per-speaker
volume, and writes the result as a JSONL manifest.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio_core import INT16_FULL_SCALE, Waveform
from .errors import ConfigurationError, DataError, EmptyInputError

MAX_SPLIT_S = 20.0
MAX_SEGMENT_S = 40.0
SILENCE_THRESHOLD_DBFS = -40.0
MIN_SILENCE_S = 0.3
RESTORE_MAX_LENGTH_RATIO = 3.0
RESTORE_MAX_DISTANCE = 0.2
_SILENCE_FLOOR_DBFS = -100.0


@dataclass
class WordTiming:
    word: str
    start_s: float
    end_s: float

    @property
    def mid_s(self) -> float:
        return 0.5 * (self.start_s + self.end_s)


@dataclass
class AsrFragment:
    """One ASR hypothesis span inside a recording."""

    text: str
    start_s: float
    end_s: float
    speaker: str
    recording_id: str
    words: list[WordTiming] | None = None

    def __post_init__(self) -> None:
        if self.end_s <= self.start_s:
            raise DataError(
                f"fragment end {self.end_s} must be after start {self.start_s}"
            )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass
class TranscriptSegment:
    """A finished training segment; provenance records where the text came from."""

    text: str
    start_s: float
    end_s: float
    speaker: str
    recording_id: str
    provenance: str = "asr"
    utterance_id: str = ""

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def to_dict(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "recording_id": self.recording_id,
            "speaker": self.speaker,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "text": self.text,
            "provenance": self.provenance,
        }


@dataclass
class SilenceGap:
    start_s: float
    end_s: float
    mean_rms_dbfs: float

    @property
    def mid_s(self) -> float:
        return 0.5 * (self.start_s + self.end_s)


def frame_rms_dbfs(waveform: Waveform, frame_ms: int = 20) -> np.ndarray:
    """Per-frame RMS level in dB relative to int16 full scale."""
    samples_per_frame = waveform.sample_rate * frame_ms // 1000
    n = len(waveform) // samples_per_frame
    if n == 0:
        raise EmptyInputError(f"audio shorter than one {frame_ms} ms frame")
    frames = waveform.samples[: n * samples_per_frame].astype(np.float64)
    frames = frames.reshape(n, samples_per_frame) / INT16_FULL_SCALE
    rms = np.sqrt((frames**2).mean(axis=1))
    return np.where(rms > 0, 20.0 * np.log10(np.maximum(rms, 1e-12)), _SILENCE_FLOOR_DBFS)


def detect_silences(
    waveform: Waveform,
    threshold_dbfs: float = SILENCE_THRESHOLD_DBFS,
    min_silence_s: float = MIN_SILENCE_S,
    frame_ms: int = 20,
) -> list[SilenceGap]:
    """Runs of quiet frames lasting at least min_silence_s."""
    levels = frame_rms_dbfs(waveform, frame_ms)
    frame_s = frame_ms / 1000.0
    min_frames = max(1, int(round(min_silence_s / frame_s)))
    quiet = levels < threshold_dbfs
    gaps = []
    run_start = None
    for i, q in enumerate(np.append(quiet, False)):
        if q and run_start is None:
            run_start = i
        elif not q and run_start is not None:
            if i - run_start >= min_frames:
                gaps.append(
                    SilenceGap(
                        start_s=run_start * frame_s,
                        end_s=i * frame_s,
                        mean_rms_dbfs=float(levels[run_start:i].mean()),
                    )
                )
            run_start = None
    return gaps


def _split_words_at(frag: AsrFragment, cut_s: float) -> tuple[AsrFragment, AsrFragment]:
    left_words = [w for w in frag.words or [] if w.mid_s < cut_s]
    right_words = [w for w in frag.words or [] if w.mid_s >= cut_s]
    make = lambda words, a, b: AsrFragment(
        text=" ".join(w.word for w in words),
        start_s=a,
        end_s=b,
        speaker=frag.speaker,
        recording_id=frag.recording_id,
        words=words,
    )
    return make(left_words, frag.start_s, cut_s), make(right_words, cut_s, frag.end_s)


def split_fragment(
    frag: AsrFragment, gaps: Sequence[SilenceGap], max_duration_s: float = MAX_SPLIT_S
) -> list[AsrFragment]:
    """Recursively cut an over-long fragment at its quietest internal silence.

    Fragments carrying text need word timings so the transcript can follow
    the cut; a fragment with no usable cut point comes back unchanged.
    """
    if frag.duration_s <= max_duration_s:
        return [frag]
    if frag.text and not frag.words:
        return [frag]
    candidates = []
    for gap in gaps:
        cut = gap.mid_s
        if not frag.start_s < cut < frag.end_s:
            continue
        if frag.words:
            left = sum(1 for w in frag.words if w.mid_s < cut)
            if left == 0 or left == len(frag.words):
                continue
        candidates.append(gap)
    if not candidates:
        return [frag]
    best = min(candidates, key=lambda g: (g.mean_rms_dbfs, g.mid_s))
    left, right = _split_words_at(frag, best.mid_s)
    return split_fragment(left, gaps, max_duration_s) + split_fragment(
        right, gaps, max_duration_s
    )


def merge_fragments(
    fragments: Sequence[AsrFragment], max_duration_s: float = MAX_SEGMENT_S
) -> list[AsrFragment]:
    """Greedy left-to-right merge of neighbors while the joined span fits.

    Never joins across a speaker change or a recording boundary, so three
    15 s fragments become 30 s + 15 s under the default 40 s ceiling.
    """
    ordered = sorted(fragments, key=lambda f: (f.recording_id, f.start_s))
    merged: list[AsrFragment] = []
    for frag in ordered:
        if merged:
            prev = merged[-1]
            fits = frag.end_s - prev.start_s <= max_duration_s
            same_source = (
                frag.recording_id == prev.recording_id and frag.speaker == prev.speaker
            )
            if fits and same_source:
                words = None
                if prev.words is not None and frag.words is not None:
                    words = prev.words + frag.words
                merged[-1] = AsrFragment(
                    text=" ".join(t for t in (prev.text, frag.text) if t),
                    start_s=prev.start_s,
                    end_s=frag.end_s,
                    speaker=prev.speaker,
                    recording_id=prev.recording_id,
                    words=words,
                )
                continue
        merged.append(frag)
    return merged


def segment_recording(
    waveform: Waveform,
    fragments: Sequence[AsrFragment],
    max_split_s: float = MAX_SPLIT_S,
    max_segment_s: float = MAX_SEGMENT_S,
    threshold_dbfs: float = SILENCE_THRESHOLD_DBFS,
    min_silence_s: float = MIN_SILENCE_S,
) -> list[AsrFragment]:
    """Split-then-merge for one recording; drops anything still too long."""
    gaps = detect_silences(waveform, threshold_dbfs, min_silence_s)
    pieces: list[AsrFragment] = []
    for frag in fragments:
        pieces.extend(split_fragment(frag, gaps, max_split_s))
    merged = merge_fragments(pieces, max_segment_s)
    return [f for f in merged if f.duration_s <= max_segment_s]


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Edit distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def normalized_edit_distance(a: Sequence, b: Sequence) -> float:
    """levenshtein / max length, in [0, 1]; two empties are distance 0."""
    longest = max(len(a), len(b))
    return levenshtein(a, b) / longest if longest else 0.0


def normalize_for_match(text: str) -> str:
    """Lowercase, drop punctuation, collapse whitespace."""
    cleaned = re.sub(r"[^\w\s']", " ", text.lower())
    return " ".join(cleaned.split())


def restore_text(
    asr_text: str,
    source_text: str,
    max_length_ratio: float = RESTORE_MAX_LENGTH_RATIO,
    max_distance: float = RESTORE_MAX_DISTANCE,
) -> tuple[str, str]:
    """Swap in ground-truth text when it plausibly matches the hypothesis.

    The swap happens only when normalized lengths are within the ratio gate
    and the normalized edit distance is at or under the distance gate.
    Returns (text, provenance) where provenance is "restored" or "asr".
    """
    a = normalize_for_match(asr_text)
    b = normalize_for_match(source_text)
    if a or b:
        shorter, longer = min(len(a), len(b)), max(len(a), len(b))
        if shorter == 0 or longer / shorter > max_length_ratio:
            return asr_text, "asr"
    if normalized_edit_distance(a, b) <= max_distance:
        return source_text, "restored"
    return asr_text, "asr"


@dataclass
class AlignmentResult:
    assignments: list[int]
    total_cost: float


def align_sentences(
    fragment_texts: Sequence[str], sentences: Sequence[str]
) -> AlignmentResult:
    """Monotone assignment of each fragment to one source sentence.

    Minimizes the summed normalized edit distance subject to assignments
    being non-decreasing in sentence order (fragments arrive in reading
    order). Ties resolve toward earlier sentences.
    """
    if not fragment_texts or not sentences:
        raise EmptyInputError("need at least one fragment and one sentence")
    norm_frags = [normalize_for_match(t) for t in fragment_texts]
    norm_sents = [normalize_for_match(s) for s in sentences]
    cost = [[normalized_edit_distance(f, s) for s in norm_sents] for f in norm_frags]
    m, n = len(norm_frags), len(norm_sents)
    dp = [cost[0][:]]
    for i in range(1, m):
        best = np.minimum.accumulate(dp[-1])
        dp.append([cost[i][j] + best[j] for j in range(n)])
    assignments = [0] * m
    j = int(np.argmin(dp[-1]))
    assignments[-1] = j
    for i in range(m - 2, -1, -1):
        j = int(np.argmin(dp[i][: j + 1]))
        assignments[i] = j
    return AlignmentResult(assignments=assignments, total_cost=float(min(dp[-1])))


def finalize_segments(
    fragments: Sequence[AsrFragment], source_sentences: Sequence[str] | None = None
) -> list[TranscriptSegment]:
    """Turn merged fragments into transcript segments, restoring text when possible."""
    candidates: list[str | None] = [None] * len(fragments)
    if source_sentences and fragments:
        result = align_sentences([f.text for f in fragments], source_sentences)
        candidates = [source_sentences[j] for j in result.assignments]
    segments = []
    for frag, cand in zip(fragments, candidates):
        if cand is None:
            text, provenance = frag.text, "asr"
        else:
            text, provenance = restore_text(frag.text, cand)
        segments.append(
            TranscriptSegment(
                text=text,
                start_s=frag.start_s,
                end_s=frag.end_s,
                speaker=frag.speaker,
                recording_id=frag.recording_id,
                provenance=provenance,
            )
        )
    return segments


def cap_speaker_hours(
    segments: Sequence[TranscriptSegment], cap_hours: float, seed: int = 0
) -> list[TranscriptSegment]:
    """Limit any one speaker's total audio, keeping a seeded random subset.

    Selection shuffles each speaker's segments with a speaker-specific seed
    and keeps clips greedily while they fit under the cap; the survivors
    come back in their original order.
    """
    if cap_hours <= 0:
        raise ConfigurationError(f"cap_hours must be positive, got {cap_hours}")
    cap_s = cap_hours * 3600.0
    by_speaker: dict[str, list[int]] = {}
    for i, seg in enumerate(segments):
        by_speaker.setdefault(seg.speaker, []).append(i)
    keep: set[int] = set()
    for speaker, idxs in by_speaker.items():
        total = sum(segments[i].duration_s for i in idxs)
        if total <= cap_s:
            keep.update(idxs)
            continue
        shuffled = list(idxs)
        random.Random(f"{seed}:{speaker}").shuffle(shuffled)
        budget = 0.0
        for i in shuffled:
            if budget + segments[i].duration_s <= cap_s:
                keep.add(i)
                budget += segments[i].duration_s
    return [segments[i] for i in sorted(keep)]


_MANIFEST_KEYS = (
    "utterance_id",
    "recording_id",
    "speaker",
    "start_s",
    "end_s",
    "text",
    "provenance",
)


def write_manifest(segments: Sequence[TranscriptSegment], path: str | Path) -> None:
    """One JSON object per line; blank utterance ids get sequential ones."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for i, seg in enumerate(segments):
            if not seg.utterance_id:
                seg = replace(seg, utterance_id=f"{seg.recording_id}-{i:05d}")
            fh.write(json.dumps(seg.to_dict(), ensure_ascii=False) + "\n")


def read_manifest(path: str | Path) -> list[TranscriptSegment]:
    segments = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"manifest line {lineno} is not valid JSON: {exc}") from exc
            missing = [k for k in _MANIFEST_KEYS if k not in entry]
            if missing:
                raise DataError(f"manifest line {lineno} is missing {missing}")
            segments.append(
                TranscriptSegment(
                    text=entry["text"],
                    start_s=float(entry["start_s"]),
                    end_s=float(entry["end_s"]),
                    speaker=entry["speaker"],
                    recording_id=entry["recording_id"],
                    provenance=entry["provenance"],
                    utterance_id=entry["utterance_id"],
                )
            )
    return segments


def split_sentences(text: str) -> list[str]:
    """Crude sentence splitter on terminal punctuation; good enough for prep."""
    parts = re.split(r"(?<=[.!?])\s+", text.strip())
    return [p for p in parts if p]


def _scramble(word: str, rng: random.Random) -> str:
    if len(word) < 2:
        return chr(ord("a") + rng.randrange(26))
    letters = list(word)
    rng.shuffle(letters)
    scrambled = "".join(letters)
    return scrambled if scrambled != word else word[::-1]


def fake_asr(
    text: str,
    total_duration_s: float,
    speaker: str,
    recording_id: str,
    fragment_s: float = 10.0,
    word_error_rate: float = 0.0,
    seed: int = 0,
) -> list[AsrFragment]:
    """Deterministic stand-in for an ASR system, for fixtures and tests.

    Words get uniform timings across the duration and stream into fragments
    of roughly fragment_s; word_error_rate scrambles that share of words.
    """
    tokens = text.split()
    if not tokens:
        raise EmptyInputError("cannot fabricate ASR output for empty text")
    if total_duration_s <= 0:
        raise ConfigurationError("total_duration_s must be positive")
    rng = random.Random(f"{seed}:{recording_id}")
    per_word = total_duration_s / len(tokens)
    fragments = []
    bucket: list[WordTiming] = []
    for i, token in enumerate(tokens):
        word = _scramble(token, rng) if rng.random() < word_error_rate else token
        bucket.append(WordTiming(word=word, start_s=i * per_word, end_s=(i + 1) * per_word))
        full = bucket[-1].end_s - bucket[0].start_s >= fragment_s
        if full or i == len(tokens) - 1:
            fragments.append(
                AsrFragment(
                    text=" ".join(w.word for w in bucket),
                    start_s=bucket[0].start_s,
                    end_s=bucket[-1].end_s,
                    speaker=speaker,
                    recording_id=recording_id,
                    words=bucket,
                )
            )
            bucket = []
    return fragments
