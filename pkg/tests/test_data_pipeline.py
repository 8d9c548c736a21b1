"""Tests for segmentation, transcript restoration, and manifest handling."""

import itertools
import json
import random

import numpy as np
import pytest

from codetts.audio_core import Waveform
from codetts.data_pipeline import (
    AsrFragment,
    SilenceGap,
    TranscriptSegment,
    WordTiming,
    align_sentences,
    cap_speaker_hours,
    detect_silences,
    fake_asr,
    finalize_segments,
    frame_rms_dbfs,
    levenshtein,
    merge_fragments,
    normalize_for_match,
    normalized_edit_distance,
    read_manifest,
    restore_text,
    segment_recording,
    split_fragment,
    split_sentences,
    write_manifest,
)
from codetts.errors import ConfigurationError, DataError, EmptyInputError

SR = 24000


def tone(duration_s, amplitude=8000, freq=220.0):
    t = np.arange(int(duration_s * SR)) / SR
    return (amplitude * np.sin(2 * np.pi * freq * t)).astype(np.int16)


def silence(duration_s):
    return np.zeros(int(duration_s * SR), dtype=np.int16)


def frag(start, end, text="x", speaker="spk", rec="rec", words=None):
    return AsrFragment(
        text=text, start_s=start, end_s=end, speaker=speaker, recording_id=rec, words=words
    )


class TestEditDistance:
    def test_kitten_sitting_is_three(self):
        assert levenshtein("kitten", "sitting") == 3

    def test_normalized_kitten_sitting(self):
        assert normalized_edit_distance("kitten", "sitting") == pytest.approx(3 / 7)

    def test_identity_and_empty(self):
        assert levenshtein("abc", "abc") == 0
        assert levenshtein("", "abc") == 3
        assert levenshtein("", "") == 0
        assert normalized_edit_distance("", "") == 0.0

    def test_symmetric(self):
        assert levenshtein("flaw", "lawn") == levenshtein("lawn", "flaw") == 2

    def test_works_on_token_lists(self):
        assert levenshtein(["a", "b", "c"], ["a", "c"]) == 1

    def test_single_substitution(self):
        assert levenshtein("cat", "cut") == 1


class TestNormalizeForMatch:
    def test_case_punctuation_whitespace(self):
        assert normalize_for_match("  Hello,   WORLD!! ") == "hello world"

    def test_keeps_apostrophes(self):
        assert normalize_for_match("Don't stop") == "don't stop"


class TestVad:
    def test_frame_levels_distinguish_loud_and_quiet(self):
        wave = Waveform(samples=np.concatenate([tone(0.5), silence(0.5)]))
        levels = frame_rms_dbfs(wave)
        assert levels.shape == (50,)
        assert levels[:25].max() > -20
        assert np.all(levels[25:] == -100.0)

    def test_too_short_for_one_frame(self):
        with pytest.raises(EmptyInputError):
            frame_rms_dbfs(Waveform(samples=np.zeros(100, dtype=np.int16)))

    def test_detects_long_silence_only(self):
        # 0.2 s of silence is below the 0.3 s floor; 0.4 s is reported
        wave = Waveform(
            samples=np.concatenate(
                [tone(1.0), silence(0.2), tone(1.0), silence(0.4), tone(1.0)]
            )
        )
        gaps = detect_silences(wave)
        assert len(gaps) == 1
        assert gaps[0].start_s == pytest.approx(2.2, abs=0.05)
        assert gaps[0].end_s == pytest.approx(2.6, abs=0.05)
        assert gaps[0].mean_rms_dbfs == -100.0

    def test_trailing_silence_counts(self):
        wave = Waveform(samples=np.concatenate([tone(1.0), silence(0.5)]))
        gaps = detect_silences(wave)
        assert len(gaps) == 1
        assert gaps[0].end_s == pytest.approx(1.5, abs=0.05)


def words_every_second(n, start=0.0):
    return [
        WordTiming(word=f"w{i}", start_s=start + i, end_s=start + i + 1.0)
        for i in range(n)
    ]


class TestSplitFragment:
    def test_short_fragment_untouched(self):
        f = frag(0, 10)
        assert split_fragment(f, []) == [f]

    def test_splits_at_quietest_gap(self):
        f = frag(0, 50, text=" ".join(f"w{i}" for i in range(50)), words=words_every_second(50))
        gaps = [
            SilenceGap(start_s=18.0, end_s=18.6, mean_rms_dbfs=-100.0),
            SilenceGap(start_s=35.0, end_s=35.5, mean_rms_dbfs=-90.0),
            SilenceGap(start_s=10.0, end_s=10.4, mean_rms_dbfs=-50.0),
        ]
        pieces = split_fragment(f, gaps)
        assert all(p.duration_s <= 20.0 for p in pieces)
        assert [p.start_s for p in pieces] == [0.0, 18.3, 35.25]
        # transcript survives the cuts in order
        joined = " ".join(p.text for p in pieces)
        assert joined == f.text

    def test_no_gap_means_no_split(self):
        f = frag(0, 50, words=words_every_second(50), text="long")
        assert split_fragment(f, []) == [f]

    def test_text_without_word_timings_cannot_split(self):
        f = frag(0, 50, text="some words", words=None)
        gaps = [SilenceGap(start_s=25.0, end_s=25.4, mean_rms_dbfs=-100.0)]
        assert split_fragment(f, gaps) == [f]

    def test_untexted_fragment_splits_without_words(self):
        f = frag(0, 50, text="", words=None)
        gaps = [SilenceGap(start_s=25.0, end_s=25.4, mean_rms_dbfs=-100.0)]
        pieces = split_fragment(f, gaps)
        assert [p.duration_s for p in pieces] == [25.2, 24.8]

    def test_gap_outside_fragment_ignored(self):
        f = frag(10, 35, words=words_every_second(25, start=10.0), text="t")
        gaps = [SilenceGap(start_s=2.0, end_s=2.5, mean_rms_dbfs=-100.0)]
        assert split_fragment(f, gaps) == [f]

    def test_gap_with_all_words_on_one_side_ignored(self):
        words = [WordTiming("a", 0.0, 1.0), WordTiming("b", 1.0, 2.0)]
        f = frag(0, 30, text="a b", words=words)
        gaps = [SilenceGap(start_s=25.0, end_s=25.5, mean_rms_dbfs=-100.0)]
        assert split_fragment(f, gaps) == [f]


class TestMergeFragments:
    def test_fifteen_thirds_become_thirty_fifteen(self):
        frags = [frag(0, 15), frag(15, 30), frag(30, 45)]
        merged = merge_fragments(frags)
        assert [f.duration_s for f in merged] == [30.0, 15.0]

    def test_never_crosses_speaker_boundary(self):
        frags = [frag(0, 15, speaker="a"), frag(15, 30, speaker="b")]
        assert len(merge_fragments(frags)) == 2

    def test_never_crosses_recording_boundary(self):
        frags = [frag(0, 15, rec="r1"), frag(15, 30, rec="r2")]
        assert len(merge_fragments(frags)) == 2

    def test_merged_text_joins_in_order(self):
        frags = [frag(0, 5, text="hello"), frag(5, 10, text="world")]
        merged = merge_fragments(frags)
        assert len(merged) == 1
        assert merged[0].text == "hello world"

    def test_span_counts_interior_silence(self):
        # 0-15 and 30-45: joined span is 45 s, over the cap, so no merge
        frags = [frag(0, 15), frag(30, 45)]
        assert len(merge_fragments(frags)) == 2

    def test_sorts_before_merging(self):
        frags = [frag(15, 30), frag(0, 15)]
        merged = merge_fragments(frags)
        assert len(merged) == 1
        assert merged[0].start_s == 0.0

    def test_empty_input(self):
        assert merge_fragments([]) == []


class TestSegmentRecording:
    def test_end_to_end_split_and_merge(self):
        # three speech bursts with clear silences between them
        parts = [tone(8.0), silence(0.5), tone(8.0), silence(0.5), tone(8.0)]
        wave = Waveform(samples=np.concatenate(parts))
        total_s = len(wave) / SR
        n_words = 25
        per = total_s / n_words
        words = [
            WordTiming(word=f"w{i}", start_s=i * per, end_s=(i + 1) * per)
            for i in range(n_words)
        ]
        fragment = AsrFragment(
            text=" ".join(w.word for w in words),
            start_s=0.0,
            end_s=total_s,
            speaker="s",
            recording_id="r",
            words=words,
        )
        segments = segment_recording(wave, [fragment])
        assert segments
        assert all(s.duration_s <= 40.0 for s in segments)
        assert " ".join(s.text for s in segments) == fragment.text

    def test_unsplittable_overlong_fragment_dropped(self):
        wave = Waveform(samples=tone(50.0))
        f = frag(0, 50, text="steady tone", words=None)
        assert segment_recording(wave, [f]) == []


class TestRestoreText:
    def test_close_match_restores(self):
        text, prov = restore_text("the quick brown fx", "The quick brown fox.")
        assert text == "The quick brown fox."
        assert prov == "restored"

    def test_distant_text_keeps_asr(self):
        text, prov = restore_text("completely different words", "The quick brown fox.")
        assert text == "completely different words"
        assert prov == "asr"

    def test_distance_boundary_inclusive(self):
        # normalized texts of length 10 with exactly 2 edits: 0.2 passes
        text, prov = restore_text("abcdefghij", "abcdefghxy")
        assert prov == "restored"
        # 3 edits out of 10 fails
        _, prov = restore_text("abcdefghij", "abcdefgxyz")
        assert prov == "asr"

    def test_length_ratio_gate(self):
        short = "abc"
        within = "a" * 9  # ratio exactly 3, allowed but distance fails
        beyond = "a" * 10  # ratio > 3, rejected by the ratio gate
        assert restore_text(short, beyond)[1] == "asr"
        assert restore_text(short, within)[1] == "asr"
        # ratio 3 with tiny distance: pad the short text into the long one
        text, prov = restore_text("ab", "ab" * 3)
        assert prov == "asr"

    def test_identical_after_normalization_restores(self):
        text, prov = restore_text("HELLO WORLD", "hello,   world!")
        assert prov == "restored"
        assert text == "hello,   world!"

    def test_empty_pair_restores(self):
        assert restore_text("", "")[1] == "restored"

    def test_one_sided_empty_keeps_asr(self):
        assert restore_text("some words", "")[1] == "asr"
        assert restore_text("", "some words")[1] == "asr"


class TestAlignSentences:
    def exhaustive_best_cost(self, frags, sents):
        norm_f = [normalize_for_match(f) for f in frags]
        norm_s = [normalize_for_match(s) for s in sents]
        best = float("inf")
        for combo in itertools.combinations_with_replacement(
            range(len(sents)), len(frags)
        ):
            cost = sum(normalized_edit_distance(norm_f[i], norm_s[j]) for i, j in enumerate(combo))
            best = min(best, cost)
        return best

    def test_perfect_match_aligns_identity(self):
        sents = ["the cat sat", "on the mat", "and slept well"]
        result = align_sentences(sents, sents)
        assert result.assignments == [0, 1, 2]
        assert result.total_cost == pytest.approx(0.0)

    def test_matches_exhaustive_oracle(self):
        rng = random.Random(0)
        vocab = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
        for trial in range(25):
            sents = [
                " ".join(rng.choices(vocab, k=rng.randint(1, 4))) for _ in range(4)
            ]
            frags = [
                " ".join(rng.choices(vocab, k=rng.randint(1, 4))) for _ in range(3)
            ]
            result = align_sentences(frags, sents)
            assert result.total_cost == pytest.approx(
                self.exhaustive_best_cost(frags, sents)
            ), f"trial {trial}"
            assert result.assignments == sorted(result.assignments)

    def test_repeated_sentence_allowed(self):
        result = align_sentences(["aaa", "aaa"], ["aaa", "zzz"])
        assert result.assignments == [0, 0]

    def test_empty_inputs_rejected(self):
        with pytest.raises(EmptyInputError):
            align_sentences([], ["a"])
        with pytest.raises(EmptyInputError):
            align_sentences(["a"], [])


class TestFinalizeSegments:
    def test_restoration_with_alignment(self):
        sents = ["The quick brown fox jumps.", "Pack my box with jugs."]
        frags = [
            frag(0, 5, text="the quick brown fx jumps"),
            frag(5, 10, text="pack my box with jugs"),
        ]
        segments = finalize_segments(frags, sents)
        assert [s.provenance for s in segments] == ["restored", "restored"]
        assert segments[0].text == sents[0]
        assert segments[1].text == sents[1]

    def test_no_sources_keeps_asr(self):
        segments = finalize_segments([frag(0, 5, text="hello")])
        assert segments[0].provenance == "asr"
        assert segments[0].text == "hello"

    def test_bad_match_keeps_hypothesis(self):
        segments = finalize_segments(
            [frag(0, 5, text="totally unrelated words here")], ["Nothing in common."]
        )
        assert segments[0].provenance == "asr"


def seg(duration, speaker="s", idx=0):
    return TranscriptSegment(
        text=f"seg {idx}",
        start_s=idx * 100.0,
        end_s=idx * 100.0 + duration,
        speaker=speaker,
        recording_id="r",
    )


class TestCapSpeakerHours:
    def test_under_cap_keeps_everything(self):
        segments = [seg(600, idx=i) for i in range(3)]
        assert cap_speaker_hours(segments, cap_hours=1.0) == segments

    def test_over_cap_trims_to_budget(self):
        segments = [seg(1800, idx=i) for i in range(6)]  # 3 hours total
        kept = cap_speaker_hours(segments, cap_hours=1.0)
        assert sum(s.duration_s for s in kept) <= 3600.0
        assert len(kept) == 2

    def test_survivors_keep_original_order(self):
        segments = [seg(1800, idx=i) for i in range(6)]
        kept = cap_speaker_hours(segments, cap_hours=1.5)
        starts = [s.start_s for s in kept]
        assert starts == sorted(starts)

    def test_deterministic_for_seed(self):
        segments = [seg(1800, idx=i) for i in range(6)]
        a = cap_speaker_hours(segments, cap_hours=1.0, seed=7)
        b = cap_speaker_hours(segments, cap_hours=1.0, seed=7)
        assert a == b

    def test_caps_apply_per_speaker(self):
        segments = [seg(1800, speaker="a", idx=i) for i in range(4)] + [
            seg(600, speaker="b", idx=10)
        ]
        kept = cap_speaker_hours(segments, cap_hours=1.0)
        by_speaker = {}
        for s in kept:
            by_speaker[s.speaker] = by_speaker.get(s.speaker, 0.0) + s.duration_s
        assert by_speaker["a"] <= 3600.0
        assert by_speaker["b"] == 600.0

    def test_invalid_cap(self):
        with pytest.raises(ConfigurationError):
            cap_speaker_hours([], cap_hours=0.0)


class TestManifest:
    def test_round_trip(self, tmp_path):
        segments = [
            TranscriptSegment(
                text="hello there",
                start_s=0.0,
                end_s=3.5,
                speaker="alice",
                recording_id="rec1",
                provenance="restored",
            ),
            TranscriptSegment(
                text="general remark",
                start_s=3.5,
                end_s=9.0,
                speaker="bob",
                recording_id="rec1",
            ),
        ]
        path = tmp_path / "manifest.jsonl"
        write_manifest(segments, path)
        loaded = read_manifest(path)
        assert len(loaded) == 2
        assert loaded[0].text == "hello there"
        assert loaded[0].provenance == "restored"
        assert loaded[1].utterance_id == "rec1-00001"

    def test_lines_are_json_objects(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_manifest([seg(5.0)], path)
        entry = json.loads(path.read_text().splitlines()[0])
        assert set(entry) == {
            "utterance_id",
            "recording_id",
            "speaker",
            "start_s",
            "end_s",
            "text",
            "provenance",
        }

    def test_rejects_invalid_json(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("not json\n")
        with pytest.raises(DataError):
            read_manifest(path)

    def test_rejects_missing_keys(self, tmp_path):
        path = tmp_path / "partial.jsonl"
        path.write_text(json.dumps({"text": "x"}) + "\n")
        with pytest.raises(DataError, match="missing"):
            read_manifest(path)


class TestSplitSentences:
    def test_splits_on_terminal_punctuation(self):
        text = "First one. Second one!  Third?"
        assert split_sentences(text) == ["First one.", "Second one!", "Third?"]

    def test_single_sentence(self):
        assert split_sentences("no terminal punctuation") == ["no terminal punctuation"]


class TestFakeAsr:
    def test_word_timings_partition_duration(self):
        frags = fake_asr("one two three four", 8.0, "s", "r", fragment_s=100.0)
        assert len(frags) == 1
        words = frags[0].words
        assert [w.start_s for w in words] == [0.0, 2.0, 4.0, 6.0]
        assert words[-1].end_s == pytest.approx(8.0)

    def test_fragments_cut_near_target_length(self):
        text = " ".join(f"w{i}" for i in range(60))
        frags = fake_asr(text, 60.0, "s", "r", fragment_s=10.0)
        assert len(frags) == 6
        assert all(f.duration_s == pytest.approx(10.0) for f in frags)

    def test_zero_error_rate_round_trips_text(self):
        text = "the quick brown fox"
        frags = fake_asr(text, 4.0, "s", "r")
        assert " ".join(f.text for f in frags) == text

    def test_full_error_rate_changes_words(self):
        frags = fake_asr("alpha beta gamma delta", 4.0, "s", "r", word_error_rate=1.0)
        assert frags[0].text != "alpha beta gamma delta"

    def test_deterministic(self):
        a = fake_asr("some words here", 3.0, "s", "r", word_error_rate=0.5, seed=4)
        b = fake_asr("some words here", 3.0, "s", "r", word_error_rate=0.5, seed=4)
        assert [f.text for f in a] == [f.text for f in b]

    def test_empty_text_rejected(self):
        with pytest.raises(EmptyInputError):
            fake_asr("   ", 3.0, "s", "r")

    def test_fragment_end_must_follow_start(self):
        with pytest.raises(DataError):
            AsrFragment(text="x", start_s=5.0, end_s=5.0, speaker="s", recording_id="r")
