"""Tests for metrics, listening-test aggregation, and the expert rubric."""

import json
import random

import numpy as np
import pytest

from codetts.errors import (
    CompletenessError,
    DataError,
    DataIntegrityError,
    UndefinedMetricError,
)
from codetts.eval_harness import (
    CATEGORIES,
    EmergentRating,
    emergent_report,
    load_emergent_testset,
    mushra_aggregate,
    normalize_text,
    plot_emergent_report,
    read_ratings,
    significance,
    speaker_sim,
    wer,
)
from codetts.speech_tokenizer import SpeakerEmbedding


def brute_force_wer(ref, hyp):
    """Exponential-time minimum edit distance, for cross-checking."""

    def dist(i, j):
        if i == len(ref):
            return len(hyp) - j
        if j == len(hyp):
            return len(ref) - i
        return min(
            dist(i + 1, j + 1) + (ref[i] != hyp[j]),
            dist(i + 1, j) + 1,
            dist(i, j + 1) + 1,
        )

    return 100.0 * dist(0, 0) / len(ref)


class TestWer:
    def test_identical_is_zero(self):
        assert wer("the cat sat", "the cat sat") == 0.0

    def test_single_deletion(self):
        assert wer("the cat sat", "the cat") == pytest.approx(100.0 / 3)

    def test_single_insertion(self):
        assert wer("the cat", "the black cat") == pytest.approx(50.0)

    def test_substitution_and_case_normalization(self):
        assert wer("The CAT sat.", "the bat sat") == pytest.approx(100.0 / 3)

    def test_punctuation_stripped_for_strings(self):
        assert wer("hello, world!", "hello world") == 0.0

    def test_token_lists_taken_verbatim(self):
        assert wer(["Hello"], ["hello"]) == pytest.approx(100.0)

    def test_can_exceed_hundred(self):
        assert wer("word", "three extra words here") == pytest.approx(400.0)

    def test_empty_reference_undefined(self):
        with pytest.raises(UndefinedMetricError):
            wer("", "something")

    def test_empty_hypothesis_is_all_deletions(self):
        assert wer("a b c d", []) == pytest.approx(100.0)

    def test_matches_exhaustive_alignment_oracle(self):
        rng = random.Random(3)
        vocab = ["a", "b", "c", "d"]
        for _ in range(40):
            ref = rng.choices(vocab, k=rng.randint(1, 8))
            hyp = rng.choices(vocab, k=rng.randint(0, 8))
            assert wer(ref, hyp) == pytest.approx(brute_force_wer(ref, hyp))


class TestNormalizeText:
    def test_strips_and_lowers(self):
        assert normalize_text("Hello,   World!") == ["hello", "world"]

    def test_apostrophes_removed(self):
        assert normalize_text("don't") == ["dont"]


class TestSpeakerSim:
    def test_identical_embeddings(self):
        e = SpeakerEmbedding(vector=np.array([0.6, 0.8], dtype=np.float32))
        assert speaker_sim(e, e) == pytest.approx(100.0)

    def test_orthogonal(self):
        a = np.array([1.0, 0.0])
        b = np.array([0.0, 1.0])
        assert speaker_sim(a, b) == pytest.approx(0.0)

    def test_sixty_degrees_is_fifty(self):
        a = np.array([1.0, 0.0])
        b = np.array([0.5, np.sqrt(3) / 2])
        assert speaker_sim(a, b) == pytest.approx(50.0)

    def test_scale_invariant(self):
        a = np.array([1.0, 2.0, 3.0])
        assert speaker_sim(a, 10.0 * a) == pytest.approx(100.0)

    def test_zero_vector_undefined(self):
        with pytest.raises(UndefinedMetricError):
            speaker_sim(np.zeros(4), np.ones(4))

    def test_dim_mismatch(self):
        with pytest.raises(UndefinedMetricError):
            speaker_sim(np.ones(3), np.ones(4))


class TestMushra:
    def test_textbook_example(self):
        result = mushra_aggregate([60, 70, 80])
        assert result.mean == pytest.approx(70.0)
        assert result.ci95_halfwidth == pytest.approx(24.84, abs=0.01)

    def test_zero_variance(self):
        result = mushra_aggregate([70, 70, 70, 70])
        assert result.mean == 70.0
        assert result.ci95_halfwidth == 0.0

    def test_mean_is_permutation_invariant(self):
        scores = [10.0, 55.0, 80.0, 95.0, 40.0]
        a = mushra_aggregate(scores)
        b = mushra_aggregate(list(reversed(scores)))
        assert a.mean == b.mean
        assert a.ci95_halfwidth == b.ci95_halfwidth

    def test_needs_two_scores(self):
        with pytest.raises(UndefinedMetricError):
            mushra_aggregate([70])

    def test_range_validation(self):
        with pytest.raises(DataError):
            mushra_aggregate([50, 101])

    def test_interval_shrinks_with_more_raters(self):
        few = mushra_aggregate([60, 70, 80])
        many = mushra_aggregate([60, 70, 80] * 10)
        assert many.ci95_halfwidth < few.ci95_halfwidth


def permutation_p(a, b, draws=4000, seed=0):
    rng = np.random.default_rng(seed)
    pooled = np.concatenate([a, b])
    observed = abs(np.mean(a) - np.mean(b))
    count = 0
    for _ in range(draws):
        perm = rng.permutation(pooled)
        diff = abs(perm[: len(a)].mean() - perm[len(a) :].mean())
        if diff >= observed - 1e-12:
            count += 1
    return count / draws


class TestSignificance:
    def test_identical_constant_samples(self):
        result = significance([70, 70, 70], [70, 70, 70])
        assert result.p_value == 1.0
        assert not result.significant

    def test_constant_but_different_samples(self):
        result = significance([70, 70, 70], [30, 30, 30])
        assert result.p_value == 0.0
        assert result.significant

    def test_clear_separation_is_significant(self):
        rng = np.random.default_rng(0)
        a = 1.0 + rng.normal(0, 0.01, size=8)
        b = 9.0 + rng.normal(0, 0.01, size=8)
        assert significance(a, b).significant

    def test_same_distribution_usually_not_significant(self):
        rng = np.random.default_rng(1)
        a = 50 + rng.normal(0, 5, size=12)
        b = 50 + rng.normal(0, 5, size=12)
        assert not significance(a, b).significant

    def test_symmetric(self):
        a = [61.0, 70.0, 77.0, 65.0]
        b = [70.0, 72.0, 80.0, 84.0]
        assert significance(a, b).p_value == significance(b, a).p_value

    def test_needs_two_per_side(self):
        with pytest.raises(UndefinedMetricError):
            significance([70], [60, 65])

    def test_agrees_with_permutation_oracle(self):
        rng = np.random.default_rng(42)
        for trial in range(10):
            effect = 0.0 if trial % 2 == 0 else 3.0
            a = rng.normal(50, 1.0, size=10)
            b = rng.normal(50 + effect, 1.0, size=10)
            welch = significance(a, b)
            perm = permutation_p(a, b, seed=trial)
            assert welch.significant == (perm < 0.05), (
                f"trial {trial}: welch p={welch.p_value:.4f}, perm p={perm:.4f}"
            )


class TestEmergentTestset:
    def test_loads_seven_by_twenty(self):
        data = load_emergent_testset()
        assert tuple(data) == CATEGORIES
        assert all(len(v) == 20 for v in data.values())
        assert sum(len(v) for v in data.values()) == 140

    def test_known_sentences_present(self):
        data = load_emergent_testset()
        assert "Brexit question remains" in data["Questions"][11]
        assert "Shh" in data["Paralinguistics"][3]
        assert "#familymatters" in data["Punctuations"][13]

    def test_sentences_are_nonempty_strings(self):
        data = load_emergent_testset()
        assert all(isinstance(s, str) and s.strip() for v in data.values() for s in v)

    def test_checksum_guard(self, monkeypatch):
        import codetts.eval_harness.emergent as module

        monkeypatch.setattr(module, "_TESTSET_SHA256", "0" * 64)
        with pytest.raises(DataIntegrityError, match="checksum"):
            load_emergent_testset()


class TestEmergentRating:
    def test_valid(self):
        r = EmergentRating(system="sys", category="Questions", sentence_id=1, score=3)
        assert r.score == 3

    def test_unknown_category(self):
        with pytest.raises(DataError):
            EmergentRating(system="s", category="Rhetoric", sentence_id=1, score=2)

    def test_sentence_id_bounds(self):
        with pytest.raises(DataError):
            EmergentRating(system="s", category="Questions", sentence_id=21, score=2)

    def test_score_scale(self):
        with pytest.raises(DataError):
            EmergentRating(system="s", category="Questions", sentence_id=1, score=4)


def full_ratings(system, score_fn):
    return [
        EmergentRating(system=system, category=cat, sentence_id=i, score=score_fn(cat, i))
        for cat in CATEGORIES
        for i in range(1, 21)
    ]


class TestEmergentReport:
    def test_ceiling(self):
        report = emergent_report(full_ratings("big", lambda c, i: 3))
        assert all(report.mean("big", c) == 3.0 for c in CATEGORIES)

    def test_half_ones_half_twos(self):
        report = emergent_report(full_ratings("mid", lambda c, i: 1 if i <= 10 else 2))
        assert all(report.mean("mid", c) == 1.5 for c in CATEGORIES)

    def test_means_stay_on_scale(self):
        rng = random.Random(0)
        report = emergent_report(full_ratings("any", lambda c, i: rng.randint(1, 3)))
        assert all(1.0 <= v <= 3.0 for v in report.means.values())

    def test_missing_sentence_lists_gap(self):
        ratings = full_ratings("sys", lambda c, i: 2)
        removed = ratings.pop(25)
        with pytest.raises(CompletenessError) as err:
            emergent_report(ratings)
        assert removed.category in str(err.value)
        assert str(removed.sentence_id) in str(err.value)

    def test_duplicate_rating_rejected(self):
        ratings = full_ratings("sys", lambda c, i: 2)
        ratings.append(ratings[0])
        with pytest.raises(DataError, match="duplicate"):
            emergent_report(ratings)

    def test_multiple_systems(self):
        ratings = full_ratings("a", lambda c, i: 1) + full_ratings("b", lambda c, i: 3)
        report = emergent_report(ratings)
        assert report.systems == ["a", "b"]
        assert report.mean("a", "Emotions") == 1.0
        assert report.mean("b", "Emotions") == 3.0

    def test_table_renders_all_categories(self):
        report = emergent_report(full_ratings("sys", lambda c, i: 2))
        table = report.as_table()
        assert all(cat in table for cat in CATEGORIES)
        assert "2.00" in table

    def test_thresholds_exposed(self):
        report = emergent_report(full_ratings("sys", lambda c, i: 2))
        assert report.low_threshold == 1.25
        assert report.high_threshold == 1.75


class TestRatingsIO:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "ratings.jsonl"
        rows = [
            {"system": "sys", "category": "Questions", "sentence_id": 1, "score": 2},
            {"system": "sys", "category": "Emotions", "sentence_id": 5, "score": 3},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        ratings = read_ratings(path)
        assert len(ratings) == 2
        assert ratings[1].category == "Emotions"

    def test_bad_line_reports_position(self, tmp_path):
        path = tmp_path / "ratings.jsonl"
        path.write_text('{"system": "s"}\n')
        with pytest.raises(DataError, match="line 1"):
            read_ratings(path)


class TestPlot:
    def test_writes_plot_file(self, tmp_path):
        report = emergent_report(
            full_ratings("a", lambda c, i: 1 if i <= 10 else 2)
            + full_ratings("b", lambda c, i: 3)
        )
        out = tmp_path / "report.png"
        plot_emergent_report(report, out)
        assert out.exists()
        assert out.stat().st_size > 1000
