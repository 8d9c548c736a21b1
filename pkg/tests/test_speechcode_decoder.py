"""Tests for the streaming waveform decoder and its adversarial training."""

import numpy as np
import pytest
import torch

from codetts.audio_core import AudioConfig, Waveform, mel_spectrogram
from codetts.errors import ConfigurationError, EmptyInputError
from codetts.speechcode_decoder import (
    CollapseTracker,
    DecoderConfig,
    DecoderInput,
    MultiPeriodDiscriminator,
    MultiScaleDiscriminator,
    WaveDecoder,
    benchmark_synthesis,
    decode_full,
    decode_stream,
    decoder_training_step,
    expand_hidden_states,
    feature_matching_loss,
    hinge_discriminator_loss,
    hinge_generator_loss,
    torch_logmel,
    train_decoder,
)

SMALL = DecoderConfig(input_dim=8, speaker_dim=4, base_channels=16)


@pytest.fixture(scope="module")
def model():
    return WaveDecoder(SMALL, seed=0)


def make_input(num_frames, seed=0, cfg=SMALL):
    rng = np.random.default_rng(seed)
    return DecoderInput(
        hidden_states=rng.standard_normal((num_frames, cfg.input_dim)).astype(np.float32),
        speaker_emb=rng.standard_normal(cfg.speaker_dim).astype(np.float32),
    )


class TestDecoderConfig:
    def test_default_upsampling_totals_480(self):
        cfg = DecoderConfig()
        assert cfg.total_upsampling == 480
        assert cfg.frame_rate * cfg.total_upsampling == 24000

    def test_rejects_upsampling_that_misses_sample_rate(self):
        with pytest.raises(ConfigurationError):
            DecoderConfig(upsample_factors=(2, 8, 6, 4))

    def test_rejects_mismatched_frame_rate(self):
        with pytest.raises(ConfigurationError):
            DecoderConfig(frame_rate=25.0)


class TestDecodeFull:
    def test_output_length_is_frames_times_480(self, model):
        wave = decode_full(make_input(50), model)
        assert isinstance(wave, Waveform)
        assert len(wave) == 50 * 480 == 24000
        assert wave.sample_rate == 24000

    def test_single_frame_gives_480_samples(self, model):
        assert len(decode_full(make_input(1), model)) == 480

    def test_zero_hidden_states_give_finite_audio(self, model):
        inp = DecoderInput(
            hidden_states=np.zeros((10, SMALL.input_dim), dtype=np.float32),
            speaker_emb=np.zeros(SMALL.speaker_dim, dtype=np.float32),
        )
        wave = decode_full(inp, model)
        assert np.all(np.isfinite(wave.samples))

    def test_deterministic(self, model):
        a = decode_full(make_input(20, seed=5), model)
        b = decode_full(make_input(20, seed=5), model)
        assert np.array_equal(a.samples, b.samples)

    def test_no_lookahead(self, model):
        # perturbing the last frame must not change any earlier sample
        base = make_input(30, seed=2)
        changed = DecoderInput(
            hidden_states=base.hidden_states.copy(), speaker_emb=base.speaker_emb
        )
        changed.hidden_states[-1] += 10.0
        a = decode_full(base, model).samples
        b = decode_full(changed, model).samples
        assert np.array_equal(a[: 29 * 480], b[: 29 * 480])
        assert not np.array_equal(a[29 * 480 :], b[29 * 480 :])

    def test_hidden_dim_mismatch(self, model):
        bad = DecoderInput(
            hidden_states=np.zeros((5, SMALL.input_dim + 1), dtype=np.float32),
            speaker_emb=np.zeros(SMALL.speaker_dim, dtype=np.float32),
        )
        with pytest.raises(ConfigurationError):
            decode_full(bad, model)

    def test_speaker_dim_mismatch(self, model):
        bad = DecoderInput(
            hidden_states=np.zeros((5, SMALL.input_dim), dtype=np.float32),
            speaker_emb=np.zeros(SMALL.speaker_dim + 2, dtype=np.float32),
        )
        with pytest.raises(ConfigurationError):
            decode_full(bad, model)

    def test_empty_input(self, model):
        empty = DecoderInput(
            hidden_states=np.zeros((0, SMALL.input_dim), dtype=np.float32),
            speaker_emb=np.zeros(SMALL.speaker_dim, dtype=np.float32),
        )
        with pytest.raises(EmptyInputError):
            decode_full(empty, model)

    def test_speaker_embedding_changes_audio_after_film_warmup(self, model):
        # film layers start as identity, so nudge one scale weight off zero
        perturbed = WaveDecoder(SMALL, seed=0)
        with torch.no_grad():
            perturbed.stages[0].film.scale.weight += 0.5
        inp = make_input(10, seed=3)
        other = DecoderInput(
            hidden_states=inp.hidden_states, speaker_emb=inp.speaker_emb + 1.0
        )
        assert not np.array_equal(
            decode_full(inp, perturbed).samples, decode_full(other, perturbed).samples
        )

    def test_film_starts_as_identity(self, model):
        # zero-init scale/shift means the speaker embedding is inert at init
        inp = make_input(10, seed=3)
        other = DecoderInput(
            hidden_states=inp.hidden_states, speaker_emb=inp.speaker_emb + 1.0
        )
        assert np.array_equal(
            decode_full(inp, model).samples, decode_full(other, model).samples
        )


class TestDecodeStream:
    def test_chunk_partition(self, model):
        chunks = list(decode_stream(make_input(100, seed=1), 25, model))
        assert len(chunks) == 4
        assert all(len(c.samples) == 25 * 480 == 12000 for c in chunks)
        assert [c.chunk_index for c in chunks] == [0, 1, 2, 3]
        assert [c.is_final for c in chunks] == [False, False, False, True]

    def test_ragged_final_chunk(self, model):
        chunks = list(decode_stream(make_input(10, seed=1), 4, model))
        assert [len(c.samples) for c in chunks] == [4 * 480, 4 * 480, 2 * 480]

    @pytest.mark.parametrize("num_frames", [1, 13, 50])
    @pytest.mark.parametrize("chunk_frames", [1, 7, 25])
    def test_stream_matches_full_decode(self, model, num_frames, chunk_frames):
        inp = make_input(num_frames, seed=num_frames)
        full = decode_full(inp, model).samples.astype(np.int32)
        cat = np.concatenate(
            [c.samples for c in decode_stream(inp, chunk_frames, model)]
        ).astype(np.int32)
        assert cat.shape == full.shape
        # different conv input lengths can round differently by one 16-bit step
        assert np.abs(cat - full).max() <= 1

    def test_single_covering_chunk_is_bit_identical(self, model):
        inp = make_input(50, seed=9)
        full = decode_full(inp, model).samples
        cat = np.concatenate([c.samples for c in decode_stream(inp, 50, model)])
        assert np.array_equal(cat, full)

    def test_chunk_frames_must_be_positive(self, model):
        with pytest.raises(ConfigurationError):
            list(decode_stream(make_input(10), 0, model))

    def test_empty_input(self, model):
        empty = DecoderInput(
            hidden_states=np.zeros((0, SMALL.input_dim), dtype=np.float32),
            speaker_emb=np.zeros(SMALL.speaker_dim, dtype=np.float32),
        )
        with pytest.raises(EmptyInputError):
            list(decode_stream(empty, 4, model))


class TestExpandHiddenStates:
    def test_repeats_by_token_length(self):
        hidden = np.arange(6, dtype=np.float32).reshape(3, 2)
        out = expand_hidden_states(hidden, [2, 1, 3])
        assert out.shape == (6, 2)
        assert np.array_equal(out[:2], np.tile(hidden[0], (2, 1)))
        assert np.array_equal(out[2:3], hidden[1:2])
        assert np.array_equal(out[3:], np.tile(hidden[2], (3, 1)))

    def test_repeats_per_code_scales_lengths(self):
        hidden = np.ones((2, 3), dtype=np.float32)
        assert expand_hidden_states(hidden, [1, 2], repeats_per_code=2).shape == (6, 3)

    def test_length_mismatch(self):
        with pytest.raises(ConfigurationError):
            expand_hidden_states(np.ones((2, 3), dtype=np.float32), [1, 2, 3])


class TestHingeLosses:
    def test_discriminator_loss_zero_when_margins_met(self):
        real = torch.ones(2, 5)
        fake = -torch.ones(2, 5)
        assert float(hinge_discriminator_loss([real], [fake])) == 0.0

    def test_discriminator_loss_at_zero_scores_is_two(self):
        z = torch.zeros(2, 5)
        assert float(hinge_discriminator_loss([z], [z])) == pytest.approx(2.0)

    def test_discriminator_loss_hand_value(self):
        # relu(1 - 0.5) + relu(1 + (-0.25)) = 0.5 + 0.75
        real = torch.full((1, 1), 0.5)
        fake = torch.full((1, 1), -0.25)
        assert float(hinge_discriminator_loss([real], [fake])) == pytest.approx(1.25)

    def test_discriminator_loss_averages_banks(self):
        one = torch.ones(1, 1)
        zero = torch.zeros(1, 1)
        # bank losses are 0 and 2
        loss = hinge_discriminator_loss([one, zero], [-one, zero])
        assert float(loss) == pytest.approx(1.0)

    def test_generator_loss_is_negated_score(self):
        assert float(hinge_generator_loss([torch.full((3, 2), 2.0)])) == pytest.approx(-2.0)
        assert float(hinge_generator_loss([torch.zeros(1, 4)])) == 0.0

    def test_feature_matching_hand_value(self):
        real = [[torch.ones(2, 2), torch.zeros(2, 2)]]
        fake = [[torch.zeros(2, 2), torch.zeros(2, 2)]]
        # layer L1s are 1 and 0
        assert float(feature_matching_loss(real, fake)) == pytest.approx(0.5)

    def test_feature_matching_detaches_real_side(self):
        real_leaf = torch.ones(2, 2, requires_grad=True)
        fake_leaf = torch.zeros(2, 2, requires_grad=True)
        feature_matching_loss([[real_leaf]], [[fake_leaf]]).backward()
        assert real_leaf.grad is None
        assert fake_leaf.grad is not None


class TestDiscriminators:
    def test_period_banks_emit_scores_and_features(self):
        mpd = MultiPeriodDiscriminator()
        outs = mpd(torch.randn(2, 960))
        assert len(outs) == 3
        for score, feats in outs:
            assert score.shape[0] == 2
            assert len(feats) == 3

    def test_period_pads_non_divisible_lengths(self):
        mpd = MultiPeriodDiscriminator(periods=(3,))
        score, _ = mpd(torch.randn(1, 100))[0]
        assert torch.all(torch.isfinite(score))

    def test_scale_banks_downsample(self):
        msd = MultiScaleDiscriminator(num_scales=2)
        outs = msd(torch.randn(1, 960))
        assert outs[0][0].shape[-1] > outs[1][0].shape[-1]


class TestTorchLogmel:
    def test_matches_reference_mel(self):
        rng = np.random.default_rng(0)
        samples = (rng.standard_normal(24000) * 3000).astype(np.int16)
        ref = mel_spectrogram(Waveform(samples=samples)).frames
        out = torch_logmel(torch.as_tensor(samples[None, :].astype(np.float32) / 32768.0))
        assert out.shape == (1, 50, 80)
        assert np.abs(ref - out[0].numpy()).max() < 1e-4

    def test_silence_hits_log_floor(self):
        cfg = AudioConfig()
        out = torch_logmel(torch.zeros(1, 4800))
        assert torch.allclose(out, torch.full_like(out, float(np.log(cfg.log_floor))))

    def test_differentiable(self):
        wave = (torch.randn(1, 960) * 0.1).requires_grad_()
        torch_logmel(wave.clamp(-1, 1)).mean().backward()
        assert wave.grad is not None
        assert torch.all(torch.isfinite(wave.grad))


def make_batch(num_frames=25, batch_size=1, seed=1):
    rng = np.random.default_rng(seed)
    t = np.arange(num_frames * 480) / 24000.0
    target = (0.5 * np.sin(2 * np.pi * 220.0 * t)).astype(np.float32)
    return {
        "hidden": rng.standard_normal((batch_size, num_frames, SMALL.input_dim)).astype(
            np.float32
        ),
        "speaker": rng.standard_normal((batch_size, SMALL.speaker_dim)).astype(np.float32),
        "waveform": np.tile(target, (batch_size, 1)),
    }


class TestTrainingStep:
    def test_loss_components_combine_with_published_weights(self):
        torch.manual_seed(0)
        gen = WaveDecoder(SMALL, seed=0)
        banks = (MultiPeriodDiscriminator(), MultiScaleDiscriminator())
        out = decoder_training_step(make_batch(), gen, banks)
        c = out["components"]
        expected = c["adversarial"] + 2.0 * c["feature_matching"] + 45.0 * c["mel_l1"]
        assert out["generator_loss"] == pytest.approx(expected, rel=1e-6)
        assert out["discriminator_loss"] > 0

    def test_no_optimizers_means_no_updates(self):
        torch.manual_seed(0)
        gen = WaveDecoder(SMALL, seed=0)
        banks = (MultiPeriodDiscriminator(), MultiScaleDiscriminator())
        before = [p.clone() for p in gen.parameters()]
        decoder_training_step(make_batch(), gen, banks)
        assert all(torch.equal(a, b) for a, b in zip(before, gen.parameters()))

    def test_optimizer_steps_update_both_sides(self):
        torch.manual_seed(0)
        gen = WaveDecoder(SMALL, seed=0)
        mpd, msd = MultiPeriodDiscriminator(), MultiScaleDiscriminator()
        g_opt = torch.optim.Adam(gen.parameters(), lr=1e-3)
        d_opt = torch.optim.Adam(list(mpd.parameters()) + list(msd.parameters()), lr=1e-3)
        g_before = [p.clone() for p in gen.parameters()]
        d_before = [p.clone() for p in mpd.parameters()]
        decoder_training_step(make_batch(), gen, (mpd, msd), g_opt, d_opt)
        assert any(not torch.equal(a, b) for a, b in zip(g_before, gen.parameters()))
        assert any(not torch.equal(a, b) for a, b in zip(d_before, mpd.parameters()))

    def test_gradients_finite_at_init(self):
        torch.manual_seed(0)
        gen = WaveDecoder(SMALL, seed=0)
        banks = (MultiPeriodDiscriminator(), MultiScaleDiscriminator())
        g_opt = torch.optim.SGD(gen.parameters(), lr=0.0)
        d_opt = torch.optim.SGD(
            list(banks[0].parameters()) + list(banks[1].parameters()), lr=0.0
        )
        decoder_training_step(make_batch(), gen, banks, g_opt, d_opt)
        for p in gen.parameters():
            if p.grad is not None:
                assert torch.all(torch.isfinite(p.grad))

    def test_shape_mismatch_rejected(self):
        gen = WaveDecoder(SMALL, seed=0)
        banks = (MultiPeriodDiscriminator(), MultiScaleDiscriminator())
        batch = make_batch()
        batch["waveform"] = batch["waveform"][:, :-1]
        with pytest.raises(ConfigurationError):
            decoder_training_step(batch, gen, banks)


class TestCollapseTracker:
    def test_warns_once_after_full_window(self):
        tracker = CollapseTracker(threshold=1e-6, window=5)
        with pytest.warns(RuntimeWarning, match="collapsed"):
            fired = [tracker.observe(0.0) for _ in range(5)]
        assert fired == [False] * 4 + [True]
        # already warned: stays silent
        assert tracker.observe(0.0) is False

    def test_streak_resets_on_healthy_step(self):
        tracker = CollapseTracker(threshold=1e-6, window=3)
        tracker.observe(0.0)
        tracker.observe(0.0)
        tracker.observe(0.5)
        assert tracker.streak == 0
        assert not tracker.warned


class TestTrainDecoder:
    def test_mel_loss_halves_on_single_clip(self):
        gen = WaveDecoder(SMALL, seed=3)
        history = train_decoder(gen, make_batch(seed=1), steps=150)
        first = history[0]["components"]["mel_l1"]
        last = history[-1]["components"]["mel_l1"]
        assert last < 0.5 * first


class TestBenchmark:
    def test_full_mode_reports_whole_decode_as_first_chunk(self, model):
        stats = benchmark_synthesis(model, num_utterances=2, utterance_seconds=0.5)
        assert stats["mode"] == "full"
        assert stats["frames_per_utterance"] == 25
        assert stats["first_chunk_time"] == pytest.approx(stats["mean_wall_time"])
        assert stats["real_time_factor"] > 0

    def test_stream_mode_first_chunk_beats_total(self, model):
        stats = benchmark_synthesis(
            model, num_utterances=2, utterance_seconds=2.0, mode="stream", chunk_frames=10
        )
        assert stats["first_chunk_time"] < stats["mean_wall_time"]

    def test_unknown_mode(self, model):
        with pytest.raises(ConfigurationError):
            benchmark_synthesis(model, mode="batch")
