"""Pipeline stages: prep, tokenizer, language model, decoder, synthesis, eval.

Each stage reads what it needs from the run directory, fails with a
DependencyError naming the missing producer when run out of order, and
writes its artifacts plus a JSONL training log. Randomness inside a stage
comes from a seed derived from the run's root seed and the stage name, so
rerunning any stage reproduces it exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
import torch

from ..audio_core import Waveform, load_audio, mel_spectrogram, save_wav
from ..data_pipeline import (
    TranscriptSegment,
    cap_speaker_hours,
    fake_asr,
    finalize_segments,
    read_manifest,
    segment_recording,
    split_sentences,
    write_manifest,
)
from ..errors import ConfigurationError, DataError, EmptyInputError
from ..eval_harness import speaker_sim, wer
from ..speech_gpt import (
    ModelConfig,
    SamplingConfig,
    SpeechGpt,
    TextTokenizer,
    TrainingConfig,
    build_sequence,
    train_speech_gpt,
)
from ..speech_tokenizer import (
    RandomConvFeatureProvider,
    SpeakerEmbedding,
    SpeechcodeSequence,
    SslTokenizer,
    SslTokenizerConfig,
    TokenizerLossWeights,
    VqVaeConfig,
    VqVaeTokenizer,
    train_ssl_tokenizer,
    train_vqvae,
)
from ..speechcode_bpe import BpeVocab, bpe_encode, token_lengths, train_bpe
from ..speechcode_decoder import (
    CollapseTracker,
    DecoderConfig,
    DecoderInput,
    MultiPeriodDiscriminator,
    MultiScaleDiscriminator,
    WaveDecoder,
    decode_full,
    decode_stream,
    decoder_training_step,
    expand_hidden_states,
)
from .fixture import CorpusEntry, read_corpus
from .rundir import RunDirectory

DECODER_FRAME_RATE = 50.0
SAMPLES_PER_FRAME = 480


# ---------------------------------------------------------------------------
# data prep


def run_prep(run: RunDirectory, corpus_path: str | Path | None = None) -> dict:
    """Corpus -> segmented, text-restored, capped manifest."""
    cfg = run.load_config()
    prep = cfg.prep
    seed = cfg.stage_seed("prep")

    if corpus_path is None:
        corpus_path = run.require("corpus")
    entries = read_corpus(corpus_path)
    if not entries:
        raise EmptyInputError(f"no corpus entries in {corpus_path}")

    with run.stage_lock("prep-data"):
        internal = run.path("corpus")
        if Path(corpus_path).resolve() != internal.resolve():
            # keep a resolved copy so re-running prep needs no --corpus flag
            with internal.open("w", encoding="utf-8") as fh:
                for entry in entries:
                    fh.write(json.dumps(entry.__dict__, sort_keys=True) + "\n")

        segments: list[TranscriptSegment] = []
        recordings: dict[str, dict] = {}
        for entry in entries:
            waveform = load_audio(entry.path)
            recordings[entry.recording_id] = {
                "path": entry.path,
                "speaker": entry.speaker,
                "text": entry.text,
            }
            fragments = fake_asr(
                entry.text,
                entry.duration_s,
                entry.speaker,
                entry.recording_id,
                fragment_s=prep.asr_fragment_s,
                word_error_rate=prep.asr_word_error_rate,
                seed=seed,
            )
            merged = segment_recording(
                waveform,
                fragments,
                max_split_s=prep.max_split_s,
                max_segment_s=prep.max_segment_s,
                threshold_dbfs=prep.silence_threshold_dbfs,
                min_silence_s=prep.min_silence_s,
            )
            segments.extend(finalize_segments(merged, split_sentences(entry.text)))

        segments = cap_speaker_hours(segments, prep.cap_hours, seed=seed)
        if not segments:
            raise DataError("preparation produced no usable segments")
        write_manifest(segments, run.path("manifest"))
        run.path("recordings").write_text(
            json.dumps(recordings, indent=2, sort_keys=True), encoding="utf-8"
        )

    speakers = sorted({s.speaker for s in segments})
    total_s = sum(s.end_s - s.start_s for s in segments)
    restored = sum(1 for s in segments if s.provenance == "restored")
    return {
        "segments": len(segments),
        "speakers": speakers,
        "total_hours": total_s / 3600.0,
        "restored_fraction": restored / len(segments),
    }


def _load_recordings(run: RunDirectory) -> dict[str, dict]:
    return json.loads(run.require("recordings").read_text(encoding="utf-8"))


def _segment_audio(
    seg: TranscriptSegment, recordings: dict[str, dict], cache: dict[str, Waveform]
) -> Waveform:
    """Cut one manifest segment out of its source recording."""
    if seg.recording_id not in recordings:
        raise DataError(f"manifest references unknown recording {seg.recording_id!r}")
    if seg.recording_id not in cache:
        cache[seg.recording_id] = load_audio(recordings[seg.recording_id]["path"])
    rec = cache[seg.recording_id]
    lo = int(round(seg.start_s * rec.sample_rate))
    hi = int(round(seg.end_s * rec.sample_rate))
    sliced = rec.samples[lo : min(hi, len(rec.samples))]
    if len(sliced) == 0:
        raise DataError(f"segment {seg.utterance_id} maps to empty audio")
    return Waveform(samples=sliced, sample_rate=rec.sample_rate)


def _load_segments(run: RunDirectory) -> tuple[list[TranscriptSegment], dict[str, dict]]:
    segments = read_manifest(run.require("manifest"))
    recordings = _load_recordings(run)
    return segments, recordings


# ---------------------------------------------------------------------------
# tokenizer stage


class TokenizerBundle:
    """A trained tokenizer plus everything needed to use it on waveforms."""

    def __init__(self, variant: str, model, provider=None):
        if variant not in ("ssl", "vqvae"):
            raise ConfigurationError(f"unknown tokenizer variant: {variant!r}")
        if variant == "ssl" and provider is None:
            raise ConfigurationError("ssl tokenizer needs its feature provider")
        self.variant = variant
        self.model = model
        self.provider = provider

    @property
    def codebook_size(self) -> int:
        return self.model.config.codebook_size

    @property
    def code_frame_rate(self) -> float:
        return self.model.config.code_frame_rate

    @property
    def speaker_dim(self) -> int:
        if self.variant == "ssl":
            return self.model.config.emb_dim
        return self.model.config.ref_dim

    def encode(self, waveform: Waveform) -> tuple[SpeechcodeSequence, SpeakerEmbedding]:
        """Waveform -> (speechcodes, speaker embedding)."""
        if self.variant == "ssl":
            seq, _ = self.model.encode_utterance(waveform, self.provider)
            emb = self.model.utterance_speaker(waveform, self.provider)
            return seq, emb
        mel = mel_spectrogram(waveform)
        return self.model.encode_utterance(mel, mel)

    def speaker(self, waveform: Waveform) -> SpeakerEmbedding:
        if self.variant == "ssl":
            return self.model.utterance_speaker(waveform, self.provider)
        return self.encode(waveform)[1]


def run_train_tokenizer(run: RunDirectory) -> dict:
    """Fit the speechcode tokenizer on the prepared segments."""
    cfg = run.load_config()
    tok = cfg.tokenizer
    seed = cfg.stage_seed("tokenizer")
    segments, recordings = _load_segments(run)

    with run.stage_lock("train-tokenizer"):
        cache: dict[str, Waveform] = {}
        clips = [(_segment_audio(s, recordings, cache), s.speaker) for s in segments]
        weights = TokenizerLossWeights(alpha=tok.alpha, beta=tok.beta, gamma=tok.gamma)

        if tok.variant == "ssl":
            provider = RandomConvFeatureProvider(feature_dim=tok.feature_dim, seed=seed)
            model = SslTokenizer(
                SslTokenizerConfig(
                    feature_dim=tok.feature_dim,
                    hidden=tok.hidden,
                    bottleneck_dim=tok.bottleneck_dim,
                    codebook_size=tok.codebook_size,
                    emb_dim=tok.emb_dim,
                    seed=seed,
                )
            )
            history = train_ssl_tokenizer(
                model,
                provider,
                clips,
                epochs=tok.epochs,
                steps_per_epoch=tok.steps_per_epoch,
                speakers_per_batch=tok.speakers_per_batch,
                clips_per_speaker=tok.clips_per_speaker,
                crop_frames=tok.crop_frames,
                lr=tok.lr,
                weights=weights,
                seed=seed,
            )
        else:
            mels = [mel_spectrogram(w).frames for w, _ in clips]
            model = VqVaeTokenizer(
                VqVaeConfig(
                    num_mels=tok.num_mels,
                    hidden=tok.vqvae_hidden,
                    code_dim=tok.code_dim,
                    codebook_size=tok.codebook_size,
                    ref_dim=tok.ref_dim,
                    seed=seed,
                )
            )
            losses = train_vqvae(
                model,
                mels,
                steps=tok.vqvae_steps,
                batch_size=tok.vqvae_batch_size,
                crop_frames=tok.vqvae_crop_frames,
                lr=tok.vqvae_lr,
                weights=TokenizerLossWeights(alpha=tok.alpha, beta=0.0, gamma=0.0),
                seed=seed,
            )
            history = [{"total": v} for v in losses]

        torch.save(
            {
                "variant": tok.variant,
                "model_config": asdict(model.config),
                "state_dict": model.state_dict(),
                "seed": seed,
            },
            run.path("tokenizer"),
        )
        run.log_jsonl("tokenizer", [{"step": i, **h} for i, h in enumerate(history)])

    return {
        "variant": tok.variant,
        "steps": len(history),
        "first_loss": history[0]["total"],
        "final_loss": history[-1]["total"],
    }


def load_tokenizer(run: RunDirectory) -> TokenizerBundle:
    payload = torch.load(run.require("tokenizer"), weights_only=False)
    variant = payload["variant"]
    if variant == "ssl":
        config = SslTokenizerConfig(**payload["model_config"])
        model = SslTokenizer(config)
        provider = RandomConvFeatureProvider(
            feature_dim=config.feature_dim, seed=payload["seed"]
        )
    else:
        config = VqVaeConfig(**payload["model_config"])
        model = VqVaeTokenizer(config)
        provider = None
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return TokenizerBundle(variant, model, provider)


# ---------------------------------------------------------------------------
# language model stage


def _encode_corpus(
    run: RunDirectory, bundle: TokenizerBundle
) -> list[dict]:
    """Tokenize every manifest segment: text, speechcodes, speaker embedding."""
    segments, recordings = _load_segments(run)
    cache: dict[str, Waveform] = {}
    encoded = []
    for seg in segments:
        wave = _segment_audio(seg, recordings, cache)
        seq, emb = bundle.encode(wave)
        encoded.append(
            {
                "utterance_id": seg.utterance_id,
                "speaker": seg.speaker,
                "text": seg.text,
                "codes": [int(c) for c in seq.codes],
                "embedding": emb.vector,
                "waveform": wave,
            }
        )
    return encoded


def run_train_lm(run: RunDirectory) -> dict:
    """BPE over speechcodes, byte BPE over text, then joint LM training."""
    cfg = run.load_config()
    lm = cfg.lm
    seed = cfg.stage_seed("lm")
    bundle = load_tokenizer(run)

    with run.stage_lock("train-lm"):
        encoded = _encode_corpus(run, bundle)
        code_corpus = [e["codes"] for e in encoded]
        speech_bpe = train_bpe(
            code_corpus, base_size=bundle.codebook_size, target_vocab=lm.bpe_target_vocab
        )
        text_tok = TextTokenizer.train([e["text"] for e in encoded], vocab_size=lm.text_vocab)

        model_cfg = ModelConfig.from_preset(
            lm.preset,
            text_vocab=text_tok.vocab_size,
            code_vocab=speech_bpe.vocab_size,
            ref_dim=bundle.speaker_dim,
        )
        model = SpeechGpt(model_cfg, seed=seed)

        dataset = [
            build_sequence(
                e["embedding"],
                text_tok.encode(e["text"]),
                bpe_encode(e["codes"], speech_bpe),
                code_vocab=model_cfg.code_vocab,
                context=model_cfg.context,
            )
            for e in encoded
        ]
        n_val = max(1, int(len(dataset) * lm.val_fraction)) if len(dataset) > 1 else 0
        train_set = dataset[: len(dataset) - n_val] if n_val else dataset
        val_set = dataset[len(dataset) - n_val :] if n_val else None

        train_cfg = TrainingConfig(
            max_lr=lm.max_lr,
            warmup_steps=lm.warmup_steps,
            floor_lr=lm.floor_lr,
            total_steps=lm.total_steps,
            weight_decay=lm.weight_decay,
            text_weight=lm.text_weight,
            speech_weight=lm.speech_weight,
            batch_size=lm.batch_size,
            seed=seed,
        )
        history = train_speech_gpt(
            model,
            train_set,
            train_cfg,
            steps=lm.steps,
            val_dataset=val_set,
            val_every=lm.val_every if val_set else 0,
        )

        speech_bpe.save(run.path("speech_bpe"))
        text_tok.save(run.path("text_vocab"))
        torch.save(
            {
                "model_config": asdict(model_cfg),
                "state_dict": model.state_dict(),
                "tokenizer_variant": bundle.variant,
                "seed": seed,
            },
            run.path("lm"),
        )
        run.log_jsonl("lm", [{"step": i, **h} for i, h in enumerate(history)])

    val_points = [h["val_loss"] for h in history if "val_loss" in h]
    return {
        "train_utterances": len(train_set),
        "val_utterances": n_val,
        "code_vocab": speech_bpe.vocab_size,
        "text_vocab": text_tok.vocab_size,
        "parameters": model_cfg.parameter_estimate(),
        "first_loss": history[0]["loss"],
        "final_loss": history[-1]["loss"],
        "final_val_loss": val_points[-1] if val_points else None,
    }


def load_lm(run: RunDirectory) -> tuple[SpeechGpt, BpeVocab, TextTokenizer]:
    payload = torch.load(run.require("lm"), weights_only=False)
    model_cfg = ModelConfig(**payload["model_config"])
    model = SpeechGpt(model_cfg, seed=payload["seed"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    speech_bpe = BpeVocab.load(run.require("speech_bpe"))
    text_tok = TextTokenizer.load(run.require("text_vocab"))
    return model, speech_bpe, text_tok


# ---------------------------------------------------------------------------
# decoder stage


def _frames_per_code(bundle: TokenizerBundle) -> int:
    ratio = DECODER_FRAME_RATE / bundle.code_frame_rate
    repeats = int(round(ratio))
    if abs(ratio - repeats) > 1e-9 or repeats < 1:
        raise ConfigurationError(
            f"code rate {bundle.code_frame_rate}/s does not divide the "
            f"{DECODER_FRAME_RATE}/s decoder frame rate"
        )
    return repeats


def _conditioning_pairs(
    run: RunDirectory,
    bundle: TokenizerBundle,
    lm: SpeechGpt,
    speech_bpe: BpeVocab,
    text_tok: TextTokenizer,
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per utterance: (frame-level hidden states, speaker emb, float waveform).

    Hidden states are teacher-forced LM states above each BPE token, repeated
    out to the decoder's 50 frames/s; the waveform is zero-padded to exactly
    480 samples per frame so crops align.
    """
    lengths_by_token = token_lengths(speech_bpe)
    repeats = _frames_per_code(bundle)
    encoded = _encode_corpus(run, bundle)
    pairs = []
    for e in encoded:
        bpe_ids = bpe_encode(e["codes"], speech_bpe)
        if not bpe_ids:
            continue
        seq = build_sequence(
            e["embedding"],
            text_tok.encode(e["text"]),
            bpe_ids,
            code_vocab=lm.config.code_vocab,
            context=lm.config.context,
        )
        hidden = lm.code_hidden_states(seq).numpy()
        frames = expand_hidden_states(hidden, [lengths_by_token[t] for t in bpe_ids], repeats)
        target = np.zeros(frames.shape[0] * SAMPLES_PER_FRAME, dtype=np.float64)
        wave = e["waveform"].to_float()
        target[: min(len(wave), len(target))] = wave[: len(target)]
        pairs.append((frames, e["embedding"], target))
    if not pairs:
        raise DataError("no utterances produced any speechcodes")
    return pairs


def run_train_decoder(run: RunDirectory) -> dict:
    """Adversarial training of the speechcode-to-waveform decoder."""
    cfg = run.load_config()
    dec = cfg.decoder
    seed = cfg.stage_seed("decoder")
    bundle = load_tokenizer(run)
    lm, speech_bpe, text_tok = load_lm(run)

    with run.stage_lock("train-decoder"):
        pairs = _conditioning_pairs(run, bundle, lm, speech_bpe, text_tok)
        generator = WaveDecoder(
            DecoderConfig(
                input_dim=lm.config.model_dim,
                speaker_dim=bundle.speaker_dim,
                base_channels=dec.base_channels,
            ),
            seed=seed,
        )
        torch.manual_seed(seed)
        mpd = MultiPeriodDiscriminator()
        msd = MultiScaleDiscriminator()
        g_opt = torch.optim.Adam(generator.parameters(), lr=dec.g_lr, betas=(0.8, 0.99))
        d_params = list(mpd.parameters()) + list(msd.parameters())
        d_opt = torch.optim.Adam(d_params, lr=dec.d_lr, betas=(0.8, 0.99))
        tracker = CollapseTracker()
        rng = np.random.default_rng(seed)

        crop = min(dec.crop_frames, min(p[0].shape[0] for p in pairs))
        history = []
        for step in range(dec.steps):
            hiddens, speakers, waves = [], [], []
            for _ in range(dec.batch_utterances):
                frames, emb, wave = pairs[int(rng.integers(len(pairs)))]
                start = int(rng.integers(frames.shape[0] - crop + 1))
                hiddens.append(frames[start : start + crop])
                speakers.append(emb)
                lo = start * SAMPLES_PER_FRAME
                waves.append(wave[lo : lo + crop * SAMPLES_PER_FRAME])
            batch = {
                "hidden": torch.as_tensor(np.stack(hiddens), dtype=torch.float32),
                "speaker": torch.as_tensor(np.stack(speakers), dtype=torch.float32),
                "waveform": torch.as_tensor(np.stack(waves), dtype=torch.float32),
            }
            record = decoder_training_step(
                batch, generator, (mpd, msd), g_opt, d_opt, tracker=tracker
            )
            history.append(
                {
                    "step": step,
                    "generator_loss": record["generator_loss"],
                    "discriminator_loss": record["discriminator_loss"],
                    **record["components"],
                }
            )

        torch.save(
            {
                "decoder_config": asdict(generator.config),
                "state_dict": generator.state_dict(),
                "frames_per_code": _frames_per_code(bundle),
                "seed": seed,
            },
            run.path("decoder"),
        )
        run.log_jsonl("decoder", history)

    return {
        "steps": len(history),
        "utterances": len(pairs),
        "first_mel_l1": history[0]["mel_l1"],
        "final_mel_l1": history[-1]["mel_l1"],
    }


def load_decoder(run: RunDirectory) -> WaveDecoder:
    payload = torch.load(run.require("decoder"), weights_only=False)
    model = WaveDecoder(DecoderConfig(**payload["decoder_config"]), seed=payload["seed"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


# ---------------------------------------------------------------------------
# synthesis


def _reference_for_speaker(
    run: RunDirectory, bundle: TokenizerBundle, speaker: str
) -> SpeakerEmbedding:
    """Speaker embedding from that speaker's first manifest segment."""
    segments, recordings = _load_segments(run)
    available = sorted({s.speaker for s in segments})
    for seg in segments:
        if seg.speaker == speaker:
            wave = _segment_audio(seg, recordings, {})
            return bundle.speaker(wave)
    raise DataError(f"no segments for speaker {speaker!r}; have {available}")


def run_synthesize(
    run: RunDirectory,
    text: str,
    speaker: str,
    out: str | Path | None = None,
    stream: bool = False,
    chunk_frames: int | None = None,
    temperature: float | None = None,
    seed: int | None = None,
) -> dict:
    """Text + target voice -> 24 kHz WAV via LM generation and the decoder."""
    if not text.strip():
        raise EmptyInputError("nothing to synthesize")
    cfg = run.load_config()
    synth = cfg.synthesis
    bundle = load_tokenizer(run)
    lm, speech_bpe, text_tok = load_lm(run)
    decoder = load_decoder(run)

    emb = _reference_for_speaker(run, bundle, speaker)
    text_ids = text_tok.encode(text)
    base_seed = cfg.stage_seed("synthesize") if seed is None else seed

    # a short toy model can emit eos immediately; retry on fresh seeds
    result = None
    for attempt in range(5):
        sampling = SamplingConfig(
            temperature=synth.temperature if temperature is None else temperature,
            top_k=synth.top_k,
            max_codes=synth.max_codes,
            seed=base_seed + attempt,
        )
        result = lm.generate(text_ids, emb, sampling)
        if result.codes:
            break
    if result is None or not result.codes:
        raise DataError("model emitted end-of-speech immediately on 5 seeds")

    lengths_by_token = token_lengths(speech_bpe)
    frames = expand_hidden_states(
        result.hidden_states.numpy(),
        [lengths_by_token[t] for t in result.codes],
        _frames_per_code(bundle),
    )
    inp = DecoderInput(hidden_states=frames, speaker_emb=emb)
    if stream:
        chunks = decode_stream(inp, chunk_frames or synth.chunk_frames, decoder)
        samples = np.concatenate([c.samples for c in chunks])
        waveform = Waveform(samples=samples, sample_rate=24000)
    else:
        waveform = decode_full(inp, decoder)

    if out is None:
        out = run.root / "reports" / f"synth_{speaker}_{base_seed}.wav"
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_wav(waveform, out)
    return {
        "path": str(out),
        "speechcode_tokens": len(result.codes),
        "frames": frames.shape[0],
        "seconds": len(waveform) / waveform.sample_rate,
        "truncated": result.truncated,
        "streamed": stream,
    }


# ---------------------------------------------------------------------------
# evaluation


class Transcriber(Protocol):
    """Pluggable speech recognizer for word-error-rate scoring."""

    def transcribe(self, waveform: Waveform, reference_text: str | None = None) -> str:
        ...


@dataclass
class FakeTranscriber:
    """Fixture backend: perturbs the reference transcript at a fixed rate.

    Stands in for a real recognizer where none is available; only meaningful
    for plumbing tests, since it reads the reference text rather than the
    audio. Deterministic per (seed, reference text).
    """

    word_error_rate: float = 0.0
    seed: int = 0

    def transcribe(self, waveform: Waveform, reference_text: str | None = None) -> str:
        if reference_text is None:
            raise ConfigurationError("FakeTranscriber needs the reference text")
        fragments = fake_asr(
            reference_text,
            waveform.duration_s,
            speaker="",
            recording_id=reference_text,
            fragment_s=waveform.duration_s + 1.0,
            word_error_rate=self.word_error_rate,
            seed=self.seed,
        )
        return " ".join(f.text for f in fragments)


def run_evaluate(
    run: RunDirectory,
    max_utterances: int = 4,
    transcriber: Transcriber | None = None,
) -> dict:
    """Synthesize held-out texts and score them: WER and speaker similarity.

    Similarity compares the tokenizer's speaker embedding of the synthesized
    audio against the embedding of natural audio from the target speaker.
    """
    cfg = run.load_config()
    bundle = load_tokenizer(run)
    segments, recordings = _load_segments(run)
    transcriber = transcriber or FakeTranscriber(
        word_error_rate=cfg.prep.asr_word_error_rate, seed=cfg.stage_seed("evaluate")
    )

    # last segments are the LM's validation tail; evaluate on those
    chosen = segments[-max_utterances:]
    rows = []
    for i, seg in enumerate(chosen):
        ref_emb = _reference_for_speaker(run, bundle, seg.speaker)
        out_path = run.root / "reports" / f"eval_{i:02d}.wav"
        summary = run_synthesize(
            run,
            seg.text,
            seg.speaker,
            out=out_path,
            seed=cfg.stage_seed("evaluate") + i,
        )
        synth_wave = load_audio(out_path)
        hypothesis = transcriber.transcribe(synth_wave, reference_text=seg.text)
        rows.append(
            {
                "utterance_id": seg.utterance_id,
                "speaker": seg.speaker,
                "text": seg.text,
                "wer": wer(seg.text, hypothesis),
                "similarity": speaker_sim(ref_emb, bundle.speaker(synth_wave)),
                "seconds": summary["seconds"],
                "wav": summary["path"],
            }
        )

    report = {
        "utterances": rows,
        "mean_wer": float(np.mean([r["wer"] for r in rows])),
        "mean_similarity": float(np.mean([r["similarity"] for r in rows])),
    }
    metrics_path = run.root / "reports" / "metrics.json"
    metrics_path.parent.mkdir(parents=True, exist_ok=True)
    metrics_path.write_text(json.dumps(report, indent=2), encoding="utf-8")
    report["path"] = str(metrics_path)
    return report
