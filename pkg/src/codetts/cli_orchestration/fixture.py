"""Deterministic synthetic speech corpus for tests and smoke runs.

Utterances are strings of consonant-vowel syllables rendered with a
crude source-filter model: a glottal pulse train at the speaker's pitch,
filtered through two formant resonators per vowel, with a short noise
burst for the consonant. The result is nowhere near natural speech but
it has the properties the pipeline cares about: distinct speakers,
text that maps to acoustics, and durations inside a known range. Same
seed, byte-identical corpus.

Speaker identity is a Voice: a pitch register (f0 drawn per utterance,
so pitch contour acts as prosody rather than a fixed tag), a vocal
tract length proxy, a gain, and a spectral tilt. The default voices
differ in register and tract length; tests that need speakers who
differ only in utterance-level statistics can pass their own voices.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from ..audio_core import INT16_FULL_SCALE, Waveform, save_wav
from ..errors import ConfigurationError

SAMPLE_RATE = 24000

# vowel -> (F1, F2) in Hz; rough adult averages
_VOWELS = {
    "a": (730.0, 1090.0),
    "e": (530.0, 1840.0),
    "i": (270.0, 2290.0),
    "o": (570.0, 840.0),
    "u": (300.0, 870.0),
}
_CONSONANTS = "bdkmst"


@dataclass(frozen=True)
class Voice:
    """Acoustic identity of a synthetic speaker.

    f0 is drawn per utterance from f0_range, so pitch varies like
    prosody; the stable cues are the register itself, formant_scale
    (vocal tract length), level (gain) and tilt (brightness).
    """

    f0_range: tuple[float, float]
    formant_scale: float = 1.0
    level: float = 1.0
    tilt: float = 0.0


_DEFAULT_VOICES = [
    Voice(f0_range=(112.0, 130.0), formant_scale=1.0),
    Voice(f0_range=(205.0, 238.0), formant_scale=1.18),
    Voice(f0_range=(88.0, 102.0), formant_scale=0.92),
    Voice(f0_range=(168.0, 195.0), formant_scale=1.1),
]


@dataclass
class CorpusEntry:
    recording_id: str
    speaker: str
    path: str
    text: str
    duration_s: float


def _resonator(freq: float, bandwidth: float, sr: int) -> tuple[np.ndarray, np.ndarray]:
    """Two-pole resonator coefficients for lfilter."""
    r = np.exp(-np.pi * bandwidth / sr)
    theta = 2.0 * np.pi * freq / sr
    a = np.array([1.0, -2.0 * r * np.cos(theta), r * r])
    b = np.array([1.0 - r])
    return b, a


def _pulse_train(f0: float, num_samples: int, sr: int) -> np.ndarray:
    out = np.zeros(num_samples)
    period = max(1, int(round(sr / f0)))
    out[::period] = 1.0
    return out


def _synth_syllable(
    consonant: str, vowel: str, f0: float, voice: Voice, rng: random.Random
) -> np.ndarray:
    sr = SAMPLE_RATE
    cons_s = 0.05 + 0.03 * rng.random()
    vowel_s = 0.14 + 0.10 * rng.random()
    noise_rng = np.random.default_rng(rng.getrandbits(32))

    # consonant: filtered noise burst, band chosen by letter for variety
    n_cons = int(cons_s * sr)
    noise = noise_rng.standard_normal(n_cons)
    center = 1000.0 + 400.0 * (_CONSONANTS.index(consonant) % len(_CONSONANTS))
    b, a = _resonator(center * voice.formant_scale, 800.0, sr)
    cons = signal.lfilter(b, a, noise)
    cons *= np.linspace(1.0, 0.0, n_cons) ** 2

    # vowel: pulse train through two formant resonators
    n_vow = int(vowel_s * sr)
    f1, f2 = _VOWELS[vowel]
    src = _pulse_train(f0, n_vow, sr)
    b1, a1 = _resonator(f1 * voice.formant_scale, 80.0, sr)
    b2, a2 = _resonator(f2 * voice.formant_scale, 120.0, sr)
    vow = signal.lfilter(b1, a1, src) + 0.6 * signal.lfilter(b2, a2, src)
    env = np.minimum(1.0, np.linspace(0.0, 8.0, n_vow))
    env *= np.linspace(1.0, 0.05, n_vow) ** 0.5
    vow *= env

    gap = np.zeros(int(0.02 * sr))
    out = np.concatenate([cons * 0.4, vow, gap])
    if voice.tilt:
        # one-tap pre-emphasis; brightens without changing duration
        out = np.append(out[0], out[1:] - voice.tilt * out[:-1])
    peak = np.max(np.abs(out))
    if peak > 0:
        out = out / peak * 0.45 * voice.level
    return out


def _default_voice(index: int) -> Voice:
    base = _DEFAULT_VOICES[index % len(_DEFAULT_VOICES)]
    # later speakers drift upward so ids never collide acoustically
    octave = index // len(_DEFAULT_VOICES)
    lo, hi = base.f0_range
    shift = 1.0 + 0.07 * octave
    return Voice(
        f0_range=(lo * shift, hi * shift),
        formant_scale=base.formant_scale * (1.0 + 0.03 * octave),
        level=base.level,
        tilt=base.tilt,
    )


def make_fixture(
    out_dir: str | Path,
    seed: int = 0,
    num_speakers: int = 2,
    utterances_per_speaker: int = 12,
    min_seconds: float = 1.0,
    max_seconds: float = 8.0,
    voices: list[Voice] | None = None,
) -> list[CorpusEntry]:
    """Write a synthetic corpus under out_dir and return its entries.

    Layout: out_dir/wavs/<recording_id>.wav plus out_dir/corpus.jsonl with
    one record per utterance. Deterministic for a given seed. When voices
    is given it must supply one Voice per speaker; otherwise built-in
    voices are assigned in order.
    """
    if num_speakers < 1 or utterances_per_speaker < 1:
        raise ConfigurationError("fixture needs at least one speaker and one utterance")
    if not 0 < min_seconds < max_seconds:
        raise ConfigurationError("fixture duration bounds must satisfy 0 < min < max")
    if voices is not None and len(voices) < num_speakers:
        raise ConfigurationError(
            f"{num_speakers} speakers but only {len(voices)} voices given"
        )

    out_dir = Path(out_dir)
    wav_dir = out_dir / "wavs"
    wav_dir.mkdir(parents=True, exist_ok=True)

    entries: list[CorpusEntry] = []
    for s in range(num_speakers):
        speaker = f"spk{s:02d}"
        voice = voices[s] if voices is not None else _default_voice(s)
        for u in range(utterances_per_speaker):
            rng = random.Random(f"{seed}:{speaker}:{u}")
            f0 = rng.uniform(*voice.f0_range)
            target_s = rng.uniform(min_seconds, max_seconds - 0.5)
            pieces: list[np.ndarray] = []
            words: list[str] = []
            total = 0.0
            while total < target_s:
                syllables = rng.randint(1, 3)
                word = ""
                for _ in range(syllables):
                    c = rng.choice(_CONSONANTS)
                    v = rng.choice(sorted(_VOWELS))
                    word += c + v
                    piece = _synth_syllable(c, v, f0, voice, rng)
                    pieces.append(piece)
                    total += len(piece) / SAMPLE_RATE
                    if total >= target_s:
                        break
                words.append(word)
            wave_f = np.concatenate(pieces)
            samples = np.clip(
                np.round(wave_f * INT16_FULL_SCALE), -32768, 32767
            ).astype(np.int16)
            waveform = Waveform(samples=samples, sample_rate=SAMPLE_RATE)

            recording_id = f"{speaker}_{u:03d}"
            save_wav(waveform, wav_dir / f"{recording_id}.wav")
            entries.append(
                CorpusEntry(
                    recording_id=recording_id,
                    speaker=speaker,
                    # relative to corpus.jsonl so the corpus can be moved
                    path=f"wavs/{recording_id}.wav",
                    text=" ".join(words),
                    duration_s=round(len(samples) / SAMPLE_RATE, 6),
                )
            )

    manifest_path = out_dir / "corpus.jsonl"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.__dict__, sort_keys=True) + "\n")
    return entries


def read_corpus(path: str | Path) -> list[CorpusEntry]:
    """Load a corpus.jsonl; relative audio paths resolve against its directory."""
    path = Path(path)
    entries = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        entry = CorpusEntry(**record)
        if not Path(entry.path).is_absolute():
            entry.path = str(path.parent / entry.path)
        entries.append(entry)
    return entries
