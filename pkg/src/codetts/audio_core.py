"""Audio I/O, resampling, and mel-spectrogram extraction.

All ingested audio is normalized to 24 kHz mono signed 16-bit PCM. The mel
grid runs at 50 frames/s (hop 480) so one mel frame covers exactly one 20 ms
tokenizer frame.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import ConfigurationError, EmptyInputError, IngestionError

TARGET_SAMPLE_RATE = 24000
INT16_FULL_SCALE = 32768.0


@dataclass
class AudioConfig:
    """Fixed STFT/mel grid; hop 480 keeps mel frames 1:1 with 20 ms frames."""

    sample_rate: int = TARGET_SAMPLE_RATE
    num_mels: int = 80
    hop: int = 480
    win: int = 1024
    log_floor: float = 1e-5
    fmin: float = 0.0
    fmax: float = 12000.0


@dataclass
class Waveform:
    """24 kHz mono 16-bit audio after ingestion."""

    samples: np.ndarray  # int16, shape (n,)
    sample_rate: int = TARGET_SAMPLE_RATE
    channels: int = 1

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.int16)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def to_float(self) -> np.ndarray:
        """Samples scaled to [-1, 1) float64."""
        return self.samples.astype(np.float64) / INT16_FULL_SCALE


@dataclass
class MelSpectrogram:
    """Log-mel frames on the fixed grid; frame_rate == sample_rate / hop."""

    frames: np.ndarray  # (num_frames, num_mels) float32, log power
    num_mels: int
    hop: int
    frame_rate: float

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


def _read_wav(path: Path) -> tuple[np.ndarray, int, int]:
    """Decode a PCM WAV file to float64 (n, channels) in [-1, 1)."""
    with wave.open(str(path), "rb") as wf:
        rate = wf.getframerate()
        channels = wf.getnchannels()
        width = wf.getsampwidth()
        nframes = wf.getnframes()
        raw = wf.readframes(nframes)
    if width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 1:
        data = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif width == 4:
        data = np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2147483648.0
    elif width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        val = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        val = np.where(val >= 1 << 23, val - (1 << 24), val)
        data = val.astype(np.float64) / 8388608.0
    else:
        raise IngestionError(f"unsupported PCM sample width {width} in {path}")
    return data.reshape(-1, channels), rate, channels


def _read_with_backend(path: Path) -> tuple[np.ndarray, int, int]:
    """Compressed formats need an optional libsndfile-style backend."""
    try:
        import soundfile  # type: ignore
    except ImportError as exc:
        raise IngestionError(
            f"cannot decode {path}: no backend for non-WAV formats is installed"
        ) from exc
    data, rate = soundfile.read(str(path), always_2d=True, dtype="float64")
    return data, rate, data.shape[1]


def load_audio(path: str | Path, target_rate: int = TARGET_SAMPLE_RATE) -> Waveform:
    """Load an audio file and normalize it to 24 kHz mono 16-bit.

    WAV/PCM is decoded natively; other formats require an optional
    soundfile-compatible backend. Raises IngestionError on unreadable files
    and EmptyInputError on zero-length audio.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"file not found: {path}")
    try:
        if path.suffix.lower() in (".wav", ".wave"):
            data, rate, channels = _read_wav(path)
        else:
            data, rate, channels = _read_with_backend(path)
    except IngestionError:
        raise
    except Exception as exc:
        raise IngestionError(f"cannot decode {path}: {exc}") from exc
    if data.size == 0:
        raise EmptyInputError(f"zero-length audio: {path}")
    mono = data.mean(axis=1)
    if rate != target_rate:
        mono = resample(mono, rate, target_rate)
    samples = np.clip(np.round(mono * INT16_FULL_SCALE), -32768, 32767).astype(np.int16)
    return Waveform(samples=samples, sample_rate=target_rate, channels=1)


def resample(signal: np.ndarray, orig_rate: int, target_rate: int) -> np.ndarray:
    """Band-limited polyphase resampling (windowed-sinc, Kaiser window)."""
    if orig_rate == target_rate:
        return np.asarray(signal, dtype=np.float64)
    g = math.gcd(orig_rate, target_rate)
    return resample_poly(np.asarray(signal, dtype=np.float64), target_rate // g, orig_rate // g)


def save_wav(waveform: Waveform, path: str | Path) -> None:
    """Write 24 kHz 16-bit signed little-endian mono WAV."""
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(waveform.sample_rate)
        wf.writeframes(waveform.samples.astype("<i2").tobytes())


def hz_to_mel(f: np.ndarray | float) -> np.ndarray | float:
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m: np.ndarray | float) -> np.ndarray | float:
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_centers(num_mels: int, fmin: float, fmax: float) -> np.ndarray:
    """Center frequencies (Hz) of the triangular mel bands."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), num_mels + 2))
    return edges[1:-1]


def mel_filterbank(
    sample_rate: int, n_fft: int, num_mels: int, fmin: float, fmax: float
) -> np.ndarray:
    """Triangular mel filterbank (num_mels, n_fft//2+1), peak weight 1."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), num_mels + 2))
    fft_freqs = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    fb = np.zeros((num_mels, len(fft_freqs)))
    for m in range(num_mels):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        left = (fft_freqs - lo) / max(center - lo, 1e-12)
        right = (hi - fft_freqs) / max(hi - center, 1e-12)
        fb[m] = np.maximum(0.0, np.minimum(left, right))
    return fb


def mel_spectrogram(
    waveform: Waveform,
    num_mels: int | None = None,
    hop: int | None = None,
    config: AudioConfig | None = None,
) -> MelSpectrogram:
    """Log-mel spectrogram with num_frames == ceil(num_samples / hop).

    Frame i is windowed around sample i*hop + hop/2 with zero padding at the
    edges; log compression uses a fixed power floor so digital silence maps
    to exactly log(floor).
    """
    cfg = config or AudioConfig()
    num_mels = cfg.num_mels if num_mels is None else num_mels
    hop = cfg.hop if hop is None else hop
    frame_budget = cfg.sample_rate * 20 // 1000
    if frame_budget % hop != 0:
        raise ConfigurationError(f"hop {hop} does not divide the 20 ms frame budget of {frame_budget} samples")
    n = len(waveform)
    if n == 0:
        raise EmptyInputError("empty waveform")
    win = cfg.win
    num_frames = math.ceil(n / hop)
    signal = waveform.to_float()
    # window centered on each hop midpoint; zeros outside the signal
    first_start = hop // 2 - win // 2
    pad_left = max(0, -first_start)
    last_end = (num_frames - 1) * hop + hop // 2 + win - win // 2
    pad_right = max(0, last_end - n)
    padded = np.pad(signal, (pad_left, pad_right))
    starts = np.arange(num_frames) * hop + hop // 2 - win // 2 + pad_left
    idx = starts[:, None] + np.arange(win)[None, :]
    frames = padded[idx] * np.hanning(win)[None, :]
    spec = np.abs(np.fft.rfft(frames, n=win, axis=1)) ** 2
    fb = mel_filterbank(waveform.sample_rate, win, num_mels, cfg.fmin, cfg.fmax)
    mel_power = spec @ fb.T
    logmel = np.log(np.maximum(mel_power, cfg.log_floor))
    return MelSpectrogram(
        frames=logmel.astype(np.float32),
        num_mels=num_mels,
        hop=hop,
        frame_rate=waveform.sample_rate / hop,
    )
