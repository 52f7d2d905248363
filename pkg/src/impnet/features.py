"""Log-mel front end: PCM16 WAV -> power STFT -> 40 log-mel bands -> 21-frame windows.

Frames are 25 ms Hamming windows every 10 ms, zero padded to the next power
of two (512 points at 16 kHz). Log energies use the natural log with a
1e-10 floor on the band power. There is no pre-emphasis, dithering or
energy coefficient; per-utterance mean normalisation is opt-in.

A feature matrix is stored as a ``(n_mels, frames, 1)`` tensor, so the
feature archive format is the generic keyed tensor archive.
"""
from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ShapeError
from .tensor import DTYPE, pad_time_replicate, save_archive

SAMPLE_RATES = (8000, 16000)
WINDOW_MS = 25
HOP_MS = 10
N_MELS = 40
LOG_FLOOR = 1e-10
CONTEXT = 10


@dataclass
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate not in SAMPLE_RATES:
            raise DataError(f"unsupported sample rate {self.sample_rate}; use one of {SAMPLE_RATES}")
        self.samples = np.asarray(self.samples, dtype=DTYPE)
        if self.samples.ndim != 1:
            raise DataError("non-mono audio: expected a 1-D sample array")


@dataclass
class MelFilterbank:
    weights: np.ndarray     # (n_filters, n_fft // 2 + 1)
    centers_hz: np.ndarray  # (n_filters,)
    sample_rate: int
    n_fft: int

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]


def read_wav(path) -> AudioBuffer:
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate = w.getnchannels(), w.getsampwidth(), w.getframerate()
            if w.getcomptype() != "NONE":
                raise DataError(f"{path}: unsupported encoding {w.getcompname()}")
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise DataError(f"{path}: malformed WAV header: {exc}") from exc
    if channels != 1:
        raise DataError(f"{path}: non-mono audio ({channels} channels)")
    if width != 2:
        raise DataError(f"{path}: unsupported encoding, expected 16-bit PCM, got {8 * width}-bit")
    pcm = np.frombuffer(raw, dtype="<i2")
    return AudioBuffer(pcm.astype(DTYPE) / 32768.0, rate)


def write_wav(path, audio: AudioBuffer) -> None:
    pcm = np.clip(np.round(audio.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(audio.sample_rate)
        w.writeframes(pcm.tobytes())


def frame_params(sample_rate: int) -> tuple[int, int, int]:
    """(window length, hop, FFT size) in samples."""
    win = sample_rate * WINDOW_MS // 1000
    hop = sample_rate * HOP_MS // 1000
    n_fft = 1 << (win - 1).bit_length()
    return win, hop, n_fft


def hamming(n: int) -> np.ndarray:
    k = np.arange(n, dtype=DTYPE)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))


def stft(audio: AudioBuffer) -> np.ndarray:
    """Power spectrogram, shape (frames, n_fft // 2 + 1)."""
    win, hop, n_fft = frame_params(audio.sample_rate)
    x = audio.samples
    if len(x) < win:
        raise DataError(f"audio too short: {len(x)} samples, one window needs {win}")
    frames = np.lib.stride_tricks.sliding_window_view(x, win)[::hop]
    spec = np.fft.rfft(frames * hamming(win), n=n_fft, axis=1)
    return spec.real ** 2 + spec.imag ** 2


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=DTYPE) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=DTYPE) / 2595.0) - 1.0)


def mel_design(sample_rate: int, n_fft: int, n_filters: int = N_MELS) -> MelFilterbank:
    """Unit-peak triangles with centres evenly spaced in mel between 0 and Nyquist.

    Neighbouring triangles are complementary, so the per-bin sum never exceeds 1.
    """
    if n_filters < 1:
        raise ShapeError("n_filters must be at least 1")
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_filters + 2))
    bins = np.arange(n_fft // 2 + 1, dtype=DTYPE) * sample_rate / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (bins - lo) / (mid - lo)
    down = (hi - bins) / (hi - mid)
    weights = np.maximum(0.0, np.minimum(up, down))
    empty = np.flatnonzero(weights.sum(axis=1) == 0)
    if empty.size:
        raise ShapeError(f"{n_filters} mel filters too many for a {n_fft}-point FFT: "
                         f"filter {int(empty[0])} covers no bin")
    return MelFilterbank(weights, edges[1:-1].copy(), sample_rate, n_fft)


def log_mel(power: np.ndarray, bank: MelFilterbank, mean_norm: bool = False) -> np.ndarray:
    """Log band energies, shape (n_filters, frames)."""
    if power.shape[-1] != bank.weights.shape[1]:
        raise ShapeError(f"spectrogram has {power.shape[-1]} bins, filterbank expects "
                         f"{bank.weights.shape[1]}")
    feat = np.log(np.maximum(bank.weights @ power.T, LOG_FLOOR))
    if mean_norm:
        feat = feat - feat.mean(axis=1, keepdims=True)
    return feat


def wav_features(audio: AudioBuffer, n_mels: int = N_MELS, mean_norm: bool = False) -> np.ndarray:
    _, _, n_fft = frame_params(audio.sample_rate)
    return log_mel(stft(audio), mel_design(audio.sample_rate, n_fft, n_mels), mean_norm)


def stack_context(feat: np.ndarray, left: int = CONTEXT, right: int = CONTEXT) -> np.ndarray:
    """One ``(n_mels, left + right + 1, 1)`` window per frame, edges replicated.

    Returns an array of shape ``(frames, n_mels, left + right + 1, 1)``.
    """
    if feat.ndim != 2 or feat.shape[1] == 0:
        raise DataError("stack_context needs at least one frame")
    padded = pad_time_replicate(feat[:, :, None], left, right)[:, :, 0]
    win = np.lib.stride_tricks.sliding_window_view(padded, left + right + 1, axis=1)
    # win: (n_mels, frames, width) -> (frames, n_mels, width, 1)
    return np.ascontiguousarray(win.transpose(1, 0, 2))[..., None]


def feature_csv_lines(utt_id: str, feat: np.ndarray) -> list[str]:
    return [",".join([utt_id, str(t)] + [repr(float(v)) for v in feat[:, t]])
            for t in range(feat.shape[1])]


def extract_directory(wav_dir, out, expected_rate: int | None = None,
                      mean_norm: bool = False) -> list[str]:
    """Features for every ``*.wav`` under ``wav_dir`` (sorted by name).

    Writes the archive to ``out`` and a CSV (``utt_id,frame,mel0..``) next to it.
    Returns the utterance ids.
    """
    paths = sorted(Path(wav_dir).glob("*.wav"))
    if not paths:
        raise DataError(f"{wav_dir}: no .wav files")
    entries, lines = [], []
    for p in paths:
        audio = read_wav(p)
        if expected_rate is not None and audio.sample_rate != expected_rate:
            raise DataError(f"{p}: sample rate {audio.sample_rate}, expected {expected_rate}")
        feat = wav_features(audio, mean_norm=mean_norm)
        entries.append((p.stem, feat[:, :, None]))
        lines += feature_csv_lines(p.stem, feat)
    out = Path(out)
    save_archive(out, entries)
    header = "utt_id,frame," + ",".join(f"mel{i}" for i in range(N_MELS))
    out.with_suffix(".csv").write_text("\n".join([header] + lines) + "\n")
    return [k for k, _ in entries]
