import math
import wave
from pathlib import Path

import numpy as np
import pytest

from impnet import features as fe
from impnet.errors import DataError, ShapeError
from impnet.tensor import load_archive, load_tensor

DATA = Path(__file__).parent / "data"
TONE = DATA / "tone_1k_16k.wav"


def write_raw(path, frames: bytes, channels=1, width=2, rate=16000):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(frames)


def test_read_zero_file(tmp_path):
    write_raw(tmp_path / "z.wav", b"\0\0" * 160)
    a = fe.read_wav(tmp_path / "z.wav")
    assert a.sample_rate == 16000 and a.samples.tolist() == [0.0] * 160


def test_read_min_sample_scales_to_minus_one(tmp_path):
    write_raw(tmp_path / "m.wav", np.array([-32768, 16384], "<i2").tobytes())
    assert fe.read_wav(tmp_path / "m.wav").samples.tolist() == [-1.0, 0.5]


def test_read_rejects_stereo_and_bad_files(tmp_path):
    write_raw(tmp_path / "s.wav", b"\0\0" * 320, channels=2)
    with pytest.raises(DataError, match="non-mono"):
        fe.read_wav(tmp_path / "s.wav")
    write_raw(tmp_path / "b.wav", b"\0" * 160, width=1)
    with pytest.raises(DataError, match="unsupported"):
        fe.read_wav(tmp_path / "b.wav")
    (tmp_path / "x.wav").write_bytes(b"RIFFnope")
    with pytest.raises(DataError):
        fe.read_wav(tmp_path / "x.wav")
    with pytest.raises(DataError):
        fe.AudioBuffer(np.zeros(10), 44100)


def test_frame_params():
    assert fe.frame_params(16000) == (400, 160, 512)
    assert fe.frame_params(8000) == (200, 80, 256)


def test_hamming_coefficients():
    w = fe.hamming(400)
    assert w[0] == pytest.approx(0.08, abs=1e-15) and w[-1] == pytest.approx(0.08, abs=1e-15)
    assert np.max(np.abs(w - w[::-1])) <= 1e-15


def test_stft_zero_and_too_short():
    assert not fe.stft(fe.AudioBuffer(np.zeros(16000), 16000)).any()
    with pytest.raises(DataError):
        fe.stft(fe.AudioBuffer(np.zeros(399), 16000))


def test_tone_bin_and_frame_count():
    p = fe.stft(fe.read_wav(TONE))
    assert p.shape == (98, 257)
    assert set(np.argmax(p, axis=1)) == {round(1000 * 512 / 16000)}


def test_stft_power_scales_quadratically(rng):
    x = rng.standard_normal(4000) * 0.1
    a = fe.stft(fe.AudioBuffer(x, 16000))
    b = fe.stft(fe.AudioBuffer(3.0 * x, 16000))
    assert np.max(np.abs(b - 9.0 * a) / np.maximum(9.0 * a, 1e-300)) <= 1e-9


def test_mel_scale():
    assert fe.hz_to_mel(700.0) == pytest.approx(781.17, abs=0.01)
    assert fe.hz_to_mel(0.0) == 0.0
    assert fe.mel_to_hz(fe.hz_to_mel(1234.5)) == pytest.approx(1234.5, rel=1e-12)


def test_mel_design_properties():
    bank = fe.mel_design(16000, 512)
    assert bank.weights.shape == (40, 257)
    assert np.all(bank.weights.sum(axis=0) <= 1 + 1e-12)
    assert np.all(np.diff(bank.centers_hz) > 0)
    with pytest.raises(ShapeError):
        fe.mel_design(8000, 256, 200)


def test_log_mel_floor_and_tone():
    bank = fe.mel_design(16000, 512)
    assert np.all(fe.log_mel(np.zeros((3, 257)), bank) == math.log(1e-10))
    audio = fe.read_wav(TONE)
    feat = fe.log_mel(fe.stft(audio), bank)
    band = int(np.argmax(feat[:, 50]))
    lo = fe.mel_to_hz(np.linspace(0, fe.hz_to_mel(8000), 42))[band]
    hi = fe.mel_to_hz(np.linspace(0, fe.hz_to_mel(8000), 42))[band + 2]
    assert lo < 1000 < hi
    louder = fe.log_mel(fe.stft(fe.AudioBuffer(2 * audio.samples, 16000)), bank)
    assert louder[band] - feat[band] == pytest.approx(np.full(98, math.log(4)), abs=1e-9)


def test_log_mel_bin_mismatch():
    with pytest.raises(ShapeError):
        fe.log_mel(np.zeros((2, 100)), fe.mel_design(16000, 512))


def test_stack_context_examples(rng):
    one = rng.standard_normal((40, 1))
    w = fe.stack_context(one)
    assert w.shape == (1, 40, 21, 1)
    assert np.all(w[0, :, :, 0] == one)
    feat = rng.standard_normal((40, 30))
    w = fe.stack_context(feat)
    assert len(w) == 30
    assert np.array_equal(w[10, :, :, 0], feat[:, 0:21])
    for t in range(10, 20):
        assert np.array_equal(w[t, :, :, 0], feat[:, t - 10:t + 11])
    with pytest.raises(DataError):
        fe.stack_context(np.zeros((40, 0)))


def test_golden_feature_dump():
    a = fe.wav_features(fe.read_wav(TONE))
    b = fe.wav_features(fe.read_wav(TONE))
    assert a.tobytes() == b.tobytes()
    assert np.array_equal(a[:, :, None], load_tensor(DATA / "tone_1k_16k_features.impt"))


def test_extract_directory(tmp_path):
    d = tmp_path / "wavs"
    d.mkdir()
    (d / "b.wav").write_bytes(TONE.read_bytes())
    (d / "a.wav").write_bytes(TONE.read_bytes())
    ids = fe.extract_directory(d, tmp_path / "feat.impf")
    assert ids == ["a", "b"]
    entries = load_archive(tmp_path / "feat.impf")
    assert [k for k, _ in entries] == ["a", "b"] and entries[0][1].shape == (40, 98, 1)
    lines = (tmp_path / "feat.csv").read_text().splitlines()
    assert lines[0] == "utt_id,frame," + ",".join(f"mel{i}" for i in range(40))
    assert len(lines) == 1 + 2 * 98
    with pytest.raises(DataError):
        fe.extract_directory(d, tmp_path / "x.impf", expected_rate=8000)
