import struct

import numpy as np
import pytest

from elign.audio import AudioFormatError, Waveform, load_wav, resample, save_wav

from conftest import make_wave, sine


def _write_raw_wav(path, data_bytes, audio_format, channels, rate, bits):
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", audio_format, channels, rate, rate * block, block, bits)
    body = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(data_bytes)) + data_bytes
    if len(data_bytes) & 1:
        body += b"\x00"
    path.write_bytes(b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body)


class TestLoad:
    def test_pcm16_silence(self, tmp_path):
        p = tmp_path / "s.wav"
        _write_raw_wav(p, np.zeros(16000, dtype="<i2").tobytes(), 1, 1, 16000, 16)
        w = load_wav(p)
        assert len(w) == 16000
        assert w.sample_rate == 16000
        assert np.all(w.samples == 0.0)

    def test_stereo_opposite_channels_cancel(self, tmp_path):
        p = tmp_path / "s.wav"
        x = (sine(440, 0.1) * 20000).astype("<i2")
        inter = np.empty(2 * len(x), dtype="<i2")
        inter[0::2] = x
        inter[1::2] = -x
        _write_raw_wav(p, inter.tobytes(), 1, 2, 16000, 16)
        w = load_wav(p)
        assert np.all(np.abs(w.samples) < 1e-4)

    def test_float32_at_48k(self, tmp_path):
        p = tmp_path / "f.wav"
        x = sine(440, 0.5, sr=48000).astype("<f4")
        _write_raw_wav(p, x.tobytes(), 3, 1, 48000, 32)
        w = load_wav(p)
        assert len(w) == 24000
        assert w.sample_rate == 48000

    def test_downmix_is_linear(self, tmp_path):
        rng = np.random.default_rng(0)
        a = rng.uniform(-0.5, 0.5, 800).astype("<f4")
        b = rng.uniform(-0.5, 0.5, 800).astype("<f4")
        pa, pb, pab = tmp_path / "a.wav", tmp_path / "b.wav", tmp_path / "ab.wav"
        _write_raw_wav(pa, a.tobytes(), 3, 1, 16000, 32)
        _write_raw_wav(pb, b.tobytes(), 3, 1, 16000, 32)
        inter = np.empty(1600, dtype="<f4")
        inter[0::2] = a
        inter[1::2] = b
        _write_raw_wav(pab, inter.tobytes(), 3, 2, 16000, 32)
        mean = (load_wav(pa).samples + load_wav(pb).samples) / 2
        assert np.allclose(load_wav(pab).samples, mean, atol=1e-7)

    def test_zero_length_rejected(self, tmp_path):
        p = tmp_path / "z.wav"
        _write_raw_wav(p, b"", 1, 1, 16000, 16)
        with pytest.raises(AudioFormatError, match="zero-length"):
            load_wav(p)

    def test_unsupported_encoding_rejected(self, tmp_path):
        p = tmp_path / "u.wav"
        _write_raw_wav(p, bytes(24), 1, 1, 16000, 24)
        with pytest.raises(AudioFormatError, match="unsupported"):
            load_wav(p)

    def test_not_a_wav_rejected(self, tmp_path):
        p = tmp_path / "n.wav"
        p.write_bytes(b"this is not audio")
        with pytest.raises(AudioFormatError):
            load_wav(p)


class TestSave:
    def test_float32_round_trip_identity(self, tmp_path):
        rng = np.random.default_rng(1)
        x = rng.uniform(-0.9, 0.9, 5000)
        w = make_wave(x)
        p = tmp_path / "w.wav"
        save_wav(w, p, encoding="float32")
        back = load_wav(p)
        assert np.array_equal(back.samples, x.astype(np.float32).astype(np.float64))

    def test_pcm16_quantization_bound(self, tmp_path):
        rng = np.random.default_rng(2)
        x = np.concatenate([[1.0, -1.0], rng.uniform(-1, 1, 5000)])
        p = tmp_path / "w.wav"
        save_wav(make_wave(x), p, encoding="pcm16")
        back = load_wav(p)
        assert np.max(np.abs(back.samples - x)) <= 2**-15

    def test_full_scale_pcm16(self, tmp_path):
        p = tmp_path / "w.wav"
        save_wav(make_wave([1.0]), p, encoding="pcm16")
        assert abs(load_wav(p).samples[0] - 1.0) <= 2**-15

    def test_over_range_saturates(self, tmp_path):
        p = tmp_path / "w.wav"
        save_wav(make_wave([1.5, -2.0, 0.5]), p, encoding="float32")
        back = load_wav(p)
        assert back.samples[0] == 1.0
        assert back.samples[1] == -1.0
        assert abs(back.samples[2] - 0.5) < 1e-7


class TestResample:
    def test_identity_rate(self):
        w = make_wave(sine(100, 0.5))
        out = resample(w, 16000)
        assert out.sample_rate == 16000
        rms = np.sqrt(np.mean((out.samples - w.samples) ** 2))
        assert rms < 1e-6

    def test_sine_peak_preserved_48k_to_16k(self):
        w = make_wave(sine(100, 1.0, sr=48000), sr=48000)
        out = resample(w, 16000)
        spec = np.abs(np.fft.rfft(out.samples))
        freqs = np.fft.rfftfreq(len(out.samples), 1 / 16000)
        peak_hz = freqs[np.argmax(spec)]
        assert abs(peak_hz - 100.0) <= 1.0

    def test_anti_alias_attenuates_above_target_nyquist(self):
        tone_hi = make_wave(sine(7000, 0.5))
        tone_lo = make_wave(sine(1000, 0.5))
        e_hi = np.sum(resample(tone_hi, 8000).samples ** 2)
        e_lo = np.sum(resample(tone_lo, 8000).samples ** 2)
        assert e_hi < 0.01 * e_lo

    def test_duration_preserved_within_one_output_sample(self):
        for sr_in, sr_out, n in [(48000, 16000, 12345), (16000, 22050, 4001), (8000, 16000, 777)]:
            w = Waveform(samples=np.zeros(n), sample_rate=sr_in)
            out = resample(w, sr_out)
            assert abs(out.duration_seconds - w.duration_seconds) <= 1.0 / sr_out

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            resample(make_wave([0.0]), 0)


class TestWaveform:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Waveform(samples=np.array([np.nan]), sample_rate=16000)

    def test_duration(self):
        assert make_wave(np.zeros(8000)).duration_seconds == 0.5
