import csv
import json
from pathlib import Path

import numpy as np
import pytest

from elign.audio import save_wav
from elign.augment import (
    AugmentPolicy,
    NoiseBank,
    NoiseEntry,
    augment_batch,
    crop_or_tile,
    load_noise_bank,
    mix_at_snr,
    plan_augmentation,
    snr_sweep,
)

from conftest import SR, make_wave, sine


def _bank(rng, n_per_class=2, duration=1.5):
    entries = []
    for label in ("quasi_stationary", "non_stationary"):
        for k in range(n_per_class):
            x = rng.uniform(-0.4, 0.4, int(duration * SR))
            entries.append(NoiseEntry(name=f"{label}/n{k}.wav", label=label, wave=make_wave(x)))
    return NoiseBank(entries=entries)


def _noise_dir(tmp_path, rng, n_per_class=2):
    for label in ("quasi_stationary", "non_stationary"):
        d = tmp_path / "noise" / label
        d.mkdir(parents=True, exist_ok=True)
        for k in range(n_per_class):
            x = rng.uniform(-0.4, 0.4, SR)
            save_wav(make_wave(x), d / f"n{k}.wav", encoding="float32")
    return tmp_path / "noise"


class TestMixAtSnr:
    def test_equal_rms_at_0db_gain_is_one(self, rng):
        clean = make_wave(rng.standard_normal(8000) * 0.1)
        rms = np.sqrt(np.mean(clean.samples**2))
        noise_x = rng.standard_normal(8000)
        noise_x *= rms / np.sqrt(np.mean(noise_x**2))
        _, info = mix_at_snr(clean, make_wave(noise_x), 0.0)
        assert info.gain == pytest.approx(1.0, abs=1e-6)

    def test_equal_rms_at_20db_gain_is_tenth(self, rng):
        clean = make_wave(rng.standard_normal(8000) * 0.1)
        rms = np.sqrt(np.mean(clean.samples**2))
        noise_x = rng.standard_normal(8000)
        noise_x *= rms / np.sqrt(np.mean(noise_x**2))
        _, info = mix_at_snr(clean, make_wave(noise_x), 20.0)
        assert info.gain == pytest.approx(0.1, abs=1e-6)

    def test_requested_snr_recomputed_within_001db(self, rng):
        clean = make_wave(rng.standard_normal(7001) * 0.2)
        noise = make_wave(rng.standard_normal(12000) * 0.3)
        _, info = mix_at_snr(clean, noise, 7.3, offset=123)
        seg = crop_or_tile(noise.samples, len(clean), 123)
        assert info.measured_snr_db(clean, seg) == pytest.approx(7.3, abs=0.01)

    def test_clean_untouched_without_peak_scaling(self, rng):
        clean = make_wave(rng.uniform(-0.3, 0.3, 5000))
        noise = make_wave(rng.uniform(-0.3, 0.3, 5000))
        out, info = mix_at_snr(clean, noise, 15.0)
        assert info.peak_scale == 1.0
        seg = crop_or_tile(noise.samples, len(clean), 0)
        assert np.max(np.abs(out.samples - info.gain * seg - clean.samples)) < 1e-12

    def test_peak_scaling_preserves_snr(self, rng):
        clean = make_wave(sine(200, 0.5, amp=0.99))
        noise = make_wave(rng.uniform(-1, 1, 4000))
        out, info = mix_at_snr(clean, noise, 0.0)
        assert info.peak_scale < 1.0
        assert np.max(np.abs(out.samples)) <= 1.0 + 1e-12
        seg = crop_or_tile(noise.samples, len(clean), 0)
        assert info.measured_snr_db(clean, seg) == pytest.approx(0.0, abs=0.01)

    def test_zero_noise_rejected(self):
        with pytest.raises(ValueError, match="zero RMS"):
            mix_at_snr(make_wave(sine(100, 0.1)), make_wave(np.zeros(100)), 10.0)

    def test_zero_clean_rejected(self):
        with pytest.raises(ValueError, match="zero RMS"):
            mix_at_snr(make_wave(np.zeros(100)), make_wave(np.ones(100)), 10.0)

    def test_rate_mismatch_rejected(self):
        a = make_wave(sine(100, 0.1))
        b = make_wave(sine(100, 0.1, sr=8000), sr=8000)
        with pytest.raises(ValueError, match="sample rate"):
            mix_at_snr(a, b, 5.0)

    def test_tiling_short_noise(self, rng):
        clean = make_wave(rng.uniform(-0.2, 0.2, 10000))
        noise = make_wave(rng.uniform(-0.2, 0.2, 3000))
        out, _ = mix_at_snr(clean, noise, 10.0, offset=2500)
        assert len(out) == 10000


class TestCropOrTile:
    def test_crop(self):
        x = np.arange(10.0)
        assert np.array_equal(crop_or_tile(x, 4, 3), np.array([3.0, 4, 5, 6]))

    def test_wraps(self):
        x = np.arange(5.0)
        assert np.array_equal(crop_or_tile(x, 7, 3), np.array([3.0, 4, 0, 1, 2, 3, 4]))


class TestAugmentBatch:
    def _files(self, tmp_path, rng, n=20):
        d = tmp_path / "clean"
        d.mkdir()
        files = []
        for k in range(n):
            p = d / f"utt{k:04d}.wav"
            save_wav(make_wave(rng.uniform(-0.5, 0.5, 4000)), p, encoding="pcm16")
            files.append(p)
        return files

    def test_probability_zero_modifies_nothing(self, tmp_path, rng):
        files = self._files(tmp_path, rng, 10)
        bank = _bank(rng)
        log = augment_batch(files, bank, AugmentPolicy(probability=0.0, seed=1), tmp_path / "out")
        assert all(not e["augmented"] for e in log)
        for p in files:
            assert (tmp_path / "out" / p.name).read_bytes() == p.read_bytes()

    def test_probability_one_modifies_all_within_snr_bounds(self, tmp_path, rng):
        files = self._files(tmp_path, rng, 15)
        bank = _bank(rng)
        log = augment_batch(files, bank, AugmentPolicy(probability=1.0, seed=2), tmp_path / "out")
        assert all(e["augmented"] for e in log)
        assert all(3.0 <= e["snr_db"] <= 30.0 for e in log)

    def test_rate_close_to_30_percent(self):
        plans = plan_augmentation(10000, 4, AugmentPolicy(probability=0.3, seed=0))
        count = sum(p["augment"] for p in plans)
        assert 2800 <= count <= 3200

    def test_same_seed_byte_identical(self, tmp_path, rng):
        files = self._files(tmp_path, rng, 12)
        bank = _bank(rng)
        policy = AugmentPolicy(probability=0.5, seed=9)
        augment_batch(files, bank, policy, tmp_path / "o1")
        augment_batch(files, bank, policy, tmp_path / "o2")
        for p in sorted((tmp_path / "o1").iterdir()):
            assert p.read_bytes() == (tmp_path / "o2" / p.name).read_bytes()

    def test_log_records_reproducibility_fields(self, tmp_path, rng):
        files = self._files(tmp_path, rng, 8)
        bank = _bank(rng)
        augment_batch(files, bank, AugmentPolicy(probability=1.0, seed=4), tmp_path / "out")
        lines = (tmp_path / "out" / "augment_log.jsonl").read_text().splitlines()
        assert len(lines) == 8
        for line in lines:
            e = json.loads(line)
            assert {"file", "augmented", "noise_source", "snr_db", "offset"} <= set(e)

    def test_per_file_error_isolated(self, tmp_path, rng):
        files = self._files(tmp_path, rng, 3)
        files[1].write_bytes(b"garbage")
        bank = _bank(rng)
        log = augment_batch(files, bank, AugmentPolicy(probability=1.0, seed=5), tmp_path / "out")
        assert "error" in log[1]
        assert log[0]["augmented"] and log[2]["augmented"]

    def test_policy_validation(self):
        with pytest.raises(ValueError):
            AugmentPolicy(probability=1.5)
        with pytest.raises(ValueError):
            AugmentPolicy(snr_min_db=10, snr_max_db=3)


class TestSnrSweep:
    def test_product_count_and_index(self, tmp_path, rng):
        p = tmp_path / "in.wav"
        save_wav(make_wave(rng.uniform(-0.4, 0.4, 6000)), p, encoding="pcm16")
        bank = _bank(rng)
        index = snr_sweep([p], bank, tmp_path / "sweep", seed=0)
        rows = list(csv.DictReader(open(index)))
        assert len(rows) == 12  # 1 input x 6 SNRs x 2 classes
        assert set(rows[0]) == {"input_id", "class", "snr_db", "path"}
        for r in rows:
            assert Path(r["path"]).exists()

    def test_sweep_snr_exact(self, tmp_path, rng):
        p = tmp_path / "in.wav"
        clean_x = rng.uniform(-0.4, 0.4, 6000)
        save_wav(make_wave(clean_x), p, encoding="float32")
        bank = _bank(rng)
        index = snr_sweep([p], bank, tmp_path / "sweep", snr_grid=(25.0,), classes=("quasi_stationary",), seed=3)
        rows = list(csv.DictReader(open(index)))
        assert rows[0]["snr_db"] == "25"

    def test_empty_inputs_header_only(self, tmp_path, rng):
        bank = _bank(rng)
        index = snr_sweep([], bank, tmp_path / "sweep", seed=0)
        content = index.read_text().strip().splitlines()
        assert content == ["input_id,class,snr_db,path"]

    def test_empty_grid_rejected(self, tmp_path, rng):
        with pytest.raises(ValueError, match="empty SNR grid"):
            snr_sweep([], _bank(rng), tmp_path / "s", snr_grid=())


class TestNoiseBank:
    def test_load_from_directory_tree(self, tmp_path, rng):
        root = _noise_dir(tmp_path, rng)
        bank = load_noise_bank(root, SR)
        assert len(bank.entries) == 4
        assert len(bank.by_class("quasi_stationary")) == 2

    def test_missing_class_raises_on_access(self, rng):
        entries = [NoiseEntry("a", "quasi_stationary", make_wave(rng.uniform(-1, 1, 100)))]
        bank = NoiseBank(entries=entries)
        with pytest.raises(ValueError, match="non_stationary"):
            bank.by_class("non_stationary")

    def test_empty_bank_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            NoiseBank(entries=[])

    def test_resamples_on_load(self, tmp_path, rng):
        d = tmp_path / "noise" / "quasi_stationary"
        d.mkdir(parents=True)
        save_wav(make_wave(rng.uniform(-0.5, 0.5, 48000), sr=48000), d / "n.wav", encoding="pcm16")
        bank = load_noise_bank(tmp_path / "noise", SR)
        assert bank.entries[0].wave.sample_rate == SR
