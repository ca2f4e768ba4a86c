"""Noise injection at controlled SNR: randomized augmentation for training
sets and deterministic SNR sweeps for the robustness harness.

All randomness is drawn from per-file generators seeded with (seed, index),
so outputs do not depend on worker count or completion order."""

from __future__ import annotations

import csv
import json
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import Waveform, load_wav, resample, save_wav

NOISE_CLASSES = ("quasi_stationary", "non_stationary")
DEFAULT_SNR_GRID = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)


@dataclass
class NoiseEntry:
    name: str
    label: str  # quasi_stationary | non_stationary
    wave: Waveform


@dataclass
class NoiseBank:
    entries: list

    def __post_init__(self):
        if not self.entries:
            raise ValueError("noise bank is empty")
        rates = {e.wave.sample_rate for e in self.entries}
        if len(rates) != 1:
            raise ValueError(f"noise bank mixes sample rates: {sorted(rates)}")

    def by_class(self, label: str) -> list:
        picked = [e for e in self.entries if e.label == label]
        if not picked:
            raise ValueError(f"no noise of class {label!r} in bank")
        return picked


def load_noise_bank(root, sample_rate: int) -> NoiseBank:
    """Load <root>/<class>/*.wav trees, resampling to the working rate."""
    root = Path(root)
    entries = []
    for label in NOISE_CLASSES:
        class_dir = root / label
        if not class_dir.is_dir():
            continue
        for path in sorted(class_dir.glob("*.wav")):
            w = load_wav(path)
            if w.sample_rate != sample_rate:
                w = resample(w, sample_rate)
            if np.sqrt(np.mean(w.samples**2)) <= 0:
                continue
            entries.append(NoiseEntry(name=f"{label}/{path.name}", label=label, wave=w))
    return NoiseBank(entries=entries)


@dataclass
class AugmentPolicy:
    probability: float = 0.3
    snr_min_db: float = 3.0
    snr_max_db: float = 30.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must be in [0, 1]")
        if self.snr_min_db > self.snr_max_db:
            raise ValueError("snr_min_db must be <= snr_max_db")


@dataclass
class MixInfo:
    gain: float
    offset: int
    peak_scale: float  # 1.0 unless the mixture had to be scaled down

    def measured_snr_db(self, clean: Waveform, noise_segment: np.ndarray) -> float:
        """Recompute the achieved SNR from the stored gain; peak scaling hits
        numerator and denominator alike so it cancels."""
        rms_c = np.sqrt(np.mean(clean.samples**2))
        rms_n = np.sqrt(np.mean((self.gain * noise_segment) ** 2))
        return float(20.0 * np.log10(rms_c / rms_n))


def crop_or_tile(noise: np.ndarray, length: int, offset: int) -> np.ndarray:
    """Take length samples starting at offset, wrapping around the noise."""
    if len(noise) == 0:
        raise ValueError("empty noise buffer")
    idx = (offset + np.arange(length)) % len(noise)
    return noise[idx]


def mix_at_snr(
    clean: Waveform, noise: Waveform, snr_db: float, offset: int = 0
) -> tuple[Waveform, MixInfo]:
    """Add noise to clean at exactly snr_db.

    The noise is cropped or tiled to the clean length from the given offset
    and scaled so 10*log10(rms(clean)^2 / rms(g*noise)^2) == snr_db. If the
    mixture exceeds full scale it is scaled down as a whole (never clipped),
    which leaves the SNR untouched."""
    if clean.sample_rate != noise.sample_rate:
        raise ValueError("clean and noise must share a sample rate")
    rms_clean = np.sqrt(np.mean(clean.samples**2))
    if rms_clean <= 0:
        raise ValueError("clean signal has zero RMS")
    seg = crop_or_tile(noise.samples, len(clean), offset)
    rms_noise = np.sqrt(np.mean(seg**2))
    if rms_noise <= 0:
        raise ValueError("noise segment has zero RMS")
    gain = rms_clean / (rms_noise * 10.0 ** (snr_db / 20.0))
    mixture = clean.samples + gain * seg
    peak = float(np.max(np.abs(mixture)))
    peak_scale = 1.0
    if peak > 1.0:
        peak_scale = 1.0 / peak
        mixture = mixture * peak_scale
    return Waveform(samples=mixture, sample_rate=clean.sample_rate), MixInfo(
        gain=gain, offset=offset, peak_scale=peak_scale
    )


def plan_augmentation(n_files: int, bank_size: int, policy: AugmentPolicy) -> list[dict]:
    """Per-file augmentation decisions, independent of execution order.

    File k uses default_rng((seed, k)); the draws are: augment?, noise index,
    SNR, crop offset fraction."""
    plans = []
    for k in range(n_files):
        rng = np.random.default_rng((policy.seed, k))
        augment = bool(rng.random() < policy.probability)
        noise_idx = int(rng.integers(0, bank_size))
        snr_db = float(rng.uniform(policy.snr_min_db, policy.snr_max_db))
        offset_frac = float(rng.random())
        plans.append(
            {"index": k, "augment": augment, "noise_idx": noise_idx, "snr_db": snr_db, "offset_frac": offset_frac}
        )
    return plans


def augment_batch(files: list, bank: NoiseBank, policy: AugmentPolicy, out_dir) -> list[dict]:
    """Augment ~probability of the files, copy the rest through unchanged.

    Writes one output per input file into out_dir plus a JSONL log recording
    exactly what was done, so a run can be reproduced or audited."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plans = plan_augmentation(len(files), len(bank.entries), policy)
    log = []
    for path, plan in zip(files, plans):
        path = Path(path)
        out_path = out_dir / path.name
        entry = {"file": path.name, "augmented": False}
        try:
            if plan["augment"]:
                clean = load_wav(path)
                noise = bank.entries[plan["noise_idx"]]
                if noise.wave.sample_rate != clean.sample_rate:
                    raise ValueError(
                        f"noise bank rate {noise.wave.sample_rate} != file rate {clean.sample_rate}"
                    )
                offset = int(plan["offset_frac"] * len(noise.wave))
                mixed, info = mix_at_snr(clean, noise.wave, plan["snr_db"], offset=offset)
                save_wav(mixed, out_path, encoding="pcm16")
                entry.update(
                    {
                        "augmented": True,
                        "noise_source": noise.name,
                        "snr_db": plan["snr_db"],
                        "offset": info.offset,
                        "gain": info.gain,
                        "peak_scale": info.peak_scale,
                    }
                )
            else:
                shutil.copyfile(path, out_path)
        except Exception as e:  # keep the batch going
            entry["error"] = f"{type(e).__name__}: {e}"
        log.append(entry)

    with open(out_dir / "augment_log.jsonl", "w", encoding="utf-8") as f:
        for entry in log:
            f.write(json.dumps(entry, sort_keys=True) + "\n")
    return log


def snr_sweep(
    inputs: list,
    bank: NoiseBank,
    out_dir,
    snr_grid=DEFAULT_SNR_GRID,
    classes=NOISE_CLASSES,
    seed: int = 0,
) -> Path:
    """One noisy variant per input x SNR x noise class, plus an index CSV
    (input_id,class,snr_db,path) for downstream transcription."""
    if not list(snr_grid):
        raise ValueError("empty SNR grid")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index_path = out_dir / "index.csv"
    rows = []
    for i, path in enumerate(inputs):
        path = Path(path)
        clean = load_wav(path)
        input_id = path.stem
        for class_idx, label in enumerate(classes):
            pool = bank.by_class(label)
            for snr_db in snr_grid:
                rng = np.random.default_rng((seed, i, class_idx, int(round(snr_db * 100))))
                noise = pool[int(rng.integers(0, len(pool)))]
                offset = int(rng.random() * len(noise.wave))
                mixed, _ = mix_at_snr(clean, noise.wave, float(snr_db), offset=offset)
                name = f"{input_id}__{label}__snr{snr_db:g}.wav"
                save_wav(mixed, out_dir / name, encoding="pcm16")
                rows.append((input_id, label, f"{snr_db:g}", str(out_dir / name)))
    with open(index_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["input_id", "class", "snr_db", "path"])
        writer.writerows(rows)
    return index_path
