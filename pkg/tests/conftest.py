from pathlib import Path

import numpy as np
import pytest

from elign.audio import Waveform

SR = 16000


def sine(freq_hz, duration_s, sr=SR, amp=1.0, phase=0.0):
    t = np.arange(int(round(duration_s * sr))) / sr
    return amp * np.sin(2 * np.pi * freq_hz * t + phase)


def harmonic_tone(f0_hz, duration_s, sr=SR, amp=0.6, n_harmonics=3):
    """Decaying-harmonic tone, a rough stand-in for voiced speech."""
    t = np.arange(int(round(duration_s * sr))) / sr
    x = np.zeros_like(t)
    for h in range(1, n_harmonics + 1):
        x += (amp / h) * np.sin(2 * np.pi * f0_hz * h * t)
    peak = np.max(np.abs(x))
    return x * (amp / peak) if peak > 0 else x


def pulse_train(f0_hz, duration_s, sr=SR, amp=0.8):
    """Impulse train with a short decay per pulse, EL-buzzer surrogate."""
    n = int(round(duration_s * sr))
    x = np.zeros(n)
    period = sr / f0_hz
    k = 0
    while True:
        i = int(round(k * period))
        if i >= n:
            break
        tail = min(20, n - i)
        x[i : i + tail] += amp * np.exp(-np.arange(tail) / 4.0)
        k += 1
    return x


def make_wave(samples, sr=SR):
    return Waveform(samples=np.asarray(samples, dtype=np.float64), sample_rate=sr)


def pseudo_utterance(seed, sr=SR, n_segments=8, silence_ms=150):
    """Speech-like fixture: harmonic segments of varying f0/amplitude with
    short pauses in between. Enough temporal structure for DTW to latch onto."""
    rng = np.random.default_rng(seed)
    parts = []
    for _ in range(n_segments):
        f0 = float(rng.uniform(90, 280))
        dur = float(rng.uniform(0.15, 0.35))
        amp = float(rng.uniform(0.3, 0.8))
        parts.append(harmonic_tone(f0, dur, sr=sr, amp=amp, n_harmonics=4))
        parts.append(np.zeros(int(sr * silence_ms / 1000)))
    x = np.concatenate(parts[:-1])  # no trailing pause
    return make_wave(x, sr)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def build_corpus(root, n_content=2, n_el=2, n_he=3, duration=0.9, seed0=100):
    """Write a small synthetic parallel corpus and its JSONL manifest.

    Returns the manifest path. Utterance ids follow
    <condition>_<content>_<k>; every content id gets n_el EL and n_he HE
    takes."""
    import json

    from elign.audio import save_wav

    root = Path(root)
    audio_dir = root / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    records = []
    seed = seed0
    for c in range(n_content):
        content = f"sent{c:03d}"
        for cond, n, stype in (("EL", n_el, "pseudo_el"), ("HE", n_he, "he")):
            for k in range(n):
                utt = f"{cond.lower()}_{content}_{k}"
                w = pseudo_utterance(seed, n_segments=3, silence_ms=120)
                seed += 1
                path = audio_dir / f"{utt}.wav"
                save_wav(w, path, encoding="pcm16")
                records.append(
                    {
                        "utt_id": utt,
                        "speaker_id": f"spk_{cond.lower()}{k}",
                        "content_id": content,
                        "condition": cond,
                        "speaker_type": stype,
                        "audio_path": str(path),
                        "transcript": f"satz nummer {c}",
                    }
                )
    manifest = root / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")
    return manifest
