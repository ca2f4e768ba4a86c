"""Mono waveform type, RIFF/WAVE I/O and band-limited resampling.

Readers accept PCM16 and IEEE float32, mono or multichannel (downmixed by
channel mean). Writers emit mono PCM16 or float32. The canonical processing
rate for the rest of the toolkit is 16 kHz.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

CANONICAL_RATE = 16000

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class AudioFormatError(ValueError):
    """Raised for unreadable or unsupported WAVE files."""


@dataclass
class Waveform:
    """Mono sample buffer in [-1, 1] with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform contains NaN or Inf")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        self.samples = s
        self.sample_rate = int(self.sample_rate)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate


def _iter_chunks(raw: bytes):
    pos = 12
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        yield cid, body
        pos += 8 + size + (size & 1)  # chunks are word-aligned


def load_wav(path) -> Waveform:
    """Read a RIFF/WAVE file as a mono waveform.

    Multichannel input is downmixed by the channel mean; PCM16 samples are
    scaled by 1/32768 so full-scale maps into [-1, 1).
    """
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise AudioFormatError(f"cannot read {path}: {e}") from e
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    for cid, body in _iter_chunks(raw):
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            data = body
    if fmt is None or len(fmt) < 16:
        raise AudioFormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise AudioFormatError(f"{path}: missing data chunk")

    audio_format, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if audio_format == _WAVE_FORMAT_EXTENSIBLE and len(fmt) >= 40:
        # sub-format GUID starts with the plain format code
        (audio_format,) = struct.unpack_from("<H", fmt, 24)
    if channels < 1:
        raise AudioFormatError(f"{path}: zero channels")

    if audio_format == _WAVE_FORMAT_PCM and bits == 16:
        flat = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        flat = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise AudioFormatError(
            f"{path}: unsupported encoding (format {audio_format}, {bits} bits); "
            "expected PCM16 or IEEE float32"
        )

    n = len(flat) // channels
    if n == 0:
        raise AudioFormatError(f"{path}: zero-length audio")
    flat = flat[: n * channels]
    samples = flat.reshape(n, channels).mean(axis=1) if channels > 1 else flat
    if not np.all(np.isfinite(samples)):
        raise AudioFormatError(f"{path}: non-finite samples")
    return Waveform(samples=samples, sample_rate=rate)


def save_wav(w: Waveform, path, encoding: str = "pcm16") -> None:
    """Write a mono WAVE file.

    Over-range samples are saturated to +/-1.0 (augmentation mixes can
    transiently exceed full scale); the clipped count is logged.
    """
    if encoding not in ("pcm16", "float32"):
        raise ValueError(f"unknown encoding {encoding!r}")
    x = np.asarray(w.samples, dtype=np.float64)
    clipped = int(np.count_nonzero(np.abs(x) > 1.0))
    if clipped:
        log.warning("%s: saturating %d over-range samples to +/-1.0", path, clipped)
        x = np.clip(x, -1.0, 1.0)

    if encoding == "pcm16":
        q = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        payload = q.tobytes()
        fmt_chunk = struct.pack(
            "<HHIIHH", _WAVE_FORMAT_PCM, 1, w.sample_rate, w.sample_rate * 2, 2, 16
        )
        chunks = [(b"fmt ", fmt_chunk), (b"data", payload)]
    else:
        payload = x.astype("<f4").tobytes()
        fmt_chunk = struct.pack(
            "<HHIIHH", _WAVE_FORMAT_IEEE_FLOAT, 1, w.sample_rate, w.sample_rate * 4, 4, 32
        )
        fact_chunk = struct.pack("<I", len(x))
        chunks = [(b"fmt ", fmt_chunk), (b"fact", fact_chunk), (b"data", payload)]

    body = b""
    for cid, chunk in chunks:
        body += cid + struct.pack("<I", len(chunk)) + chunk
        if len(chunk) & 1:
            body += b"\x00"
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body)


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Windowed-sinc resampling to target_rate.

    Kaiser-windowed sinc kernel, 64 taps at the identity rate, widened by the
    decimation factor when downsampling so the anti-alias cutoff sits at the
    output Nyquist. Duration is preserved within one output sample.
    """
    if not target_rate > 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == w.sample_rate:
        return Waveform(samples=w.samples.copy(), sample_rate=target_rate)

    x = w.samples
    ratio = target_rate / w.sample_rate
    n_out = int(round(len(x) * ratio))
    if n_out == 0:
        return Waveform(samples=np.zeros(0), sample_rate=target_rate)

    nu = min(1.0, ratio)  # cutoff as a fraction of the input Nyquist
    half = 32.0 / nu
    taps = 2 * int(np.ceil(half)) + 1
    beta = 8.6
    i0_beta = np.i0(beta)

    pad = int(np.ceil(half)) + 1
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad)])

    out = np.empty(n_out, dtype=np.float64)
    block = 8192
    k_rel = np.arange(taps) - int(np.ceil(half))
    for start in range(0, n_out, block):
        j = np.arange(start, min(start + block, n_out))
        pos = j / ratio  # fractional input sample position
        base = np.floor(pos).astype(np.int64)
        frac = pos - base
        # offsets of each tap from the exact input position
        u = k_rel[None, :] - frac[:, None]
        arg = 1.0 - (u / half) ** 2
        win = np.where(arg > 0, np.i0(beta * np.sqrt(np.maximum(arg, 0.0))) / i0_beta, 0.0)
        kernel = nu * np.sinc(nu * u) * win
        idx = base[:, None] + k_rel[None, :] + pad
        out[j] = np.sum(xp[idx] * kernel, axis=1)

    return Waveform(samples=out, sample_rate=target_rate)
