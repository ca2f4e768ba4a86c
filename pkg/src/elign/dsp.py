"""Frame-level analysis: energy VAD, long-silence removal, pitch tracking,
pitch-mark placement and log-mel features.

Everything here is pure and deterministic; waveforms are shared read-only
across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import Waveform


@dataclass
class FrameSpec:
    frame_seconds: float = 0.025
    hop_seconds: float = 0.010
    window: str = "hann"

    def __post_init__(self):
        if not 0 < self.hop_seconds <= self.frame_seconds:
            raise ValueError(
                f"need 0 < hop ({self.hop_seconds}) <= frame ({self.frame_seconds})"
            )
        if self.window not in ("hann", "rect"):
            raise ValueError(f"unknown window {self.window!r}")


@dataclass
class VadResult:
    """Per-hop speech/silence labels plus merged segments tiling the input."""

    hop_seconds: float
    speech: np.ndarray  # bool per hop bin
    segments: list  # (start_s, end_s, "speech"|"silence")


@dataclass
class EditMap:
    """Which source sample ranges survived an edit, in output order.

    Consecutive kept ranges are joined with a crossfade_samples overlap-add,
    so each join shortens the output by crossfade_samples.
    """

    kept: list  # [(src_start, src_end)]
    crossfade_samples: int
    source_length: int

    @property
    def is_identity(self) -> bool:
        return self.kept == [(0, self.source_length)]

    def to_source(self, out_index: int) -> int:
        """Map an output sample index back to its source index."""
        pos = 0
        for k, (a, b) in enumerate(self.kept):
            length = b - a
            if k > 0:
                length -= self.crossfade_samples
                a += self.crossfade_samples
            if out_index < pos + length:
                return a + (out_index - pos)
            pos += length
        return self.kept[-1][1] - 1 if self.kept else 0


@dataclass
class PitchTrack:
    hop_seconds: float
    f0_hz: np.ndarray  # NaN where unvoiced
    voicing: np.ndarray  # bool

    @property
    def n_frames(self) -> int:
        return len(self.f0_hz)


@dataclass
class PitchMarks:
    """Sample indices of glottal-cycle anchors, strictly increasing."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if len(idx) > 1 and not np.all(np.diff(idx) > 0):
            raise ValueError("pitch marks must be strictly increasing")
        self.indices = idx

    def __len__(self) -> int:
        return len(self.indices)


def _frame_rms(w: Waveform, spec: FrameSpec) -> np.ndarray:
    """RMS per hop bin, measured over a frame-length window centered on the bin."""
    x = w.samples
    sr = w.sample_rate
    hop = max(1, int(round(spec.hop_seconds * sr)))
    frame = max(1, int(round(spec.frame_seconds * sr)))
    n_bins = int(np.ceil(len(x) / hop))
    rms = np.empty(n_bins)
    for i in range(n_bins):
        center = i * hop + hop // 2
        a = max(0, center - frame // 2)
        b = min(len(x), a + frame)
        seg = x[a:b]
        rms[i] = np.sqrt(np.mean(seg**2)) if len(seg) else 0.0
    return rms


def vad(
    w: Waveform,
    spec: FrameSpec | None = None,
    threshold_db: float = -40.0,
    hangover_frames: int = 5,
) -> VadResult:
    """Energy VAD relative to the utterance peak frame RMS.

    A bin is speech when its frame RMS is within threshold_db of the loudest
    frame; silence gaps shorter than hangover_frames are absorbed into speech
    so plosive closures do not fragment segments.
    """
    if len(w) == 0:
        raise ValueError("empty waveform")
    spec = spec or FrameSpec(window="rect")
    rms = _frame_rms(w, spec)
    peak = float(np.max(rms))
    if peak <= 0.0:
        speech = np.zeros(len(rms), dtype=bool)
    else:
        floor = 10 ** (threshold_db / 20.0) * peak
        speech = rms > floor
        if hangover_frames > 0 and speech.any():
            speech = _fill_short_gaps(speech, hangover_frames)
    segments = _runs_to_segments(speech, spec.hop_seconds, w.duration_seconds)
    return VadResult(hop_seconds=spec.hop_seconds, speech=speech, segments=segments)


def _fill_short_gaps(speech: np.ndarray, max_gap: int) -> np.ndarray:
    out = speech.copy()
    n = len(out)
    i = 0
    while i < n:
        if not out[i]:
            j = i
            while j < n and not out[j]:
                j += 1
            interior = i > 0 and j < n
            if interior and (j - i) < max_gap:
                out[i:j] = True
            i = j
        else:
            i += 1
    return out


def _runs_to_segments(speech: np.ndarray, hop_s: float, duration_s: float) -> list:
    segments = []
    n = len(speech)
    i = 0
    while i < n:
        j = i
        while j < n and speech[j] == speech[i]:
            j += 1
        start = i * hop_s
        end = duration_s if j == n else j * hop_s
        segments.append((start, end, "speech" if speech[i] else "silence"))
        i = j
    return segments


def remove_long_silences(
    w: Waveform,
    vad_result: VadResult,
    max_silence_ms: float = 200.0,
    crossfade_ms: float = 5.0,
) -> tuple[Waveform, EditMap]:
    """Shorten every silence segment longer than max_silence_ms to exactly that
    length, keeping half at each flank. Speech samples are never removed; cut
    points get a linear crossfade to avoid clicks."""
    sr = w.sample_rate
    max_n = int(round(max_silence_ms / 1000.0 * sr))
    fade = int(round(crossfade_ms / 1000.0 * sr))
    fade = min(fade, max(0, max_n // 2 - 1))

    kept = []
    cursor = 0
    for start_s, end_s, label in vad_result.segments:
        a = int(round(start_s * sr))
        b = int(round(end_s * sr))
        if label == "silence" and (b - a) > max_n:
            head = max_n // 2
            tail = max_n - head
            kept.append((cursor, a + head))
            cursor = b - tail
    kept.append((cursor, len(w)))
    kept = [(a, b) for a, b in kept if b > a]

    if kept == [(0, len(w))]:
        return Waveform(samples=w.samples.copy(), sample_rate=sr), EditMap(
            kept=kept, crossfade_samples=0, source_length=len(w)
        )

    pieces = [w.samples[a:b] for a, b in kept]
    out = pieces[0]
    ramp_up = np.linspace(0.0, 1.0, fade, endpoint=False) if fade else np.zeros(0)
    for piece in pieces[1:]:
        f = min(fade, len(out), len(piece))
        if f > 0:
            joined = np.concatenate([out[:-f], out[-f:] * (1 - ramp_up[:f]) + piece[:f] * ramp_up[:f], piece[f:]])
        else:
            joined = np.concatenate([out, piece])
        out = joined
    return Waveform(samples=out, sample_rate=sr), EditMap(
        kept=kept, crossfade_samples=fade, source_length=len(w)
    )


def track_pitch(
    w: Waveform,
    f0_min: float = 50.0,
    f0_max: float = 500.0,
    hop_seconds: float = 0.010,
    harmonicity_threshold: float = 0.15,
) -> PitchTrack:
    """YIN-style pitch track: cumulative-mean-normalized difference function
    per frame, absolute-threshold voicing, parabolic lag refinement."""
    sr = w.sample_rate
    if not f0_min < f0_max < sr / 2:
        raise ValueError(f"need f0_min < f0_max < sr/2, got ({f0_min}, {f0_max}) at {sr} Hz")
    x = w.samples
    hop = max(1, int(round(hop_seconds * sr)))
    tau_max = int(np.ceil(sr / f0_min))
    tau_min = max(2, int(np.floor(sr / f0_max)))
    frame_len = 2 * tau_max

    n_frames = max(1, int(np.ceil(len(x) / hop)))
    f0 = np.full(n_frames, np.nan)
    voiced = np.zeros(n_frames, dtype=bool)

    pad = frame_len - len(x)
    xp = np.concatenate([x, np.zeros(max(0, pad))])

    for i in range(n_frames):
        start = min(i * hop, max(0, len(xp) - frame_len))
        frame = xp[start : start + frame_len]
        if np.sqrt(np.mean(frame**2)) < 1e-6:
            continue
        d = _difference_function(frame, tau_max)
        cmndf = _cmndf(d)
        tau = _pick_lag(cmndf, tau_min, tau_max, harmonicity_threshold)
        if tau is None:
            continue
        tau_refined = _parabolic_refine(d, tau)
        hz = sr / tau_refined
        f0[i] = min(max(hz, f0_min), f0_max)
        voiced[i] = True

    return PitchTrack(hop_seconds=hop / sr, f0_hz=f0, voicing=voiced)


def _difference_function(frame: np.ndarray, tau_max: int) -> np.ndarray:
    """d(tau) = sum_j (x[j] - x[j+tau])^2 over the shrinking window, via FFT."""
    n = len(frame)
    tau_max = min(tau_max, n - 1)
    sq = np.concatenate([[0.0], np.cumsum(frame**2)])
    size = 1 << int(np.ceil(np.log2(2 * n)))
    fc = np.fft.rfft(frame, size)
    acf = np.fft.irfft(fc * np.conj(fc))[: tau_max + 1]
    taus = np.arange(tau_max + 1)
    # energy of x[0:n-tau] and of x[tau:n]
    e_head = sq[n - taus] - sq[0]
    e_tail = sq[n] - sq[taus]
    return e_head + e_tail - 2 * acf


def _cmndf(d: np.ndarray) -> np.ndarray:
    out = np.ones_like(d)
    denom = np.cumsum(d[1:])
    taus = np.arange(1, len(d))
    with np.errstate(divide="ignore", invalid="ignore"):
        out[1:] = np.where(denom > 0, d[1:] * taus / denom, 1.0)
    return out


def _pick_lag(cmndf: np.ndarray, tau_min: int, tau_max: int, threshold: float):
    hi = min(tau_max, len(cmndf) - 1)
    if tau_min > hi:
        return None
    tau = None
    for t in range(tau_min, hi + 1):
        if cmndf[t] < threshold:
            while t + 1 <= hi and cmndf[t + 1] < cmndf[t]:
                t += 1
            tau = t
            break
    if tau is None:
        return None
    return tau


def _parabolic_refine(d: np.ndarray, tau: int) -> float:
    if 0 < tau < len(d) - 1:
        a, b, c = d[tau - 1], d[tau], d[tau + 1]
        denom = a - 2 * b + c
        if denom > 0:
            shift = 0.5 * (a - c) / denom
            return tau + float(np.clip(shift, -0.5, 0.5))
    return float(tau)


def mark_pitch(w: Waveform, track: PitchTrack, unvoiced_spacing_s: float = 0.010) -> PitchMarks:
    """Place PSOLA anchor marks.

    Voiced regions: successive local waveform maxima, each searched within
    +/-20% of the local period from the previous mark. Unvoiced regions: fixed
    spacing (10 ms default)."""
    sr = w.sample_rate
    x = w.samples
    n = len(x)
    hop_n = track.hop_seconds * sr
    fallback = max(1, int(round(unvoiced_spacing_s * sr)))

    def state_at(pos: int):
        i = min(track.n_frames - 1, max(0, int(pos / hop_n)))
        if track.voicing[i]:
            return sr / track.f0_hz[i]
        return None

    marks = []
    period0 = state_at(0)
    if period0 is not None:
        end = min(n, int(round(period0)))
        first = int(np.argmax(x[:end])) if end > 0 else 0
    else:
        first = 0
    marks.append(first)

    pos = first
    while True:
        period = state_at(pos)
        if period is None:
            nxt = pos + fallback
        else:
            lo = pos + max(1, int(np.floor(0.8 * period)))
            hi = min(n, pos + int(np.ceil(1.2 * period)) + 1)
            if lo >= n:
                break
            if hi <= lo:
                nxt = pos + max(1, int(round(period)))
            else:
                nxt = lo + int(np.argmax(x[lo:hi]))
        if nxt >= n:
            break
        if nxt <= pos:
            nxt = pos + 1
        marks.append(nxt)
        pos = nxt

    return PitchMarks(indices=np.asarray(marks, dtype=np.int64))


def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sr: int, n_fft: int, n_mels: int) -> tuple[np.ndarray, np.ndarray]:
    """Triangular mel filters over [0, sr/2]; returns (filters, edge_hz).

    filters has shape (n_mels, n_fft//2 + 1); edge_hz has n_mels + 2 entries,
    filter i spans edge_hz[i] .. edge_hz[i+2] with its peak at edge_hz[i+1]."""
    edges_mel = np.linspace(_hz_to_mel(0.0), _hz_to_mel(sr / 2.0), n_mels + 2)
    edges_hz = _mel_to_hz(edges_mel)
    bins_hz = np.fft.rfftfreq(n_fft, 1.0 / sr)
    filters = np.zeros((n_mels, len(bins_hz)))
    for m in range(n_mels):
        lo, center, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        up = (bins_hz - lo) / max(center - lo, 1e-12)
        down = (hi - bins_hz) / max(hi - center, 1e-12)
        filters[m] = np.maximum(0.0, np.minimum(up, down))
    return filters, edges_hz


def logmel_features(
    w: Waveform,
    spec: FrameSpec | None = None,
    n_mels: int = 80,
    floor: float = 1e-10,
):
    """Log mel-filterbank energies, frame count floor((n - frame)/hop) + 1."""
    from .fmat import FeatureMatrix

    spec = spec or FrameSpec()
    sr = w.sample_rate
    frame = int(round(spec.frame_seconds * sr))
    hop = max(1, int(round(spec.hop_seconds * sr)))
    if frame < 2:
        raise ValueError("frame too short")
    x = w.samples
    n_frames = max(0, (len(x) - frame) // hop + 1)
    n_fft = 1 << int(np.ceil(np.log2(max(frame, 2))))
    win = np.hanning(frame) if spec.window == "hann" else np.ones(frame)
    filters, _ = mel_filterbank(sr, n_fft, n_mels)

    out = np.empty((n_frames, n_mels), dtype=np.float32)
    for i in range(n_frames):
        seg = x[i * hop : i * hop + frame] * win
        power = np.abs(np.fft.rfft(seg, n_fft)) ** 2
        out[i] = np.log(filters @ power + floor)
    return FeatureMatrix(values=out, hop_seconds=hop / sr, start_offset_seconds=0.0)
