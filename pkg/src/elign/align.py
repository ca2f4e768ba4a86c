"""Dynamic time warping over feature sequences and the end-to-end pair
alignment pipeline: silence filter on both sides, global PSOLA stretch of the
target side toward the source duration, DTW over content features, then
frame-wise PSOLA of the source along the warping path.

The source (EL) absorbs all variable-rate artifacts; the target (HE) is only
touched by the single global stretch, keeping it clean for training."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import Waveform
from .dsp import FrameSpec, logmel_features, mark_pitch, remove_long_silences, track_pitch, vad
from .fmat import FeatureMatrix
from .psola import StretchPlan, plan_from_path, time_stretch, warp_with_plan

MAX_FULL_DTW_FRAMES = 20000


class BandInfeasibleError(ValueError):
    """The Sakoe-Chiba band excluded every complete warping path."""


@dataclass
class WarpPath:
    """Monotonic (source, target) frame index pairs from (0,0) to (I-1, J-1)."""

    pairs: np.ndarray
    total_cost: float

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=np.int64)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] == 0:
            raise ValueError("path must be a non-empty (L, 2) index array")
        steps = np.diff(p, axis=0)
        if len(steps) and not (
            np.all(steps >= 0) and np.all(steps <= 1) and np.all(steps.sum(axis=1) >= 1)
        ):
            raise ValueError("path steps must be (1,0), (0,1) or (1,1)")
        self.pairs = p

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def normalized_cost(self) -> float:
        return self.total_cost / len(self.pairs)


def frame_distance(a: np.ndarray, b: np.ndarray, metric: str = "cosine") -> float:
    """Distance between two feature rows.

    cosine: 1 - a.b/(|a||b|), computed as |u - v|^2 / 2 on the normalized
    vectors so identical rows give exactly zero; any zero vector gives 1.
    euclidean: |a - b|_2."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if metric == "euclidean":
        return float(np.sqrt(np.sum((a - b) ** 2)))
    if metric == "cosine":
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            return 1.0
        u, v = a / na, b / nb
        return float(np.sum((u - v) ** 2) / 2.0)
    raise ValueError(f"unknown metric {metric!r}")


def _distance_matrix(src: np.ndarray, tgt: np.ndarray, metric: str) -> np.ndarray:
    """Pairwise frame distances, float64, exact zeros on identical rows."""
    a = np.asarray(src, dtype=np.float64)
    b = np.asarray(tgt, dtype=np.float64)
    if metric == "cosine":
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        za, zb = na == 0.0, nb == 0.0
        a = a / np.where(za, 1.0, na)[:, None]
        b = b / np.where(zb, 1.0, nb)[:, None]
    out = np.empty((a.shape[0], b.shape[0]))
    block = max(1, int(4e6 // max(1, a.shape[1] * b.shape[0])))
    for start in range(0, a.shape[0], block):
        stop = min(start + block, a.shape[0])
        diff = a[start:stop, None, :] - b[None, :, :]
        sq = np.sum(diff * diff, axis=2)
        out[start:stop] = sq / 2.0 if metric == "cosine" else np.sqrt(sq)
    if metric == "cosine":
        out[za, :] = 1.0
        out[:, zb] = 1.0
    return out


def _as_values(m) -> np.ndarray:
    return m.values if isinstance(m, FeatureMatrix) else np.asarray(m)


def dtw(src, tgt, metric: str = "cosine", band_fraction: float | None = None) -> WarpPath:
    """Minimum-cost monotonic alignment with steps {(1,0),(0,1),(1,1)}.

    Ties in backtracking prefer diagonal, then source advance, then target
    advance, so identical inputs give the pure diagonal. band_fraction, when
    given, applies a Sakoe-Chiba band of that fraction of the target length."""
    a = _as_values(src)
    b = _as_values(tgt)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty feature matrix")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"feature dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    n_i, n_j = a.shape[0], b.shape[0]
    if band_fraction is None and max(n_i, n_j) > MAX_FULL_DTW_FRAMES:
        raise ValueError(
            f"{max(n_i, n_j)} frames exceeds the full-DTW guardrail "
            f"({MAX_FULL_DTW_FRAMES}); pass a band_fraction"
        )

    d = _distance_matrix(a, b, metric)
    if band_fraction is not None:
        ii = np.arange(n_i)[:, None]
        jj = np.arange(n_j)[None, :]
        outside = np.abs(ii * n_j / n_i - jj) > band_fraction * n_j
        d = np.where(outside, np.inf, d)

    acc = np.full((n_i, n_j), np.inf)
    acc[0, 0] = d[0, 0]
    for j in range(1, n_j):
        acc[0, j] = acc[0, j - 1] + d[0, j]
    for i in range(1, n_i):
        row = acc[i]
        prev = acc[i - 1]
        row[0] = prev[0] + d[i, 0]
        best_prev = np.minimum(prev[:-1], prev[1:])  # diag vs up for j>=1
        di = d[i]
        for j in range(1, n_j):
            row[j] = di[j] + min(best_prev[j - 1], row[j - 1])

    total = float(acc[n_i - 1, n_j - 1])
    if not np.isfinite(total):
        raise BandInfeasibleError("no complete path inside the band")

    # backtrack, tie order: diagonal, then (1,0), then (0,1)
    i, j = n_i - 1, n_j - 1
    rev = [(i, j)]
    while (i, j) != (0, 0):
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        rev.append((i, j))
    pairs = np.array(rev[::-1], dtype=np.int64)
    return WarpPath(pairs=pairs, total_cost=total)


def resample_features(m: FeatureMatrix, target_hop: float) -> FeatureMatrix:
    """Linear time interpolation of a feature matrix onto a different hop."""
    if abs(m.hop_seconds - target_hop) < 1e-12:
        return m
    times = m.start_offset_seconds + np.arange(m.rows) * m.hop_seconds
    n_new = max(1, int(round(m.rows * m.hop_seconds / target_hop)))
    new_times = m.start_offset_seconds + np.arange(n_new) * target_hop
    out = np.empty((n_new, m.cols), dtype=np.float32)
    for c in range(m.cols):
        out[:, c] = np.interp(new_times, times, m.values[:, c].astype(np.float64))
    return FeatureMatrix(values=out, hop_seconds=target_hop, start_offset_seconds=m.start_offset_seconds)


def stretch_features(m: FeatureMatrix, factor: float) -> FeatureMatrix:
    """Uniformly stretch a feature timeline by resampling rows; used when
    externally computed features must follow a global PSOLA stretch."""
    n_new = max(1, int(round(m.rows * factor)))
    src_pos = np.linspace(0, m.rows - 1, n_new)
    out = np.empty((n_new, m.cols), dtype=np.float32)
    for c in range(m.cols):
        out[:, c] = np.interp(src_pos, np.arange(m.rows), m.values[:, c].astype(np.float64))
    return FeatureMatrix(values=out, hop_seconds=m.hop_seconds, start_offset_seconds=m.start_offset_seconds)


@dataclass
class AlignConfig:
    frame: FrameSpec = field(default_factory=FrameSpec)
    vad_threshold_db: float = -40.0
    vad_hangover_frames: int = 5
    max_silence_ms: float = 200.0
    crossfade_ms: float = 5.0
    f0_min: float = 50.0
    f0_max: float = 500.0
    n_mels: int = 80
    metric: str = "cosine"
    band_fraction: float | None = None
    clamp: tuple = (0.25, 4.0)
    smooth_frames: int = 5
    silence_filter_el: bool = True
    silence_filter_he: bool = True
    min_frames: int = 5


@dataclass
class AlignStats:
    total_cost: float
    normalized_cost: float
    duration_ratio: float
    frames_src: int
    frames_tgt: int

    def to_dict(self) -> dict:
        return {
            "total_cost": self.total_cost,
            "normalized_cost": self.normalized_cost,
            "duration_ratio": self.duration_ratio,
            "frames_src": self.frames_src,
            "frames_tgt": self.frames_tgt,
        }


@dataclass
class AlignmentResult:
    aligned_el: Waveform
    he_target: Waveform
    path: WarpPath
    stats: AlignStats


def _silence_filter(w: Waveform, cfg: AlignConfig) -> Waveform:
    spec = FrameSpec(cfg.frame.frame_seconds, cfg.frame.hop_seconds, window="rect")
    r = vad(w, spec, threshold_db=cfg.vad_threshold_db, hangover_frames=cfg.vad_hangover_frames)
    out, _ = remove_long_silences(w, r, max_silence_ms=cfg.max_silence_ms, crossfade_ms=cfg.crossfade_ms)
    return out


def align_pair(
    el: Waveform,
    he: Waveform,
    el_feats: FeatureMatrix | None = None,
    he_feats: FeatureMatrix | None = None,
    cfg: AlignConfig | None = None,
) -> AlignmentResult:
    """Align one EL utterance to one HE realization of the same content.

    Steps: silence-filter both sides, stretch HE globally by the duration
    ratio toward EL, obtain content features for EL and the stretched HE
    (log-mel internally unless external features are supplied), DTW, convert
    the path to a stretch plan, and warp EL onto the stretched-HE timeline."""
    cfg = cfg or AlignConfig()
    if el.sample_rate != he.sample_rate:
        raise ValueError("EL and HE must share a sample rate")

    el_f = _silence_filter(el, cfg) if cfg.silence_filter_el else el
    he_f = _silence_filter(he, cfg) if cfg.silence_filter_he else he
    if len(el_f) == 0 or len(he_f) == 0:
        raise ValueError("silence filter removed everything")

    ratio = el_f.duration_seconds / he_f.duration_seconds
    ratio = float(np.clip(ratio, cfg.clamp[0], cfg.clamp[1]))
    he_track = track_pitch(he_f, cfg.f0_min, cfg.f0_max, cfg.frame.hop_seconds)
    he_marks = mark_pitch(he_f, he_track)
    he_s = time_stretch(he_f, he_marks, ratio)

    if el_feats is not None and he_feats is not None:
        src = el_feats
        tgt = stretch_features(he_feats, ratio)
        if abs(src.hop_seconds - tgt.hop_seconds) > 1e-12:
            fine = min(src.hop_seconds, tgt.hop_seconds)
            src = resample_features(src, fine)
            tgt = resample_features(tgt, fine)
        hop = src.hop_seconds
    else:
        src = logmel_features(el_f, cfg.frame, n_mels=cfg.n_mels)
        tgt = logmel_features(he_s, cfg.frame, n_mels=cfg.n_mels)
        hop = cfg.frame.hop_seconds

    if src.rows < cfg.min_frames or tgt.rows < cfg.min_frames:
        raise ValueError(f"degenerate input: {src.rows}x{tgt.rows} frames (need >= {cfg.min_frames})")

    path = dtw(src, tgt, metric=cfg.metric, band_fraction=cfg.band_fraction)
    plan = plan_from_path(path, hop, clamp=cfg.clamp, smooth_frames=cfg.smooth_frames)
    # clamping and the frame-vs-sample tail can leave the plan's consumption a
    # little off the true EL length; rescale so the warp covers all of it
    consumed = plan.input_seconds_consumed * el_f.sample_rate
    scale = len(el_f) / consumed
    plan = StretchPlan(
        hop_seconds=plan.hop_seconds,
        factors=np.clip(plan.factors * scale, cfg.clamp[0], cfg.clamp[1]),
    )

    el_track = track_pitch(el_f, cfg.f0_min, cfg.f0_max, cfg.frame.hop_seconds)
    el_marks = mark_pitch(el_f, el_track)
    aligned = warp_with_plan(el_f, el_marks, plan, n_out_samples=len(he_s))

    stats = AlignStats(
        total_cost=path.total_cost,
        normalized_cost=path.normalized_cost,
        duration_ratio=ratio,
        frames_src=src.rows,
        frames_tgt=tgt.rows,
    )
    return AlignmentResult(aligned_el=aligned, he_target=he_s, path=path, stats=stats)
