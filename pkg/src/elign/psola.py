"""Time-domain pitch-synchronous overlap-add time-scale modification.

One synthesis engine drives both operations: a piecewise-linear map from
output sample position to input sample position is walked mark by mark,
copying two-period Hann windows from the nearest analysis pitch mark and
re-spacing them by the local period, so duration changes while pitch does
not. Unvoiced regions ride on the fixed-spacing marks (plain OLA).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import Waveform
from .dsp import PitchMarks

FACTOR_MIN = 0.25
FACTOR_MAX = 4.0


@dataclass
class StretchPlan:
    """Piecewise-constant consumption rates over output frames.

    factors[j] is the amount of input time consumed per unit of output time
    during output frame j (1.0 plays in real time, 2.0 compresses the input
    two-to-one, 0.5 stretches it). Output duration is len(factors) *
    hop_seconds; sum(factors) * hop_seconds must match the input duration.
    """

    hop_seconds: float
    factors: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.factors, dtype=np.float64).reshape(-1)
        if len(f) == 0:
            raise ValueError("empty stretch plan")
        if not np.all(np.isfinite(f)):
            raise ValueError("non-finite plan factors")
        if np.any(f < FACTOR_MIN - 1e-9) or np.any(f > FACTOR_MAX + 1e-9):
            raise ValueError(f"plan factors outside [{FACTOR_MIN}, {FACTOR_MAX}]")
        if not self.hop_seconds > 0:
            raise ValueError("hop_seconds must be > 0")
        self.factors = f

    @property
    def output_frames(self) -> int:
        return len(self.factors)

    @property
    def output_seconds(self) -> float:
        return self.output_frames * self.hop_seconds

    @property
    def input_seconds_consumed(self) -> float:
        return float(np.sum(self.factors)) * self.hop_seconds


def constant_plan(stretch: float, input_frames: int, hop_seconds: float) -> StretchPlan:
    """Plan that stretches the whole input by a constant ratio.

    Output length is round(stretch * input_frames) frames; the per-frame
    consumption rate is input_frames / output_frames so the input is used
    exactly once."""
    if input_frames < 1:
        raise ValueError("need at least one input frame")
    out_frames = max(1, int(round(stretch * input_frames)))
    rate = input_frames / out_frames
    return StretchPlan(hop_seconds=hop_seconds, factors=np.full(out_frames, rate))


def plan_from_stretch_profile(
    stretches: np.ndarray, hop_seconds: float, output_frames: int | None = None
) -> StretchPlan:
    """Build a plan from desired per-input-frame stretch ratios.

    If output_frames is given, the ratios are renormalized by a common factor
    so the plan's total output duration hits it exactly; the relative pacing
    of the profile is preserved."""
    s = np.asarray(stretches, dtype=np.float64)
    if len(s) == 0 or np.any(s <= 0):
        raise ValueError("stretch profile must be positive and non-empty")
    total_out = float(np.sum(s))
    if output_frames is None:
        output_frames = max(1, int(round(total_out)))
    s = s * (output_frames / total_out)
    # input position (in frames) at each output frame boundary
    out_bounds = np.concatenate([[0.0], np.cumsum(s)])
    in_at_out = np.interp(np.arange(output_frames + 1), out_bounds, np.arange(len(s) + 1))
    factors = np.diff(in_at_out)
    factors = np.clip(factors, FACTOR_MIN, FACTOR_MAX)
    return StretchPlan(hop_seconds=hop_seconds, factors=factors)


def path_consumption(path, smooth_frames: int = 5) -> np.ndarray:
    """Source frames consumed per target frame along a warping path.

    Smoothed with a centered moving average (shrinking at the edges) but not
    clamped; mass is conserved, sum(result) ~= source frame count."""
    pairs = path.pairs if hasattr(path, "pairs") else np.asarray(path)
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[0] == 0 or pairs.shape[1] != 2:
        raise ValueError("empty or malformed warping path")
    n_target = int(pairs[-1, 1]) + 1
    consumed = np.zeros(n_target)
    consumed[pairs[0, 1]] += 1.0
    di = np.diff(pairs[:, 0])
    np.add.at(consumed, pairs[1:, 1], di.astype(np.float64))
    if smooth_frames > 1:
        kernel = np.ones(smooth_frames)
        consumed = np.convolve(consumed, kernel, mode="same") / np.convolve(
            np.ones_like(consumed), kernel, mode="same"
        )
    return consumed


def plan_from_path(
    path,
    hop_seconds: float,
    clamp: tuple[float, float] = (FACTOR_MIN, FACTOR_MAX),
    smooth_frames: int = 5,
) -> StretchPlan:
    """Derive consumption rates from a DTW warping path.

    The rate at target frame j is the number of source frames the path
    consumes while sitting at j, smoothed to keep path stair-steps from
    buzzing the resynthesis, then clamped into the valid factor range."""
    lo = max(clamp[0], FACTOR_MIN)
    hi = min(clamp[1], FACTOR_MAX)
    factors = np.clip(path_consumption(path, smooth_frames=smooth_frames), lo, hi)
    return StretchPlan(hop_seconds=hop_seconds, factors=factors)


def _local_periods(marks: np.ndarray, sr: int) -> np.ndarray:
    """Local period at each mark = the forward inter-mark gap.

    Using the actual gap (not an averaged estimate) means the synthesis cursor
    lands exactly on successive marks at unity rate, so resynthesis does not
    drift against the input timeline."""
    periods = np.empty(len(marks))
    if len(marks) == 1:
        periods[0] = 0.010 * sr
        return periods
    gaps = np.diff(marks).astype(np.float64)
    periods[:-1] = gaps
    periods[-1] = gaps[-1]
    return np.clip(periods, 2.0, 0.03 * sr)


def _synthesize(
    x: np.ndarray, sr: int, marks: np.ndarray, b_out: np.ndarray, b_in: np.ndarray, n_out: int
) -> np.ndarray:
    """Overlap-add two-period Hann windows along the output->input map."""
    n_in = len(x)
    periods = _local_periods(marks, sr)
    out = np.zeros(n_out)
    wsum = np.zeros(n_out)

    s = float(np.interp(marks[0], b_in, b_out))
    max_iters = 4 * n_out + 16
    iters = 0
    while s < n_out and iters < max_iters:
        iters += 1
        u = float(np.interp(s, b_out, b_in))
        k = int(np.searchsorted(marks, u))
        if k >= len(marks):
            k = len(marks) - 1
        elif k > 0 and (u - marks[k - 1]) <= (marks[k] - u):
            k -= 1
        period = periods[k]
        win_len = max(4, int(round(2 * period)))
        half = win_len // 2
        window = np.hanning(win_len)

        src_a = int(marks[k]) - half
        seg = np.zeros(win_len)
        lo, hi = max(0, src_a), min(n_in, src_a + win_len)
        if hi > lo:
            seg[lo - src_a : hi - src_a] = x[lo:hi]

        dst_a = int(round(s)) - half
        olo, ohi = max(0, dst_a), min(n_out, dst_a + win_len)
        if ohi > olo:
            out[olo:ohi] += (seg * window)[olo - dst_a : ohi - dst_a]
            wsum[olo:ohi] += window[olo - dst_a : ohi - dst_a]

        s += period

    norm = np.where(wsum > 1e-8, wsum, 1.0)
    y = out / norm
    peak = float(np.max(np.abs(y))) if n_out else 0.0
    if peak > 1.0:
        y = y / peak
    return y


def time_stretch(w: Waveform, marks: PitchMarks, factor: float) -> Waveform:
    """Constant-rate PSOLA: output duration = factor * input duration."""
    if not FACTOR_MIN <= factor <= FACTOR_MAX:
        raise ValueError(f"stretch factor {factor} outside [{FACTOR_MIN}, {FACTOR_MAX}]")
    if len(marks) < 2:
        raise ValueError("need at least two pitch marks")
    n_in = len(w)
    n_out = max(1, int(round(n_in * factor)))
    b_out = np.array([0.0, float(n_out)])
    b_in = np.array([0.0, float(n_in)])
    y = _synthesize(w.samples, w.sample_rate, marks.indices, b_out, b_in, n_out)
    return Waveform(samples=y, sample_rate=w.sample_rate)


def warp_with_plan(
    w: Waveform, marks: PitchMarks, plan: StretchPlan, n_out_samples: int | None = None
) -> Waveform:
    """Variable-rate PSOLA along a stretch plan.

    Output frame j consumes plan.factors[j] * hop of input; total output
    length is the plan's duration (or n_out_samples when the caller pins the
    exact target length, extended at the final rate)."""
    if len(marks) < 2:
        raise ValueError("need at least two pitch marks")
    sr = w.sample_rate
    n_in = len(w)
    hop_n = plan.hop_seconds * sr

    consumed = plan.input_seconds_consumed * sr
    slack = hop_n * (max(float(np.max(plan.factors)), 1.0) + 2.0)
    if abs(consumed - n_in) > slack:
        raise ValueError(
            f"plan consumes {consumed / sr:.3f}s but waveform has {n_in / sr:.3f}s "
            f"(mismatch beyond one frame)"
        )

    b_out = np.arange(plan.output_frames + 1) * hop_n
    b_in = np.concatenate([[0.0], np.cumsum(plan.factors) * hop_n])
    b_in = np.minimum(b_in, float(n_in))

    n_out = int(round(plan.output_frames * hop_n)) if n_out_samples is None else int(n_out_samples)
    if n_out > b_out[-1]:
        extra_in = (n_out - b_out[-1]) * plan.factors[-1]
        b_out = np.append(b_out, float(n_out))
        b_in = np.append(b_in, min(float(n_in), b_in[-1] + extra_in))

    y = _synthesize(w.samples, sr, marks.indices, b_out, b_in, n_out)
    return Waveform(samples=y, sample_rate=sr)
