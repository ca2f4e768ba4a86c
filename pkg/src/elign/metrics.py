"""Objective evaluation: edit-distance transcription metrics with bootstrap
confidence intervals, log-F0 RMSE between pitch contours, cosine speaker
similarity, min-max metric normalization for comparison plots, and CER
aggregation over the SNR sweep."""

from __future__ import annotations

import csv
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import PitchTrack
from .fmat import FeatureMatrix


@dataclass
class EditCounts:
    """Levenshtein alignment tallies. H + S + D = N_ref and H + S + I = N_hyp
    hold by construction."""

    hits: int
    substitutions: int
    deletions: int
    insertions: int

    @property
    def n_ref(self) -> int:
        return self.hits + self.substitutions + self.deletions

    @property
    def n_hyp(self) -> int:
        return self.hits + self.substitutions + self.insertions

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def normalize_text(s: str) -> str:
    """Lowercase, drop punctuation, collapse whitespace. Non-ASCII letters
    (umlauts, eszett) pass through untouched."""
    s = s.lower()
    out = []
    for ch in s:
        if unicodedata.category(ch).startswith("P"):
            continue
        out.append(ch)
    return " ".join("".join(out).split())


def char_tokens(s: str) -> list[str]:
    return list(normalize_text(s))


def word_tokens(s: str) -> list[str]:
    return normalize_text(s).split()


def edit_align(ref: list, hyp: list) -> EditCounts:
    """Unit-cost Levenshtein alignment with deterministic tie-breaking:
    match, then substitution, then deletion, then insertion."""
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row = dist[i]
        prev = dist[i - 1]
        r_tok = ref[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (r_tok != hyp[j - 1])
            dele = prev[j] + 1
            ins = row[j - 1] + 1
            row[j] = sub if sub <= dele and sub <= ins else (dele if dele <= ins else ins)

    hits = subs = dels = inss = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dist[i][j] == dist[i - 1][j - 1]:
            hits += 1
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + 1:
            subs += 1
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            inss += 1
            j -= 1
    return EditCounts(hits=hits, substitutions=subs, deletions=dels, insertions=inss)


@dataclass
class Rates:
    """error_rate is (S+D+I)/N_ref; WIP = (H/N_ref)(H/N_hyp); WIL = 1 - WIP.
    Fields are None where the denominator is empty."""

    error_rate: float | None
    wip: float | None
    wil: float | None


def rates(c: EditCounts) -> Rates:
    error_rate = c.errors / c.n_ref if c.n_ref > 0 else None
    if c.n_ref > 0 and c.n_hyp > 0:
        wip = (c.hits / c.n_ref) * (c.hits / c.n_hyp)
        wil = 1.0 - wip
    else:
        wip = wil = None
    return Rates(error_rate=error_rate, wip=wip, wil=wil)


def pooled_rate(counts: list[EditCounts]) -> float | None:
    total_err = sum(c.errors for c in counts)
    total_ref = sum(c.n_ref for c in counts)
    return total_err / total_ref if total_ref > 0 else None


def bootstrap_ci(
    counts: list[EditCounts], resamples: int = 1000, level: float = 0.95, seed: int = 0
) -> tuple[float, float]:
    """Percentile bootstrap over utterances; each resample pools errors and
    reference lengths before taking the ratio."""
    if len(counts) < 2:
        raise ValueError("need at least 2 utterances for a bootstrap CI")
    errs = np.array([c.errors for c in counts], dtype=np.float64)
    refs = np.array([c.n_ref for c in counts], dtype=np.float64)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(counts), size=(resamples, len(counts)))
    err_sums = errs[idx].sum(axis=1)
    ref_sums = refs[idx].sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        samples = np.where(ref_sums > 0, err_sums / ref_sums, np.nan)
    samples = samples[np.isfinite(samples)]
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(samples, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


@dataclass
class LogF0Result:
    rmse: float | None  # None when the tracks share no voiced frame
    voiced_overlap: float  # fraction of compared frames voiced in both


def logf0_rmse(a: PitchTrack, b: PitchTrack) -> LogF0Result:
    """RMSE of natural-log F0 over frames voiced in both tracks."""
    if abs(a.hop_seconds - b.hop_seconds) > 1e-9:
        raise ValueError(f"hop mismatch: {a.hop_seconds} vs {b.hop_seconds}")
    n = min(a.n_frames, b.n_frames)
    if n == 0:
        return LogF0Result(rmse=None, voiced_overlap=0.0)
    both = a.voicing[:n] & b.voicing[:n]
    overlap = float(np.mean(both))
    if not both.any():
        return LogF0Result(rmse=None, voiced_overlap=0.0)
    diff = np.log(a.f0_hz[:n][both]) - np.log(b.f0_hz[:n][both])
    return LogF0Result(rmse=float(np.sqrt(np.mean(diff**2))), voiced_overlap=overlap)


def cosine_sim(a: FeatureMatrix | np.ndarray, b: FeatureMatrix | np.ndarray) -> float:
    va = (a.values if isinstance(a, FeatureMatrix) else np.asarray(a)).reshape(-1).astype(np.float64)
    vb = (b.values if isinstance(b, FeatureMatrix) else np.asarray(b)).reshape(-1).astype(np.float64)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0 or nb == 0:
        raise ValueError("zero embedding vector")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


@dataclass
class MetricValue:
    value: float
    ci_low: float | None = None
    ci_high: float | None = None

    def __post_init__(self):
        if self.ci_low is not None and self.ci_high is not None:
            if not (self.ci_low <= self.value <= self.ci_high):
                raise ValueError(
                    f"value {self.value} outside CI [{self.ci_low}, {self.ci_high}]"
                )


@dataclass
class MetricColumn:
    higher_is_better: bool
    per_method: dict  # method name -> MetricValue


@dataclass
class MetricReport:
    metrics: dict  # metric name -> MetricColumn
    normalization: dict = field(default_factory=dict)  # metric -> (min, max)


def normalize_report(raw: MetricReport) -> MetricReport:
    """Min-max normalize each metric across methods to [0, 1], then flip
    lower-is-better columns as 1 - x so larger is always better. A degenerate
    column (all methods equal) maps everyone to 1.0."""
    out_metrics = {}
    normalization = {}
    for name, col in raw.metrics.items():
        if len(col.per_method) < 2:
            raise ValueError(f"metric {name!r}: need at least 2 methods to normalize")
        vmin = min(mv.value for mv in col.per_method.values())
        vmax = max(mv.value for mv in col.per_method.values())
        normalization[name] = (vmin, vmax)
        span = vmax - vmin

        def remap(x):
            y = (x - vmin) / span
            return y if col.higher_is_better else 1.0 - y

        per_method = {}
        for m, mv in col.per_method.items():
            if span == 0:
                per_method[m] = MetricValue(value=1.0, ci_low=1.0, ci_high=1.0)
                continue
            norm_v = remap(mv.value)
            norm_lo = norm_hi = None
            if mv.ci_low is not None and mv.ci_high is not None:
                a, b = sorted((remap(mv.ci_low), remap(mv.ci_high)))
                norm_lo = min(float(np.clip(a, 0.0, 1.0)), norm_v)
                norm_hi = max(float(np.clip(b, 0.0, 1.0)), norm_v)
            per_method[m] = MetricValue(value=norm_v, ci_low=norm_lo, ci_high=norm_hi)
        out_metrics[name] = MetricColumn(higher_is_better=True, per_method=per_method)
    return MetricReport(metrics=out_metrics, normalization=normalization)


def report_to_csv(report: MetricReport, path) -> None:
    """Method x metric grid, plot-ready."""
    metric_names = sorted(report.metrics)
    methods = sorted({m for col in report.metrics.values() for m in col.per_method})
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["method"] + metric_names)
        for method in methods:
            row = [method]
            for name in metric_names:
                mv = report.metrics[name].per_method.get(method)
                row.append(f"{mv.value:.6g}" if mv is not None else "")
            writer.writerow(row)


def read_transcripts(path) -> dict:
    """One utterance per line: utt_id<TAB>text."""
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValueError(f"{path}: line {lineno}: expected 'utt_id<TAB>text'")
            utt_id, text = line.split("\t", 1)
            out[utt_id] = text
    return out


def transcription_metrics(
    refs: dict,
    hyps: dict,
    unit: str = "char",
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    macro: bool = False,
) -> dict:
    """Corpus CER/WER with WIP/WIL and a bootstrap CI.

    Pooled (micro) rate by default; macro averages the per-utterance rates.
    Hypotheses missing an utterance are scored as empty strings."""
    tokenize = char_tokens if unit == "char" else word_tokens
    utt_ids = sorted(refs)
    if not utt_ids:
        raise ValueError("no reference utterances")
    counts = []
    per_utt = {}
    missing = []
    for utt in utt_ids:
        hyp_text = hyps.get(utt)
        if hyp_text is None:
            missing.append(utt)
            hyp_text = ""
        c = edit_align(tokenize(refs[utt]), tokenize(hyp_text))
        counts.append(c)
        r = rates(c)
        per_utt[utt] = {
            "error_rate": r.error_rate,
            "wip": r.wip,
            "wil": r.wil,
            "n_ref": c.n_ref,
        }
    total = EditCounts(
        hits=sum(c.hits for c in counts),
        substitutions=sum(c.substitutions for c in counts),
        deletions=sum(c.deletions for c in counts),
        insertions=sum(c.insertions for c in counts),
    )
    pooled = rates(total)
    if macro:
        utt_rates = [v["error_rate"] for v in per_utt.values() if v["error_rate"] is not None]
        rate_value = float(np.mean(utt_rates)) if utt_rates else None
    else:
        rate_value = pooled.error_rate
    ci_low = ci_high = None
    if len(counts) >= 2 and resamples > 0:
        ci_low, ci_high = bootstrap_ci(counts, resamples=resamples, level=level, seed=seed)
    return {
        "unit": unit,
        "utterances": len(utt_ids),
        "missing_hypotheses": missing,
        "error_rate": rate_value,
        "ci_low": ci_low,
        "ci_high": ci_high,
        "wip": pooled.wip,
        "wil": pooled.wil,
        "counts": {
            "hits": total.hits,
            "substitutions": total.substitutions,
            "deletions": total.deletions,
            "insertions": total.insertions,
            "n_ref": total.n_ref,
            "n_hyp": total.n_hyp,
        },
        "per_utterance": per_utt,
    }


def aggregate_sweep(index_path, refs: dict, hyps: dict, clean_hyps: dict | None = None) -> list[dict]:
    """Pooled CER per (noise class, SNR) cell from a sweep index CSV.

    Hypotheses are keyed by the sweep file stem (input__class__snr<k>);
    references by the original input id. Rows missing a hypothesis are
    reported and the cell skips them. When clean_hyps is given, a reference
    row with the noise-free CER is appended (class "none", empty snr)."""
    cells: dict = {}
    missing = []
    with open(index_path, "r", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            input_id = row["input_id"]
            stem = Path(row["path"]).stem
            if input_id not in refs:
                missing.append({"row": stem, "reason": "no reference"})
                continue
            if stem not in hyps:
                missing.append({"row": stem, "reason": "no hypothesis"})
                continue
            c = edit_align(char_tokens(refs[input_id]), char_tokens(hyps[stem]))
            key = (row["class"], float(row["snr_db"]))
            cells.setdefault(key, []).append(c)

    table = []
    for (label, snr_db), counts in sorted(cells.items()):
        table.append(
            {
                "class": label,
                "snr_db": snr_db,
                "cer": pooled_rate(counts),
                "n_utts": len(counts),
            }
        )
    if clean_hyps is not None:
        counts = [
            edit_align(char_tokens(refs[u]), char_tokens(clean_hyps[u]))
            for u in sorted(refs)
            if u in clean_hyps
        ]
        if counts:
            table.append({"class": "none", "snr_db": None, "cer": pooled_rate(counts), "n_utts": len(counts)})
    if missing:
        table.append({"class": "missing", "snr_db": None, "cer": None, "n_utts": len(missing), "rows": missing})
    return table


def sweep_table_to_csv(table: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "snr_db", "cer", "n_utts"])
        for row in table:
            if row["class"] == "missing":
                continue
            snr = "" if row["snr_db"] is None else f"{row['snr_db']:g}"
            cer = "" if row["cer"] is None else f"{row['cer']:.6f}"
            writer.writerow([row["class"], snr, cer, row["n_utts"]])
