"""Corpus bookkeeping: JSONL manifests, many-to-many pair expansion,
content-level dataset splits and the batch alignment runner.

Every EL utterance is paired with every HE realization sharing its content id
across speakers, which multiplies the usable training pairs well beyond the
one-to-one recordings. Splits are made per content id so the same sentence
can never appear in two splits."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .align import AlignConfig, align_pair
from .audio import CANONICAL_RATE, load_wav, resample, save_wav
from .fmat import read_fmat

CONDITIONS = ("EL", "HE")
SPEAKER_TYPES = ("pseudo_el", "real_el", "he")

_REQUIRED_FIELDS = ("utt_id", "speaker_id", "content_id", "condition", "speaker_type", "audio_path")


class ManifestError(ValueError):
    pass


@dataclass
class UtteranceRecord:
    utt_id: str
    speaker_id: str
    content_id: str
    condition: str  # EL | HE
    speaker_type: str  # pseudo_el | real_el | he
    audio_path: str
    transcript: str | None = None
    features_path: str | None = None

    def to_dict(self) -> dict:
        d = {
            "utt_id": self.utt_id,
            "speaker_id": self.speaker_id,
            "content_id": self.content_id,
            "condition": self.condition,
            "speaker_type": self.speaker_type,
            "audio_path": self.audio_path,
        }
        if self.transcript is not None:
            d["transcript"] = self.transcript
        if self.features_path is not None:
            d["features_path"] = self.features_path
        return d


@dataclass
class PairRecord:
    pair_id: str
    el_utt_id: str
    he_utt_id: str
    content_id: str

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "el_utt_id": self.el_utt_id,
            "he_utt_id": self.he_utt_id,
            "content_id": self.content_id,
        }


@dataclass
class Split:
    train: list
    dev: list
    val: list


def load_manifest(path) -> list[UtteranceRecord]:
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"line {lineno}: malformed JSON ({e.msg})") from e
            if not isinstance(obj, dict):
                raise ManifestError(f"line {lineno}: expected a JSON object")
            for key in _REQUIRED_FIELDS:
                if key not in obj:
                    raise ManifestError(f"line {lineno}: missing field {key!r}")
            if obj["condition"] not in CONDITIONS:
                raise ManifestError(f"line {lineno}: unknown condition {obj['condition']!r}")
            if obj["speaker_type"] not in SPEAKER_TYPES:
                raise ManifestError(f"line {lineno}: unknown speaker_type {obj['speaker_type']!r}")
            he_cond = obj["condition"] == "HE"
            he_type = obj["speaker_type"] == "he"
            if he_cond != he_type:
                raise ManifestError(
                    f"line {lineno}: condition {obj['condition']} inconsistent with "
                    f"speaker_type {obj['speaker_type']}"
                )
            if obj["utt_id"] in seen:
                raise ManifestError(f"line {lineno}: duplicate utt_id {obj['utt_id']!r}")
            seen.add(obj["utt_id"])
            records.append(
                UtteranceRecord(
                    utt_id=obj["utt_id"],
                    speaker_id=obj["speaker_id"],
                    content_id=obj["content_id"],
                    condition=obj["condition"],
                    speaker_type=obj["speaker_type"],
                    audio_path=obj["audio_path"],
                    transcript=obj.get("transcript"),
                    features_path=obj.get("features_path"),
                )
            )
    return records


def expand_pairs(records: list[UtteranceRecord]) -> tuple[list[PairRecord], dict]:
    """All EL x HE combinations per content id, deterministically ordered.

    Returns (pairs, unpaired) where unpaired maps content ids lacking one
    side to the counts that were present."""
    by_content: dict[str, dict[str, list]] = {}
    for r in records:
        side = by_content.setdefault(r.content_id, {"EL": [], "HE": []})
        side[r.condition].append(r.utt_id)

    pairs = []
    unpaired = {}
    for content_id in sorted(by_content):
        els = sorted(by_content[content_id]["EL"])
        hes = sorted(by_content[content_id]["HE"])
        if not els or not hes:
            unpaired[content_id] = {"el": len(els), "he": len(hes)}
            continue
        for el_id in els:
            for he_id in hes:
                pairs.append(
                    PairRecord(
                        pair_id=f"{el_id}__{he_id}",
                        el_utt_id=el_id,
                        he_utt_id=he_id,
                        content_id=content_id,
                    )
                )
    return pairs, unpaired


def split_by_content(
    records: list[UtteranceRecord],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> Split:
    """Shuffle content ids with the seed and split by largest remainder, so
    sizes are within one item of the requested proportions and every
    realization of a content id stays in a single split."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    content_ids = sorted({r.content_id for r in records})
    n = len(content_ids)
    if n < 3:
        raise ValueError(f"need at least 3 content ids to split, got {n}")
    rng = np.random.default_rng(seed)
    order = [content_ids[i] for i in rng.permutation(n)]

    base = [int(np.floor(r * n)) for r in ratios]
    remainders = [r * n - b for r, b in zip(ratios, base)]
    short = n - sum(base)
    for idx in sorted(range(3), key=lambda k: -remainders[k])[:short]:
        base[idx] += 1

    train = sorted(order[: base[0]])
    dev = sorted(order[base[0] : base[0] + base[1]])
    val = sorted(order[base[0] + base[1] :])
    return Split(train=train, dev=dev, val=val)


@dataclass
class RunConfig:
    out_dir: str
    jobs: int = 1
    sample_rate: int = CANONICAL_RATE
    keep_rate: bool = False
    use_external_features: bool = True
    align: AlignConfig = field(default_factory=AlignConfig)


def _load_at_rate(path: str, cfg: RunConfig):
    w = load_wav(path)
    if not cfg.keep_rate and w.sample_rate != cfg.sample_rate:
        w = resample(w, cfg.sample_rate)
    return w


def _run_one(args) -> dict:
    pair_dict, el_rec, he_rec, cfg = args
    pair_id = pair_dict["pair_id"]
    try:
        el = _load_at_rate(el_rec["audio_path"], cfg)
        he = _load_at_rate(he_rec["audio_path"], cfg)
        el_feats = he_feats = None
        if cfg.use_external_features and el_rec.get("features_path") and he_rec.get("features_path"):
            el_feats = read_fmat(el_rec["features_path"])
            he_feats = read_fmat(he_rec["features_path"])
        result = align_pair(el, he, el_feats=el_feats, he_feats=he_feats, cfg=cfg.align)

        pair_dir = Path(cfg.out_dir) / pair_id
        pair_dir.mkdir(parents=True, exist_ok=True)
        save_wav(result.aligned_el, pair_dir / "el_aligned.wav", encoding="pcm16")
        save_wav(result.he_target, pair_dir / "he_target.wav", encoding="pcm16")
        stats = {"pair_id": pair_id, **result.stats.to_dict()}
        with open(pair_dir / "stats.json", "w", encoding="utf-8") as f:
            json.dump(stats, f, indent=2, sort_keys=True)
            f.write("\n")
        return {"pair_id": pair_id, "ok": True, "stats": stats}
    except Exception as e:  # per-pair isolation: one bad file must not kill a batch
        return {"pair_id": pair_id, "ok": False, "reason": f"{type(e).__name__}: {e}"}


def run_alignment(records: list[UtteranceRecord], pairs: list[PairRecord], cfg: RunConfig) -> dict:
    """Align every pair with bounded parallelism; failures are isolated and
    reported, outputs land in out_dir/<pair_id>/."""
    by_id = {r.utt_id: r.to_dict() for r in records}
    jobs_args = []
    for p in pairs:
        if p.el_utt_id not in by_id or p.he_utt_id not in by_id:
            raise ManifestError(f"pair {p.pair_id} references unknown utterances")
        jobs_args.append((p.to_dict(), by_id[p.el_utt_id], by_id[p.he_utt_id], cfg))

    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    if cfg.jobs <= 1:
        results = [_run_one(a) for a in jobs_args]
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_one, jobs_args, chunksize=1))

    failures = [{"pair_id": r["pair_id"], "reason": r["reason"]} for r in results if not r["ok"]]
    costs = [r["stats"]["normalized_cost"] for r in results if r["ok"]]
    report = {
        "pairs": len(pairs),
        "success": len(results) - len(failures),
        "failures": failures,
        "normalized_cost": {
            "min": min(costs) if costs else None,
            "max": max(costs) if costs else None,
            "mean": float(np.mean(costs)) if costs else None,
            "median": float(np.median(costs)) if costs else None,
        },
    }
    return report


def write_pairs_jsonl(pairs: list[PairRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")


def load_pairs_jsonl(path) -> list[PairRecord]:
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                pairs.append(
                    PairRecord(
                        pair_id=obj["pair_id"],
                        el_utt_id=obj["el_utt_id"],
                        he_utt_id=obj["he_utt_id"],
                        content_id=obj["content_id"],
                    )
                )
            except (json.JSONDecodeError, KeyError) as e:
                raise ManifestError(f"line {lineno}: bad pair record ({e})") from e
    return pairs
