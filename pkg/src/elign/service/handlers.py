"""Service handlers: the single entry point to the core package.

The FastAPI routes and the CLI both dispatch through these functions, so
behavior is identical whether a stage runs in-process or behind HTTP."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .. import __version__
from ..align import AlignConfig, align_pair
from ..audio import CANONICAL_RATE, load_wav, resample, save_wav
from ..augment import AugmentPolicy, augment_batch, load_noise_bank, snr_sweep
from ..config import Config
from ..corpus import (
    RunConfig,
    expand_pairs,
    load_manifest,
    load_pairs_jsonl,
    run_alignment,
    split_by_content,
    write_pairs_jsonl,
)
from ..dsp import FrameSpec, PitchTrack, logmel_features, mark_pitch, remove_long_silences, track_pitch, vad
from ..fmat import read_fmat, write_fmat
from ..metrics import (
    MetricColumn,
    MetricReport,
    MetricValue,
    aggregate_sweep,
    cosine_sim,
    logf0_rmse,
    normalize_report,
    read_transcripts,
    report_to_csv,
    sweep_table_to_csv,
    transcription_metrics,
)
from . import schemas as s


def _load_audio(path: str, keep_rate: bool, sample_rate: int = CANONICAL_RATE):
    w = load_wav(path)
    if not keep_rate and w.sample_rate != sample_rate:
        w = resample(w, sample_rate)
    return w


def health() -> s.HealthResponse:
    return s.HealthResponse(status="ok", version=__version__)


def silence(req: s.SilenceRequest) -> s.SilenceResponse:
    w = _load_audio(req.input_path, req.keep_rate)
    r = vad(w, FrameSpec(window="rect"), threshold_db=req.threshold_db, hangover_frames=req.hangover_frames)
    out, edits = remove_long_silences(w, r, max_silence_ms=req.max_silence_ms, crossfade_ms=req.crossfade_ms)
    save_wav(out, req.output_path, encoding="pcm16")
    return s.SilenceResponse(
        output_path=req.output_path,
        input_seconds=w.duration_seconds,
        output_seconds=out.duration_seconds,
        segments_trimmed=max(0, len(edits.kept) - 1),
    )


def features(req: s.FeaturesRequest) -> s.FeaturesResponse:
    w = _load_audio(req.input_path, req.keep_rate)
    m = logmel_features(w, FrameSpec(req.frame_seconds, req.hop_seconds), n_mels=req.n_mels)
    write_fmat(m, req.output_path)
    return s.FeaturesResponse(output_path=req.output_path, rows=m.rows, cols=m.cols, hop_seconds=m.hop_seconds)


def _track_to_dict(t: PitchTrack) -> dict:
    return {
        "hop_seconds": t.hop_seconds,
        "f0_hz": [None if not v else float(f) for f, v in zip(t.f0_hz, t.voicing)],
        "voicing": [bool(v) for v in t.voicing],
    }


def _track_from_dict(d: dict) -> PitchTrack:
    f0 = np.array([np.nan if v is None else float(v) for v in d["f0_hz"]])
    return PitchTrack(
        hop_seconds=float(d["hop_seconds"]),
        f0_hz=f0,
        voicing=np.array(d["voicing"], dtype=bool),
    )


def pitch(req: s.PitchRequest) -> s.PitchResponse:
    w = _load_audio(req.input_path, req.keep_rate)
    t = track_pitch(w, req.f0_min, req.f0_max, req.hop_seconds)
    if req.output_path:
        with open(req.output_path, "w", encoding="utf-8") as f:
            json.dump(_track_to_dict(t), f)
            f.write("\n")
    voiced = t.f0_hz[t.voicing]
    return s.PitchResponse(
        output_path=req.output_path,
        n_frames=t.n_frames,
        voiced_fraction=float(np.mean(t.voicing)) if t.n_frames else 0.0,
        median_f0_hz=float(np.median(voiced)) if len(voiced) else None,
    )


def stretch(req: s.StretchRequest) -> s.StretchResponse:
    from ..psola import time_stretch

    w = _load_audio(req.input_path, req.keep_rate)
    marks = mark_pitch(w, track_pitch(w, req.f0_min, req.f0_max))
    out = time_stretch(w, marks, req.factor)
    save_wav(out, req.output_path, encoding="pcm16")
    return s.StretchResponse(
        output_path=req.output_path,
        input_seconds=w.duration_seconds,
        output_seconds=out.duration_seconds,
    )


def align(req: s.AlignRequest) -> s.AlignResponse:
    el = _load_audio(req.el_path, req.keep_rate)
    he = _load_audio(req.he_path, req.keep_rate)
    el_feats = read_fmat(req.el_features_path) if req.el_features_path else None
    he_feats = read_fmat(req.he_features_path) if req.he_features_path else None
    cfg = AlignConfig(
        metric=req.metric,
        band_fraction=req.band_fraction,
        max_silence_ms=req.max_silence_ms,
        vad_threshold_db=req.threshold_db,
    )
    result = align_pair(el, he, el_feats=el_feats, he_feats=he_feats, cfg=cfg)

    out_dir = Path(req.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    el_out = out_dir / "el_aligned.wav"
    he_out = out_dir / "he_target.wav"
    stats_out = out_dir / "stats.json"
    save_wav(result.aligned_el, el_out, encoding="pcm16")
    save_wav(result.he_target, he_out, encoding="pcm16")
    with open(stats_out, "w", encoding="utf-8") as f:
        json.dump(result.stats.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    return s.AlignResponse(
        el_aligned_path=str(el_out),
        he_target_path=str(he_out),
        stats_path=str(stats_out),
        **result.stats.to_dict(),
    )


def pairs(req: s.PairsRequest) -> s.PairsResponse:
    records = load_manifest(req.manifest_path)
    pair_list, unpaired = expand_pairs(records)
    write_pairs_jsonl(pair_list, req.output_path)
    return s.PairsResponse(output_path=req.output_path, pairs=len(pair_list), unpaired=unpaired)


def split(req: s.SplitRequest) -> s.SplitResponse:
    records = load_manifest(req.manifest_path)
    result = split_by_content(records, ratios=req.ratios, seed=req.seed)
    payload = {"train": result.train, "dev": result.dev, "val": result.val, "seed": req.seed}
    with open(req.output_path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return s.SplitResponse(
        output_path=req.output_path,
        train=len(result.train),
        dev=len(result.dev),
        val=len(result.val),
    )


def corpus_run(req: s.CorpusRunRequest, config: Config | None = None) -> s.CorpusRunResponse:
    records = load_manifest(req.manifest_path)
    if req.pairs_path:
        pair_list = load_pairs_jsonl(req.pairs_path)
    else:
        pair_list, _ = expand_pairs(records)
    align_cfg = (config or Config()).align_config()
    align_cfg.metric = req.metric
    align_cfg.band_fraction = req.band_fraction
    cfg = RunConfig(
        out_dir=req.out_dir,
        jobs=req.jobs,
        keep_rate=req.keep_rate,
        use_external_features=req.use_external_features,
        align=align_cfg,
    )
    report = run_alignment(records, pair_list, cfg)
    report_path = req.report_path
    if report_path is None:
        report_path = str(Path(req.out_dir) / "report.json")
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    return s.CorpusRunResponse(
        report_path=report_path,
        pairs=report["pairs"],
        success=report["success"],
        failures=report["failures"],
    )


def augment(req: s.AugmentRequest) -> s.AugmentResponse:
    files = sorted(Path(req.in_dir).glob("*.wav"))
    if not files:
        raise ValueError(f"no .wav files in {req.in_dir}")
    first = load_wav(files[0])
    bank = load_noise_bank(req.noise_dir, first.sample_rate)
    policy = AugmentPolicy(
        probability=req.probability,
        snr_min_db=req.snr_min_db,
        snr_max_db=req.snr_max_db,
        seed=req.seed,
    )
    log = augment_batch(files, bank, policy, req.out_dir)
    return s.AugmentResponse(
        out_dir=req.out_dir,
        files=len(files),
        augmented=sum(1 for e in log if e.get("augmented")),
        errors=sum(1 for e in log if "error" in e),
        log_path=str(Path(req.out_dir) / "augment_log.jsonl"),
    )


def sweep(req: s.SweepRequest) -> s.SweepResponse:
    files = sorted(Path(req.in_dir).glob("*.wav"))
    if not files:
        raise ValueError(f"no .wav files in {req.in_dir}")
    first = load_wav(files[0])
    bank = load_noise_bank(req.noise_dir, first.sample_rate)
    index_path = snr_sweep(files, bank, req.out_dir, snr_grid=tuple(req.snrs), seed=req.seed)
    n_rows = sum(1 for _ in open(index_path)) - 1
    return s.SweepResponse(index_path=str(index_path), files=n_rows)


def eval_transcription(req: s.EvalTranscriptionRequest) -> s.EvalTranscriptionResponse:
    refs = read_transcripts(req.ref_path)
    hyps = read_transcripts(req.hyp_path)
    out = transcription_metrics(
        refs,
        hyps,
        unit=req.unit,
        resamples=req.bootstrap,
        level=req.level,
        seed=req.seed,
        macro=req.macro,
    )
    if req.output_path:
        with open(req.output_path, "w", encoding="utf-8") as f:
            json.dump(out, f, indent=2, sort_keys=True)
            f.write("\n")
    return s.EvalTranscriptionResponse(
        output_path=req.output_path,
        unit=out["unit"],
        utterances=out["utterances"],
        error_rate=out["error_rate"],
        ci_low=out["ci_low"],
        ci_high=out["ci_high"],
        wip=out["wip"],
        wil=out["wil"],
        missing_hypotheses=out["missing_hypotheses"],
    )


def _load_track(path: str, req: s.EvalF0Request) -> PitchTrack:
    if path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as f:
            return _track_from_dict(json.load(f))
    w = _load_audio(path, req.keep_rate)
    return track_pitch(w, req.f0_min, req.f0_max, req.hop_seconds)


def eval_f0(req: s.EvalF0Request) -> s.EvalF0Response:
    a = _load_track(req.a_path, req)
    b = _load_track(req.b_path, req)
    r = logf0_rmse(a, b)
    return s.EvalF0Response(rmse=r.rmse, voiced_overlap=r.voiced_overlap)


def eval_sim(req: s.EvalSimRequest) -> s.EvalSimResponse:
    a = read_fmat(req.a_path)
    b = read_fmat(req.b_path)
    return s.EvalSimResponse(similarity=cosine_sim(a, b))


def _report_from_json(data: dict) -> MetricReport:
    if "metrics" not in data or not isinstance(data["metrics"], dict):
        raise ValueError('metrics JSON must have a top-level "metrics" object')
    metrics = {}
    for name, col in data["metrics"].items():
        if "higher_is_better" not in col or "values" not in col:
            raise ValueError(f'metric {name!r} needs "higher_is_better" and "values"')
        per_method = {}
        for method, v in col["values"].items():
            if isinstance(v, dict):
                per_method[method] = MetricValue(
                    value=float(v["value"]),
                    ci_low=v.get("ci_low"),
                    ci_high=v.get("ci_high"),
                )
            else:
                per_method[method] = MetricValue(value=float(v))
        metrics[name] = MetricColumn(higher_is_better=bool(col["higher_is_better"]), per_method=per_method)
    return MetricReport(metrics=metrics)


def eval_report(req: s.EvalReportRequest) -> s.EvalReportResponse:
    with open(req.input_path, "r", encoding="utf-8") as f:
        raw = _report_from_json(json.load(f))
    normalized = normalize_report(raw)
    report_to_csv(normalized, req.output_csv)
    if req.output_json:
        payload = {
            "metrics": {
                name: {
                    "higher_is_better": True,
                    "normalization": {"min": normalized.normalization[name][0], "max": normalized.normalization[name][1]},
                    "values": {
                        m: {"value": mv.value, "ci_low": mv.ci_low, "ci_high": mv.ci_high}
                        for m, mv in col.per_method.items()
                    },
                }
                for name, col in normalized.metrics.items()
            }
        }
        with open(req.output_json, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    methods = sorted({m for col in normalized.metrics.values() for m in col.per_method})
    return s.EvalReportResponse(
        output_csv=req.output_csv,
        output_json=req.output_json,
        metrics=sorted(normalized.metrics),
        methods=methods,
    )


def sweep_aggregate(req: s.SweepAggregateRequest) -> s.SweepAggregateResponse:
    refs = read_transcripts(req.ref_path)
    hyps = read_transcripts(req.hyp_path)
    clean = read_transcripts(req.clean_hyp_path) if req.clean_hyp_path else None
    table = aggregate_sweep(req.index_path, refs, hyps, clean_hyps=clean)
    if req.output_csv:
        sweep_table_to_csv(table, req.output_csv)
    return s.SweepAggregateResponse(output_csv=req.output_csv, table=table)


def fmat_info(req: s.FmatInfoRequest) -> s.FmatInfoResponse:
    m = read_fmat(req.path)
    return s.FmatInfoResponse(
        path=req.path,
        rows=m.rows,
        cols=m.cols,
        hop_seconds=m.hop_seconds,
        start_offset_seconds=m.start_offset_seconds,
    )
